//! Flat `key = value` run configuration.
//!
//! Keys are the model parameter names in lower snake case. Anything absent
//! takes its default; unknown keys are rejected with their line number.

use std::fmt;
use std::path::Path;

use mixsig_core::delay::HdvStartupParams;
use mixsig_core::signal::{Approach, IntersectionConfig, LostTimeMode, Objective};
use mixsig_core::{MarkovSpec, VehicleParams};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("{location}unknown key `{key}`")]
    UnknownKey { location: Location, key: String },

    #[error("{location}bad value for `{key}`: {message}")]
    BadValue {
        location: Location,
        key: String,
        message: String,
    },

    #[error("missing required parameter `{0}` (set it in the config file or with --set {0}=...)")]
    Missing(&'static str),

    #[error("{0}")]
    Invalid(String),

    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Where a key came from, for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Line(usize),
    Override,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Line(n) => write!(f, "line {n}: "),
            Location::Override => write!(f, "--set: "),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub omega_e: f64,
    pub omega_v: f64,
    pub n: usize,
    pub v_free: f64,
    pub t_r: f64,
    pub t_a: f64,
    pub tau_safe: f64,
    pub tau_hdv: f64,
    pub vehicle_length: f64,
    /// No default: the penetration rate is what most studies vary.
    pub p: Option<f64>,
    /// Cycle length C (s).
    pub c: f64,
    pub green_ratio: Vec<f64>,
    pub q: Vec<f64>,
    pub x_c: f64,
    pub l_c: f64,
    pub critical_flow_ratios: Option<Vec<f64>>,
    pub phases: usize,
    pub ls_mode: LostTimeMode,
    pub objective: Objective,
    pub seed: u64,
    /// Upper cycle bound for optimization (s).
    pub c_max: f64,
    /// Per-approach capacity override (veh/s).
    pub capacity: Option<f64>,
    /// Vehicles sampled by the Monte Carlo capacity check.
    pub mc_vehicles: usize,
    pub out: Option<String>,
    pub svg: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            omega_e: 1.2,
            omega_v: 0.5,
            n: 5,
            v_free: 15.0,
            t_r: 2.0,
            t_a: 3.0,
            tau_safe: 0.3,
            tau_hdv: 1.5,
            vehicle_length: 5.0,
            p: None,
            c: 100.0,
            green_ratio: vec![0.55],
            q: vec![0.2],
            x_c: 0.95,
            l_c: 4.0,
            critical_flow_ratios: None,
            phases: 2,
            ls_mode: LostTimeMode::Derived,
            objective: Objective::TotalPerCycle,
            seed: 20240601,
            c_max: 300.0,
            capacity: None,
            mc_vehicles: 1_000_000,
            out: None,
            svg: false,
        }
    }
}

/// Scalar keys that a sweep may vary.
pub const SWEEPABLE: &[&str] = &[
    "q",
    "green_ratio",
    "p",
    "c",
    "t_r",
    "t_a",
    "omega_e",
    "omega_v",
    "tau_safe",
    "tau_hdv",
    "vehicle_length",
    "v_free",
    "x_c",
    "l_c",
];

fn parse_f64(key: &str, raw: &str, location: Location) -> Result<f64, ConfigError> {
    raw.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| ConfigError::BadValue {
            location,
            key: key.to_string(),
            message: format!("`{raw}` is not a finite number"),
        })
}

fn parse_list(key: &str, raw: &str, location: Location) -> Result<Vec<f64>, ConfigError> {
    let items: Vec<f64> = raw
        .split(',')
        .map(|s| parse_f64(key, s, location))
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(ConfigError::BadValue {
            location,
            key: key.into(),
            message: "empty list".into(),
        });
    }
    Ok(items)
}

fn parse_uint(key: &str, raw: &str, location: Location) -> Result<u64, ConfigError> {
    raw.trim().parse::<u64>().map_err(|_| ConfigError::BadValue {
        location,
        key: key.to_string(),
        message: format!("`{raw}` is not a non-negative integer"),
    })
}

fn parse_bool(key: &str, raw: &str, location: Location) -> Result<bool, ConfigError> {
    match raw.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(ConfigError::BadValue {
            location,
            key: key.to_string(),
            message: format!("`{other}` is not a boolean"),
        }),
    }
}

pub fn parse_ls_mode(raw: &str) -> Option<LostTimeMode> {
    match raw.trim() {
        "derived" => Some(LostTimeMode::Derived),
        "paper" | "printed" => Some(LostTimeMode::Printed),
        _ => None,
    }
}

pub fn parse_objective(raw: &str) -> Option<Objective> {
    match raw.trim() {
        "total" => Some(Objective::TotalPerCycle),
        "average" => Some(Objective::AveragePerVehicle),
        _ => None,
    }
}

fn ls_mode_name(mode: LostTimeMode) -> &'static str {
    match mode {
        LostTimeMode::Derived => "derived",
        LostTimeMode::Printed => "paper",
    }
}

pub fn objective_name(objective: Objective) -> &'static str {
    match objective {
        Objective::TotalPerCycle => "total",
        Objective::AveragePerVehicle => "average",
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                message: format!("expected `key = value`, found `{content}`"),
            })?;
            cfg.set(key.trim(), value.trim(), Location::Line(line))?;
        }
        Ok(cfg)
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| ConfigError::Invalid(format!("--set expects key=value, got `{assignment}`")))?;
        self.set(key.trim(), value.trim(), Location::Override)
    }

    pub fn set(&mut self, key: &str, value: &str, location: Location) -> Result<(), ConfigError> {
        let num = |v: &str| parse_f64(key, v, location);
        match key {
            "omega_e" => self.omega_e = num(value)?,
            "omega_v" => self.omega_v = num(value)?,
            "n" => self.n = parse_uint(key, value, location)? as usize,
            "v_free" => self.v_free = num(value)?,
            "t_r" => self.t_r = num(value)?,
            "t_a" => self.t_a = num(value)?,
            "tau_safe" => self.tau_safe = num(value)?,
            "tau_hdv" => self.tau_hdv = num(value)?,
            "vehicle_length" => self.vehicle_length = num(value)?,
            "p" => self.p = Some(num(value)?),
            "c" => self.c = num(value)?,
            "green_ratio" => self.green_ratio = parse_list(key, value, location)?,
            "q" => self.q = parse_list(key, value, location)?,
            "x_c" => self.x_c = num(value)?,
            "l_c" => self.l_c = num(value)?,
            "critical_flow_ratios" => self.critical_flow_ratios = Some(parse_list(key, value, location)?),
            "phases" => self.phases = parse_uint(key, value, location)? as usize,
            "ls_mode" => {
                self.ls_mode = parse_ls_mode(value).ok_or_else(|| ConfigError::BadValue {
                    location,
                    key: key.into(),
                    message: "expected `derived` or `paper`".into(),
                })?
            }
            "objective" => {
                self.objective = parse_objective(value).ok_or_else(|| ConfigError::BadValue {
                    location,
                    key: key.into(),
                    message: "expected `total` or `average`".into(),
                })?
            }
            "seed" => self.seed = parse_uint(key, value, location)?,
            "c_max" => self.c_max = num(value)?,
            "capacity" => self.capacity = Some(num(value)?),
            "mc_vehicles" => self.mc_vehicles = parse_uint(key, value, location)? as usize,
            "out" => self.out = Some(value.to_string()),
            "svg" => self.svg = parse_bool(key, value, location)?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    location,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    /// Sets a sweepable scalar; list-valued keys are overwritten on every approach.
    pub fn set_number(&mut self, key: &str, value: f64) -> Result<(), ConfigError> {
        match key {
            "q" => self.q.iter_mut().for_each(|q| *q = value),
            "green_ratio" => self.green_ratio.iter_mut().for_each(|g| *g = value),
            _ if SWEEPABLE.contains(&key) => self.set(key, &value.to_string(), Location::Override)?,
            _ => return Err(ConfigError::Invalid(format!("`{key}` cannot be swept"))),
        }
        Ok(())
    }

    /// Hard errors for values the model cannot use.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if let Some(p) = self.p {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("p = {p} must lie in [0, 1]"));
            }
        }
        if self.q.iter().any(|&q| q < 0.0) {
            return bad("arrival rates must be non-negative".into());
        }
        if self.green_ratio.iter().any(|&g| g <= 0.0 || g > 1.0) {
            return bad("green ratios must lie in (0, 1]".into());
        }
        if self.green_ratio.len() != 1 && self.green_ratio.len() != self.q.len() {
            return bad(format!(
                "green_ratio has {} entries but q has {}; give one shared ratio or one per approach",
                self.green_ratio.len(),
                self.q.len()
            ));
        }
        if self.c <= 0.0 {
            return bad(format!("cycle length c = {} must be positive", self.c));
        }
        if self.phases == 0 {
            return bad("phases must be at least 1".into());
        }
        if self.mc_vehicles == 0 {
            return bad("mc_vehicles must be at least 1".into());
        }
        if self.t_r < 0.0 || self.t_a < 0.0 {
            return bad("t_r and t_a must be non-negative".into());
        }
        self.vehicle()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Soft warnings for values outside the studied parameter ranges.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut check = |name: &str, v: f64, lo: f64, hi: f64| {
            if v < lo || v > hi {
                out.push(format!("{name} = {v} lies outside the studied range [{lo}, {hi}]"));
            }
        };
        if let Some(p) = self.p {
            check("p", p, 0.0, 1.0);
        }
        check("c", self.c, 60.0, 120.0);
        for &g in &self.green_ratio {
            check("green_ratio", g, 0.25, 0.75);
        }
        for &q in &self.q {
            check("q", q, 0.15, 0.35);
        }
        out
    }

    pub fn vehicle(&self) -> VehicleParams {
        VehicleParams {
            omega_e: self.omega_e,
            omega_v: self.omega_v,
            tau_safe: self.tau_safe,
            tau_hdv: self.tau_hdv,
            vehicle_length: self.vehicle_length,
            v_free: self.v_free,
        }
    }

    pub fn startup(&self) -> Result<HdvStartupParams, ConfigError> {
        HdvStartupParams::new(self.t_r, self.t_a).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn require_p(&self) -> Result<f64, ConfigError> {
        self.p.ok_or(ConfigError::Missing("p"))
    }

    pub fn markov(&self) -> Result<MarkovSpec, ConfigError> {
        MarkovSpec::new(self.n, self.require_p()?).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn intersection(&self) -> Result<IntersectionConfig, ConfigError> {
        self.validate()?;
        let startup = self.startup()?;
        let approaches = self
            .q
            .iter()
            .enumerate()
            .map(|(i, &q)| {
                let lam = if self.green_ratio.len() == 1 {
                    self.green_ratio[0]
                } else {
                    self.green_ratio[i]
                };
                let a = Approach::new(q, lam, startup)?;
                match self.capacity {
                    Some(c) => a.with_capacity(c),
                    None => Ok(a),
                }
            })
            .collect::<mixsig_core::Result<Vec<_>>>()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let mut cfg = IntersectionConfig::new(approaches, self.markov()?);
        cfg.vehicle = self.vehicle();
        cfg.saturation_degree = self.x_c;
        cfg.clearance_lost = self.l_c;
        cfg.critical_flow_ratios = self.critical_flow_ratios.clone();
        cfg.phases = Some(self.phases);
        cfg.lost_time_mode = self.ls_mode;
        cfg.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(cfg)
    }

    /// Fully resolved configuration, one `key = value` per entry, fixed order.
    pub fn resolved(&self) -> Vec<(&'static str, String)> {
        let mut v = vec![
            ("omega_e", self.omega_e.to_string()),
            ("omega_v", self.omega_v.to_string()),
            ("n", self.n.to_string()),
            ("v_free", self.v_free.to_string()),
            ("t_r", self.t_r.to_string()),
            ("t_a", self.t_a.to_string()),
            ("tau_safe", self.tau_safe.to_string()),
            ("tau_hdv", self.tau_hdv.to_string()),
            ("vehicle_length", self.vehicle_length.to_string()),
            ("p", self.p.map_or_else(|| "unset".to_string(), |p| p.to_string())),
            ("c", self.c.to_string()),
            ("green_ratio", join(&self.green_ratio)),
            ("q", join(&self.q)),
            ("x_c", self.x_c.to_string()),
            ("l_c", self.l_c.to_string()),
            (
                "critical_flow_ratios",
                self.critical_flow_ratios
                    .as_deref()
                    .map_or_else(|| "derived".to_string(), join),
            ),
            ("phases", self.phases.to_string()),
            ("ls_mode", ls_mode_name(self.ls_mode).to_string()),
            ("objective", objective_name(self.objective).to_string()),
            ("seed", self.seed.to_string()),
            ("c_max", self.c_max.to_string()),
            (
                "capacity",
                self.capacity.map_or_else(|| "derived".to_string(), |c| c.to_string()),
            ),
            ("mc_vehicles", self.mc_vehicles.to_string()),
        ];
        v.shrink_to_fit();
        v
    }

    /// The resolved configuration as `# key = value` comment lines.
    pub fn header(&self) -> String {
        self.resolved().iter().map(|(k, v)| format!("# {k} = {v}\n")).collect()
    }
}
