//! Sweep axes given as `name=lo:hi:step`.

use std::str::FromStr;

use crate::config::{ConfigError, SWEEPABLE};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl SweepAxis {
    pub fn new(name: &str, lo: f64, hi: f64, step: f64) -> Result<Self, ConfigError> {
        if !SWEEPABLE.contains(&name) {
            return Err(ConfigError::Invalid(format!(
                "`{name}` cannot be swept; choose one of {}",
                SWEEPABLE.join(", ")
            )));
        }
        if !(lo.is_finite() && hi.is_finite() && step.is_finite()) {
            return Err(ConfigError::Invalid(format!(
                "sweep `{name}`: bounds and step must be finite"
            )));
        }
        if step <= 0.0 {
            return Err(ConfigError::Invalid(format!(
                "sweep `{name}`: step must be positive, got {step}"
            )));
        }
        if lo >= hi {
            return Err(ConfigError::Invalid(format!(
                "sweep `{name}`: lo ({lo}) must be below hi ({hi})"
            )));
        }
        Ok(Self {
            name: name.to_string(),
            lo,
            hi,
            step,
        })
    }

    /// Inclusive grid; `hi` is kept when it lies on the lattice up to rounding.
    pub fn values(&self) -> Vec<f64> {
        let count = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|k| self.lo + k as f64 * self.step).collect()
    }
}

impl FromStr for SweepAxis {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ConfigError::Invalid(format!("sweep `{s}` must look like name=lo:hi:step"));
        let (name, range) = s.split_once('=').ok_or_else(bad)?;
        let parts: Vec<f64> = range
            .split(':')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?;
        match parts[..] {
            [lo, hi, step] => Self::new(name.trim(), lo, hi, step),
            _ => Err(bad()),
        }
    }
}

/// One or two axes.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axes: Vec<SweepAxis>,
}

impl SweepSpec {
    pub fn new(axes: Vec<SweepAxis>) -> Result<Self, ConfigError> {
        match axes.len() {
            1 => Ok(Self { axes }),
            2 if axes[0].name != axes[1].name => Ok(Self { axes }),
            2 => Err(ConfigError::Invalid(format!("`{}` is swept twice", axes[0].name))),
            0 => Err(ConfigError::Invalid("a sweep needs at least one --sweep axis".into())),
            _ => Err(ConfigError::Invalid("at most two sweep axes are supported".into())),
        }
    }

    /// Grid points in row-major order (first axis outermost).
    pub fn points(&self) -> Vec<Vec<f64>> {
        let first = self.axes[0].values();
        match self.axes.get(1) {
            None => first.into_iter().map(|x| vec![x]).collect(),
            Some(second) => {
                let ys = second.values();
                first
                    .iter()
                    .flat_map(|&x| ys.iter().map(move |&y| vec![x, y]))
                    .collect()
            }
        }
    }
}
