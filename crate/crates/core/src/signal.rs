//! Intersection-level delay, lost time and cycle-length selection.
//!
//! With `R_i = (1 - lambda_i) C` every per-approach delay is a quadratic in the
//! cycle length, so the total is `A C^2 + B C + K` with
//!
//! ```text
//! w_i = c_i q_i / (c_i - q_i)
//! A   = sum_i w_i (1 - lambda_i)^2 / 2
//! B   = sum_i w_i (1 - p)(1 - lambda_i)(T_r,i + T_a,i / 2)
//! ```
//!
//! and `dD/dC = 2AC + B >= 0`. The printed optimum and derivative are kept
//! alongside for comparison only.

use crate::capacity::{mixed_capacity, Capacity, VehicleParams};
use crate::delay::{
    delay_cav, delay_hdv, expected_delay, ApproachDemand, ExpectedDelay, HdvStartupParams, SignalTiming,
};
use crate::error::{ensure, ModelError, Result};
use crate::markov::MarkovSpec;

const GRID_POINTS: usize = 200;
const GOLDEN_TOL: f64 = 1e-10;

/// One signalized approach.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Approach {
    pub demand: ApproachDemand,
    pub green_ratio: f64,
    pub startup: HdvStartupParams,
    pub capacity_override: Option<f64>,
}

impl Approach {
    pub fn new(arrival_rate: f64, green_ratio: f64, startup: HdvStartupParams) -> Result<Self> {
        // lambda = 1 (no red) is admitted as the boundary case; delay vanishes there
        ensure(
            green_ratio > 0.0 && green_ratio <= 1.0,
            "green_ratio",
            green_ratio,
            "green ratio must lie in (0, 1]",
        )?;
        Ok(Self {
            demand: ApproachDemand::new(arrival_rate)?,
            green_ratio,
            startup,
            capacity_override: None,
        })
    }

    pub fn with_capacity(mut self, capacity: f64) -> Result<Self> {
        Capacity::from_rate(capacity)?;
        self.capacity_override = Some(capacity);
        Ok(self)
    }

    pub fn red_time(&self, cycle: f64) -> f64 {
        red_time(self.green_ratio, cycle)
    }
}

/// How start-up lost time per HDV-led phase is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LostTimeMode {
    /// `T_r + T_a/2`: where the saturation-rate discharge line meets zero.
    #[default]
    Derived,
    /// `T_r + 3 T_a/2`, the printed coefficient.
    Printed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Objective {
    /// Total vehicle delay per cycle.
    #[default]
    TotalPerCycle,
    /// Total delay over all vehicles arriving in one cycle.
    AveragePerVehicle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntersectionConfig {
    pub approaches: Vec<Approach>,
    /// Carries the penetration rate shared by all approaches.
    pub markov: MarkovSpec,
    pub vehicle: VehicleParams,
    /// X_c
    pub saturation_degree: f64,
    /// L_c (s per cycle)
    pub clearance_lost: f64,
    /// Critical (v/c) ratios; derived as `q_i / c_i` when absent.
    pub critical_flow_ratios: Option<Vec<f64>>,
    /// Phases charged start-up lost time; defaults to the approach count.
    pub phases: Option<usize>,
    pub lost_time_mode: LostTimeMode,
}

impl IntersectionConfig {
    /// Defaults for everything but the approaches and the chain.
    pub fn new(approaches: Vec<Approach>, markov: MarkovSpec) -> Self {
        Self {
            approaches,
            markov,
            vehicle: VehicleParams::default(),
            saturation_degree: 0.95,
            clearance_lost: 4.0,
            critical_flow_ratios: None,
            phases: None,
            lost_time_mode: LostTimeMode::Derived,
        }
    }

    pub fn penetration(&self) -> f64 {
        self.markov.p()
    }

    pub fn with_penetration(&self, p: f64) -> Result<Self> {
        Ok(Self {
            markov: MarkovSpec::new(self.markov.n(), p)?,
            ..self.clone()
        })
    }

    pub fn validate(&self) -> Result<()> {
        ensure(
            !self.approaches.is_empty(),
            "approaches",
            0.0,
            "need at least one approach",
        )?;
        ensure(
            self.saturation_degree > 0.0 && self.saturation_degree <= 1.0,
            "x_c",
            self.saturation_degree,
            "degree of saturation must lie in (0, 1]",
        )?;
        ensure(
            self.clearance_lost >= 0.0,
            "l_c",
            self.clearance_lost,
            "must be non-negative",
        )?;
        if let Some(phases) = self.phases {
            ensure(phases >= 1, "phases", phases as f64, "need at least one phase")?;
        }
        self.vehicle.validate()
    }

    pub fn shared_capacity(&self) -> Result<Capacity> {
        mixed_capacity(&self.markov, &self.vehicle)
    }

    /// Capacities per approach, honouring overrides.
    pub fn capacities(&self) -> Result<Vec<Capacity>> {
        let shared = self.shared_capacity()?;
        self.approaches
            .iter()
            .map(|a| match a.capacity_override {
                Some(c) => Capacity::from_rate(c),
                None => Ok(shared),
            })
            .collect()
    }

    /// Critical flow ratio per phase; derived ratios reuse approaches cyclically.
    pub fn flow_ratios(&self) -> Result<Vec<f64>> {
        match &self.critical_flow_ratios {
            Some(r) => Ok(r.clone()),
            None => {
                let per_approach: Vec<f64> = self
                    .approaches
                    .iter()
                    .zip(self.capacities()?)
                    .map(|(a, c)| a.demand.arrival_rate / c.value)
                    .collect();
                Ok(per_approach.iter().cycle().take(self.phase_count()).copied().collect())
            }
        }
    }

    /// Explicit phase count, else one phase per approach.
    pub fn phase_count(&self) -> usize {
        self.phases.unwrap_or(self.approaches.len())
    }

    /// Start-up parameters charged per phase (approaches reused cyclically).
    pub fn phase_startups(&self) -> Vec<HdvStartupParams> {
        self.approaches
            .iter()
            .cycle()
            .take(self.phase_count())
            .map(|a| a.startup)
            .collect()
    }

    fn total_arrival_rate(&self) -> f64 {
        self.approaches.iter().map(|a| a.demand.arrival_rate).sum()
    }
}

/// Outcome of an optimizer run plus comparison diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleOptimum {
    pub c_min: f64,
    /// Printed closed-form optimum; may be non-positive or undefined.
    pub c_star_paper: Result<f64>,
    pub c_opt_numeric: f64,
    pub objective: Objective,
    pub delay_at_opt: f64,
    /// Grid points dropped because the model is not under-saturated there.
    pub excluded_grid_points: usize,
    pub diagnostics: DerivativeReport,
}

impl CycleOptimum {
    /// The printed optimum lies outside the physical region.
    pub fn c_star_non_physical(&self) -> bool {
        matches!(self.c_star_paper, Ok(c) if c <= 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeReport {
    pub cycle: f64,
    pub exact: f64,
    pub printed: Result<f64>,
}

pub fn red_time(green_ratio: f64, cycle: f64) -> f64 {
    (1.0 - green_ratio) * cycle
}

/// Expected delay of approach `index` at cycle length `cycle`.
///
/// A leader type with zero probability is skipped so a regime failure in a
/// branch that never occurs does not poison the mix.
pub fn approach_delay(config: &IntersectionConfig, index: usize, cycle: f64) -> Result<ExpectedDelay> {
    let approach = &config.approaches[index];
    let c = config.capacities()?[index];
    approach_delay_with(approach, &c, config.penetration(), cycle)
}

fn approach_delay_with(approach: &Approach, c: &Capacity, p: f64, cycle: f64) -> Result<ExpectedDelay> {
    let timing = SignalTiming::from_cycle(cycle, approach.green_ratio)?;
    let cav = if p > 0.0 {
        Some(delay_cav(&approach.demand, &timing, c)?)
    } else {
        None
    };
    let hdv = if p < 1.0 {
        Some(delay_hdv(&approach.demand, &timing, &approach.startup, c)?)
    } else {
        None
    };
    Ok(match (cav, hdv) {
        (Some(cav), Some(hdv)) => expected_delay(p, &cav, &hdv),
        (Some(only), None) | (None, Some(only)) => ExpectedDelay {
            total: only.total_delay,
            average: only.avg_delay,
        },
        (None, None) => unreachable!("p is either positive or below one"),
    })
}

/// Per-approach expected delays; regime failures are gathered by index.
pub fn approach_delays(config: &IntersectionConfig, cycle: f64) -> Result<Vec<ExpectedDelay>> {
    config.validate()?;
    let caps = config.capacities()?;
    let p = config.penetration();
    let mut out = Vec::with_capacity(config.approaches.len());
    let mut failures = Vec::new();
    for (i, (a, c)) in config.approaches.iter().zip(&caps).enumerate() {
        match approach_delay_with(a, c, p, cycle) {
            Ok(d) => out.push(d),
            Err(e) if e.is_regime() => failures.push((i, e)),
            Err(e) => return Err(e),
        }
    }
    if failures.is_empty() {
        Ok(out)
    } else {
        Err(ModelError::Approaches(failures))
    }
}

/// Sum of expected per-cycle delays over all approaches (veh*s).
pub fn total_delay(config: &IntersectionConfig, cycle: f64) -> Result<f64> {
    Ok(approach_delays(config, cycle)?.iter().map(|d| d.total).sum())
}

/// Total delay divided by the vehicles arriving in one cycle.
pub fn average_delay(config: &IntersectionConfig, cycle: f64) -> Result<f64> {
    let total = total_delay(config, cycle)?;
    let vehicles = cycle * config.total_arrival_rate();
    Ok(if vehicles > 0.0 { total / vehicles } else { 0.0 })
}

pub fn objective_value(config: &IntersectionConfig, cycle: f64, objective: Objective) -> Result<f64> {
    match objective {
        Objective::TotalPerCycle => total_delay(config, cycle),
        Objective::AveragePerVehicle => average_delay(config, cycle),
    }
}

fn queue_weight(q: f64, c: &Capacity) -> Result<f64> {
    if c.value <= q {
        return Err(ModelError::OverCapacity {
            arrival: q,
            capacity: c.value,
        });
    }
    Ok(c.value * q / (c.value - q))
}

/// `(A, B)` with `D_total(C) = A C^2 + B C + K` on the under-saturated branch.
pub fn delay_coefficients(config: &IntersectionConfig) -> Result<(f64, f64)> {
    let p = config.penetration();
    let mut a = 0.0;
    let mut b = 0.0;
    for (approach, c) in config.approaches.iter().zip(config.capacities()?) {
        let w = queue_weight(approach.demand.arrival_rate, &c)?;
        let red_share = 1.0 - approach.green_ratio;
        let startup = approach.startup.reaction_time + approach.startup.accel_time / 2.0;
        a += 0.5 * w * red_share * red_share;
        b += w * (1.0 - p) * red_share * startup;
    }
    Ok((a, b))
}

/// `dD_total/dC` of the model's own total delay.
pub fn total_delay_derivative_exact(config: &IntersectionConfig, cycle: f64) -> Result<f64> {
    total_delay(config, cycle)?;
    let (a, b) = delay_coefficients(config)?;
    Ok(2.0 * a * cycle + b)
}

/// The printed derivative, evaluated as written (it carries no `C`).
pub fn total_delay_derivative_paper(config: &IntersectionConfig) -> Result<f64> {
    let p = config.penetration();
    let mut sum = 0.0;
    for (approach, c) in config.approaches.iter().zip(config.capacities()?) {
        let w = queue_weight(approach.demand.arrival_rate, &c)?;
        let lam = approach.green_ratio;
        let ta = approach.startup.accel_time;
        let tr = approach.startup.reaction_time;
        sum += w * (c.value * (lam - 1.0).powi(2) + ta * (1.0 - lam) * (1.0 - p) + 2.0 * tr * (1.0 - lam) * (1.0 - p));
    }
    Ok(sum)
}

/// The printed closed-form optimal cycle, evaluated as written.
pub fn optimal_cycle_paper(config: &IntersectionConfig) -> Result<f64> {
    let p = config.penetration();
    let mut num = 0.0;
    let mut den = 0.0;
    for (approach, c) in config.approaches.iter().zip(config.capacities()?) {
        let w = queue_weight(approach.demand.arrival_rate, &c)?;
        let lam = approach.green_ratio;
        let factor = lam - lam * p + p - 1.0;
        num += w * (approach.startup.accel_time * factor + 2.0 * approach.startup.reaction_time * factor);
        den += w * (lam - 1.0).powi(2);
    }
    if den == 0.0 {
        return Err(ModelError::Degenerate("sum of w_i (lambda_i - 1)^2 is zero"));
    }
    Ok(num / den)
}

pub fn startup_lost_time(phases: &[HdvStartupParams], mode: LostTimeMode) -> Result<f64> {
    ensure(!phases.is_empty(), "phases", 0.0, "need at least one phase")?;
    let accel_factor = match mode {
        LostTimeMode::Derived => 0.5,
        LostTimeMode::Printed => 1.5,
    };
    Ok(phases
        .iter()
        .map(|s| s.reaction_time + accel_factor * s.accel_time)
        .sum())
}

/// Start-up time is lost only behind HDV leaders; clearance time always.
pub fn expected_lost_time(p: f64, startup_total: f64, clearance: f64) -> Result<f64> {
    ensure((0.0..=1.0).contains(&p), "p", p, "penetration rate must lie in [0, 1]")?;
    ensure(startup_total >= 0.0, "l_s", startup_total, "must be non-negative")?;
    ensure(clearance >= 0.0, "l_c", clearance, "must be non-negative")?;
    Ok((1.0 - p) * startup_total + clearance)
}

/// Expected lost time of `config` at its own penetration rate.
pub fn config_lost_time(config: &IntersectionConfig) -> Result<f64> {
    let ls = startup_lost_time(&config.phase_startups(), config.lost_time_mode)?;
    expected_lost_time(config.penetration(), ls, config.clearance_lost)
}

/// Minimum cycle from expected lost time and critical flow ratios.
pub fn min_cycle_length(config: &IntersectionConfig) -> Result<f64> {
    config.validate()?;
    let lost = config_lost_time(config)?;
    let demand: f64 = config.flow_ratios()?.iter().sum();
    let xc = config.saturation_degree;
    if demand >= xc {
        return Err(ModelError::Infeasible(format!(
            "critical flow ratios sum to {demand:.6} >= X_c = {xc}; no cycle length suffices"
        )));
    }
    Ok(lost * xc / (xc - demand))
}

fn golden_section<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > GOLDEN_TOL * (1.0 + a.abs()) {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    0.5 * (a + b)
}

/// Bisects for the feasibility boundary between `bad` and `good`.
fn feasibility_edge<F: Fn(f64) -> bool>(feasible: &F, mut bad: f64, mut good: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (bad + good);
        if mid == bad || mid == good {
            break;
        }
        if feasible(mid) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    good
}

/// Minimizes `objective` over `[lo, hi]` with `lo >= C_min`.
///
/// A 200-point grid brackets the best feasible point; an infeasible neighbour
/// is replaced by the bisected feasibility edge, then golden-section search
/// refines inside the bracket.
pub fn optimize_cycle(config: &IntersectionConfig, lo: f64, hi: f64, objective: Objective) -> Result<CycleOptimum> {
    let c_min = min_cycle_length(config)?;
    ensure(lo.is_finite() && lo > 0.0, "c_lo", lo, "lower bound must be positive")?;
    ensure(
        lo >= c_min * (1.0 - 1e-12),
        "c_lo",
        lo,
        "lower bound is below the minimum cycle length",
    )?;
    ensure(
        hi > lo && hi.is_finite(),
        "c_hi",
        hi,
        "upper bound must exceed the lower bound",
    )?;

    let eval = |c: f64| objective_value(config, c, objective);
    let penalized = |c: f64| eval(c).unwrap_or(f64::INFINITY);
    let feasible = |c: f64| eval(c).is_ok();

    let grid: Vec<f64> = (0..GRID_POINTS)
        .map(|k| {
            if k + 1 == GRID_POINTS {
                hi
            } else {
                lo + (hi - lo) * k as f64 / (GRID_POINTS - 1) as f64
            }
        })
        .collect();
    let values: Vec<Option<f64>> = grid
        .iter()
        .map(|&c| match eval(c) {
            Ok(v) => Ok(Some(v)),
            Err(e) if e.is_regime() => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    let excluded = values.iter().filter(|v| v.is_none()).count();
    let best = values.iter().enumerate().filter_map(|(k, v)| v.map(|v| (k, v))).fold(
        None,
        |acc: Option<(usize, f64)>, (k, v)| match acc {
            Some((_, bv)) if bv <= v => acc,
            _ => Some((k, v)),
        },
    );
    let (k, grid_best) =
        best.ok_or_else(|| ModelError::Infeasible(format!("no under-saturated cycle length in [{lo}, {hi}]")))?;

    let mut a = grid[k.saturating_sub(1)];
    let mut b = grid[(k + 1).min(GRID_POINTS - 1)];
    if !feasible(a) {
        a = feasibility_edge(&feasible, a, grid[k]);
    }
    if !feasible(b) {
        b = feasibility_edge(&feasible, b, grid[k]);
    }
    let refined = golden_section(&penalized, a, b);

    let (c_opt, delay_at_opt) = [refined, a, b, grid[k]].into_iter().map(|c| (c, penalized(c))).fold(
        (grid[k], grid_best),
        |(bc, bv), (c, v)| if v < bv { (c, v) } else { (bc, bv) },
    );

    Ok(CycleOptimum {
        c_min,
        c_star_paper: optimal_cycle_paper(config),
        c_opt_numeric: c_opt,
        objective,
        delay_at_opt,
        excluded_grid_points: excluded,
        diagnostics: DerivativeReport {
            cycle: c_opt,
            exact: total_delay_derivative_exact(config, c_opt)?,
            printed: total_delay_derivative_paper(config),
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub p: f64,
    pub c_min: f64,
    pub c_opt: f64,
    /// Average delay per vehicle at `c_opt` (s/veh).
    pub avg_delay: f64,
}

/// Optimal cycle and its average delay across penetration rates, each row
/// searched on `[C_min(p), c_hi]`.
pub fn optimal_cycle_curve(
    base: &IntersectionConfig,
    penetrations: &[f64],
    c_hi: f64,
    objective: Objective,
) -> Result<Vec<CurveRow>> {
    penetrations
        .iter()
        .map(|&p| {
            let config = base.with_penetration(p)?;
            let c_min = min_cycle_length(&config)?;
            let opt = optimize_cycle(&config, c_min, c_hi.max(c_min * 2.0), objective)?;
            Ok(CurveRow {
                p,
                c_min,
                c_opt: opt.c_opt_numeric,
                avg_delay: average_delay(&config, opt.c_opt_numeric)?,
            })
        })
        .collect()
}

/// `p = 0.01, 0.03, ..., 0.99`.
pub fn penetration_grid() -> Vec<f64> {
    (0..50).map(|k| (1 + 2 * k) as f64 / 100.0).collect()
}
