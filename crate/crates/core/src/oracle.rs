//! Brute-force verifiers for the closed forms.
//!
//! Nothing here reuses the closed-form expressions it checks: the departure
//! curve is rebuilt from its discharge rate, the clearance time is found by
//! bisection, and areas come from trapezoidal panels aligned to the curve's
//! breakpoints.

use crate::capacity::{Capacity, VehicleParams};
use crate::delay::{breakdown_cav, breakdown_hdv, ApproachDemand, HdvStartupParams};
use crate::error::{ensure, ModelError, Result};
use crate::markov::{sample_sequence, MarkovSpec};

const REL_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurveKind {
    CavLed,
    HdvLed(HdvStartupParams),
}

/// Geometry of one departure curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepartureCurveSpec {
    pub kind: CurveKind,
    pub red: f64,
    /// Effective green; when set, a queue outlasting it is reported as saturated.
    pub green: Option<f64>,
    pub capacity: Capacity,
}

impl DepartureCurveSpec {
    fn start_delay(&self) -> f64 {
        match self.kind {
            CurveKind::CavLed => self.red,
            CurveKind::HdvLed(s) => self.red + s.reaction_time,
        }
    }

    fn accel_time(&self) -> f64 {
        match self.kind {
            CurveKind::CavLed => 0.0,
            CurveKind::HdvLed(s) => s.accel_time,
        }
    }

    /// Departures at `t`, integrating a discharge rate that ramps linearly
    /// from 0 to capacity over the acceleration time.
    pub fn departures(&self, t: f64) -> f64 {
        let c = self.capacity.value;
        let s = t - self.start_delay();
        let ta = self.accel_time();
        if s <= 0.0 {
            0.0
        } else if s < ta {
            0.5 * (c * s / ta) * s
        } else {
            c * (s - 0.5 * ta)
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        let start = self.start_delay();
        vec![self.red, start, start + self.accel_time()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationReport {
    pub numeric_delay: f64,
    pub step: f64,
    /// Time at which departures catch up with arrivals.
    pub clear_time: f64,
    /// `None` when the point lies outside the closed form's regime.
    pub closed_form_delay: Option<f64>,
    pub relative_error: Option<f64>,
}

pub fn relative_error(numeric: f64, closed: f64) -> f64 {
    (numeric - closed).abs() / closed.abs().max(REL_EPS)
}

/// First time after the start of red at which cumulative departures reach
/// cumulative arrivals.
fn crossing_time(q: f64, curve: &DepartureCurveSpec) -> f64 {
    let gap = |t: f64| q * t - curve.departures(t);
    let mut lo = curve.start_delay();
    let mut width = 1.0;
    let mut hi = lo + width;
    while gap(hi) >= 0.0 {
        width *= 2.0;
        hi = lo + width;
    }
    // arrivals minus departures is concave, so its non-negative set is [0, t*]
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if gap(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn trapezoid<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, step: f64) -> f64 {
    let len = b - a;
    if len <= 0.0 {
        return 0.0;
    }
    let panels = (len / step).ceil().max(1.0) as usize;
    let h = len / panels as f64;
    let inner: f64 = (1..panels).map(|k| f(a + k as f64 * h)).sum();
    h * (0.5 * (f(a) + f(b)) + inner)
}

/// Trapezoidal area between arrivals and departures over `[0, clearance]`.
pub fn numeric_delay(q: &ApproachDemand, curve: &DepartureCurveSpec, step: f64) -> Result<IntegrationReport> {
    ensure(
        step > 0.0 && step.is_finite(),
        "step",
        step,
        "integration step must be positive",
    )?;
    let qr = q.arrival_rate;
    if curve.capacity.value <= qr {
        return Err(ModelError::OverCapacity {
            arrival: qr,
            capacity: curve.capacity.value,
        });
    }
    let t_end = if qr == 0.0 { 0.0 } else { crossing_time(qr, curve) };
    if let Some(green) = curve.green {
        // the crossing is bisected, so allow for its rounding at the boundary
        if t_end - curve.red > green * (1.0 + 1e-9) {
            return Err(ModelError::Saturated {
                required: t_end - curve.red,
                green,
            });
        }
    }

    let integrand = |t: f64| qr * t - curve.departures(t);
    let mut knots = vec![0.0];
    knots.extend(curve.breakpoints().into_iter().filter(|&b| b > 0.0 && b < t_end));
    knots.push(t_end);
    knots.dedup();
    let numeric: f64 = knots.windows(2).map(|w| trapezoid(&integrand, w[0], w[1], step)).sum();

    let closed = if qr == 0.0 {
        Some(0.0)
    } else {
        match curve.kind {
            CurveKind::CavLed => breakdown_cav(q, curve.red, &curve.capacity).ok(),
            CurveKind::HdvLed(s) => breakdown_hdv(q, curve.red, &s, &curve.capacity).ok(),
        }
        .map(|b| b.delay())
    };
    Ok(IntegrationReport {
        numeric_delay: numeric,
        step,
        clear_time: t_end,
        closed_form_delay: closed,
        relative_error: closed.map(|c| relative_error(numeric, c)),
    })
}

/// Capacity implied by the gaps of `count` sampled vehicles.
pub fn monte_carlo_capacity(spec: &MarkovSpec, params: &VehicleParams, count: usize, seed: u64) -> Result<f64> {
    params.validate()?;
    let seq = sample_sequence(spec, count, seed)?;
    let gaps: f64 = seq.states.iter().map(|&s| params.gap_for_state(s)).sum();
    let n = count as f64;
    Ok(n / (gaps + n * params.length_time()))
}

/// Central difference `(f(x+h) - f(x-h)) / 2h`.
pub fn finite_difference<F, E>(f: F, x: f64, h: f64) -> std::result::Result<f64, E>
where
    F: Fn(f64) -> std::result::Result<f64, E>,
{
    let hi = f(x + h)?;
    let lo = f(x - h)?;
    Ok((hi - lo) / (2.0 * h))
}

/// Least-squares line through `(xs, ys)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Standard error of the slope estimate.
    pub slope_std_err: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 3, "need at least three points");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let slope_std_err = (sse / (n - 2.0) / sxx).sqrt();
    LinearFit {
        slope,
        intercept,
        r_squared,
        slope_std_err,
    }
}

/// Exhaustive scan of `f` on `lo, lo+step, ..., hi`; points where `f` fails
/// are skipped. Returns `(argmin, min)`.
pub fn grid_argmin<F, E>(f: F, lo: f64, hi: f64, step: f64) -> Option<(f64, f64)>
where
    F: Fn(f64) -> std::result::Result<f64, E>,
{
    let count = ((hi - lo) / step).floor() as usize;
    (0..=count)
        .map(|k| (lo + k as f64 * step).min(hi))
        .filter_map(|x| f(x).ok().map(|y| (x, y)))
        .fold(None, |best, (x, y)| match best {
            Some((_, by)) if by <= y => best,
            _ => Some((x, y)),
        })
}
