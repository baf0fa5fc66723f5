//! Composition-dependent time gaps and the resulting mixed-traffic capacity.
//!
//! All rates are veh/s.

use crate::error::{ensure, ModelError, Result};
use crate::markov::{steady_state_closed_form, MarkovSpec, SteadyState};

/// Car-following and geometry constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleParams {
    /// Equilibrium-spacing feedback gain (1/s^2).
    pub omega_e: f64,
    /// Speed-difference feedback gain (1/s).
    pub omega_v: f64,
    /// Minimum safe time gap (s).
    pub tau_safe: f64,
    /// Desired HDV time gap (s).
    pub tau_hdv: f64,
    /// Average vehicle length (m).
    pub vehicle_length: f64,
    /// Free-flow speed (m/s).
    pub v_free: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            omega_e: 1.2,
            omega_v: 0.5,
            tau_safe: 0.3,
            tau_hdv: 1.5,
            vehicle_length: 5.0,
            v_free: 15.0,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        ensure(self.omega_e > 0.0, "omega_e", self.omega_e, "must be positive")?;
        // zero speed-difference gain is allowed: the CAV gap collapses to tau_safe
        ensure(self.omega_v >= 0.0, "omega_v", self.omega_v, "must be non-negative")?;
        ensure(self.tau_safe > 0.0, "tau_safe", self.tau_safe, "must be positive")?;
        ensure(self.tau_hdv > 0.0, "tau_hdv", self.tau_hdv, "must be positive")?;
        ensure(
            self.vehicle_length > 0.0,
            "vehicle_length",
            self.vehicle_length,
            "must be positive",
        )?;
        ensure(self.v_free > 0.0, "v_free", self.v_free, "must be positive")?;
        Ok(())
    }

    /// Time needed for one vehicle length to pass at free-flow speed.
    pub fn length_time(&self) -> f64 {
        self.vehicle_length / self.v_free
    }

    /// Gap used by a vehicle in chain state `state` (state 0 is an HDV).
    pub fn gap_for_state(&self, state: usize) -> f64 {
        if state == 0 {
            self.tau_hdv
        } else {
            cav_gap_unchecked(state, self)
        }
    }

    /// True when no CAV gap in states `1..=n` exceeds the HDV gap, the
    /// condition under which capacity cannot fall as penetration rises.
    pub fn cav_gaps_dominate(&self, n: usize) -> bool {
        (1..=n).all(|i| cav_gap_unchecked(i, self) <= self.tau_hdv)
    }
}

/// Saturation flow together with the expected gap it was derived from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Capacity {
    /// veh/s
    pub value: f64,
    /// s
    pub expected_gap: f64,
}

impl Capacity {
    /// A capacity given directly (per-approach override).
    pub fn from_rate(value: f64) -> Result<Self> {
        ensure(
            value > 0.0 && value.is_finite(),
            "capacity",
            value,
            "must be positive and finite",
        )?;
        Ok(Self {
            value,
            expected_gap: f64::NAN,
        })
    }
}

fn cav_gap_unchecked(i: usize, params: &VehicleParams) -> f64 {
    let stable = 4.0 * params.omega_v / (params.omega_e * (1.0 + i as f64));
    params.tau_safe.max(stable)
}

/// String-stable CAV time gap behind `i` consecutive CAVs.
pub fn cav_time_gap(i: usize, params: &VehicleParams) -> Result<f64> {
    if i == 0 {
        return Err(ModelError::InvalidParameter {
            name: "i",
            value: 0.0,
            reason: "state 0 is an HDV; use tau_hdv",
        });
    }
    Ok(cav_gap_unchecked(i, params))
}

/// Stationary-weighted gap across platoon-composition states.
pub fn expected_time_gap(pi: &SteadyState, params: &VehicleParams) -> f64 {
    pi.probabilities()
        .iter()
        .enumerate()
        .map(|(i, &w)| w * params.gap_for_state(i))
        .sum()
}

pub fn capacity_from_gap(expected_gap: f64, params: &VehicleParams) -> Capacity {
    Capacity {
        value: 1.0 / (expected_gap + params.length_time()),
        expected_gap,
    }
}

/// Long-run expected capacity of a mixed stream.
pub fn mixed_capacity(spec: &MarkovSpec, params: &VehicleParams) -> Result<Capacity> {
    params.validate()?;
    let pi = steady_state_closed_form(spec);
    Ok(capacity_from_gap(expected_time_gap(&pi, params), params))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-12;

    fn table() -> VehicleParams {
        VehicleParams::default()
    }

    #[test]
    fn cav_gap_examples() {
        let p = table();
        assert!((cav_time_gap(1, &p).unwrap() - 2.0 / 2.4).abs() < TOL);
        assert_eq!(cav_time_gap(5, &p).unwrap(), 0.3);
        let flat = VehicleParams { omega_v: 0.0, ..p };
        for i in 1..8 {
            assert_eq!(cav_time_gap(i, &flat).unwrap(), flat.tau_safe);
        }
        assert!(cav_time_gap(0, &p).is_err());
    }

    #[test]
    fn cav_gap_non_increasing() {
        let p = table();
        for i in 1..30 {
            assert!(cav_time_gap(i + 1, &p).unwrap() <= cav_time_gap(i, &p).unwrap());
        }
    }

    #[test]
    fn expected_gap_examples() {
        let p = table();
        let pure_hdv = steady_state_closed_form(&MarkovSpec::new(5, 0.0).unwrap());
        assert!((expected_time_gap(&pure_hdv, &p) - 1.5).abs() < TOL);
        let half = steady_state_closed_form(&MarkovSpec::new(1, 0.5).unwrap());
        assert!((expected_time_gap(&half, &p) - (0.75 + 0.5 * 2.0 / 2.4)).abs() < TOL);
        let full = steady_state_closed_form(&MarkovSpec::new(5, 1.0).unwrap());
        assert!((expected_time_gap(&full, &p) - 0.3).abs() < TOL);
    }

    #[test]
    fn capacity_examples() {
        let p = table();
        let c0 = mixed_capacity(&MarkovSpec::new(5, 0.0).unwrap(), &p).unwrap();
        assert!((c0.value - 1.0 / (1.5 + 5.0 / 15.0)).abs() < TOL);
        let c1 = mixed_capacity(&MarkovSpec::new(5, 1.0).unwrap(), &p).unwrap();
        assert!((c1.value - 1.0 / (0.3 + 1.0 / 3.0)).abs() < TOL);
        let ch = mixed_capacity(&MarkovSpec::new(1, 0.5).unwrap(), &p).unwrap();
        assert!((ch.value - 1.0 / (0.75 + 0.5 * 2.0 / 2.4 + 1.0 / 3.0)).abs() < TOL);
        assert!((ch.value - 2.0 / 3.0).abs() < TOL);
    }

    #[test]
    fn invalid_params_rejected() {
        let bad = VehicleParams { v_free: 0.0, ..table() };
        assert!(mixed_capacity(&MarkovSpec::new(5, 0.2).unwrap(), &bad).is_err());
        assert!(Capacity::from_rate(0.0).is_err());
    }

    #[test]
    fn dominance_check() {
        assert!(table().cav_gaps_dominate(5));
        let exotic = VehicleParams {
            omega_v: 3.0,
            ..table()
        };
        assert!(!exotic.cav_gaps_dominate(5));
    }
}
