use thiserror::Error;

/// Failures raised by the analytical model.
///
/// Regime violations (over-capacity, saturation, early clearance) are kept
/// distinct from parameter errors so callers can flag a sweep cell instead of
/// aborting the whole run.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("arrival rate {arrival} veh/s is not below capacity {capacity} veh/s")]
    OverCapacity { arrival: f64, capacity: f64 },

    #[error("queue needs {required:.6} s of green but only {green:.6} s is available")]
    Saturated { required: f64, green: f64 },

    #[error(
        "queue clears during the HDV acceleration phase \
         (arrivals {arrivals:.6} veh < acceleration discharge {discharged:.6} veh); \
         closed form does not apply"
    )]
    EarlyClearance { arrivals: f64, discharged: f64 },

    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("degenerate denominator: {0}")]
    Degenerate(&'static str),

    #[error("approaches outside the under-saturated regime: {}", fmt_failures(.0))]
    Approaches(Vec<(usize, ModelError)>),
}

impl ModelError {
    /// True for errors that mean "this point is outside the closed-form regime"
    /// as opposed to malformed input.
    pub fn is_regime(&self) -> bool {
        match self {
            ModelError::OverCapacity { .. } | ModelError::Saturated { .. } | ModelError::EarlyClearance { .. } => true,
            ModelError::Approaches(list) => list.iter().all(|(_, e)| e.is_regime()),
            _ => false,
        }
    }
}

fn fmt_failures(list: &[(usize, ModelError)]) -> String {
    list.iter()
        .map(|(i, e)| format!("#{i}: {e}"))
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, ModelError>;

pub(crate) fn ensure(cond: bool, name: &'static str, value: f64, reason: &'static str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter { name, value, reason })
    }
}
