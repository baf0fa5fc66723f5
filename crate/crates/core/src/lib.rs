//! Analytical delay and cycle-length model for an isolated signalized
//! intersection serving a mix of connected automated vehicles (CAVs) and
//! human-driven vehicles (HDVs).
//!
//! The pipeline runs bottom-up:
//!
//! - [`markov`]: platoon-composition chain and its stationary distribution
//! - [`capacity`]: composition-weighted time gap and saturation flow
//! - [`delay`]: closed-form queuing delay for CAV-led and HDV-led discharge
//! - [`signal`]: intersection totals, lost time, minimum and optimal cycle
//! - [`oracle`]: brute-force checks of every closed form
//!
//! Rates are veh/s and times are seconds throughout.

pub mod capacity;
pub mod delay;
pub mod error;
pub mod markov;
pub mod oracle;
pub mod signal;

pub use capacity::{mixed_capacity, Capacity, VehicleParams};
pub use delay::{ApproachDemand, DelayResult, ExpectedDelay, HdvStartupParams, SignalTiming};
pub use error::{ModelError, Result};
pub use markov::{MarkovSpec, SteadyState, TransitionMatrix};
pub use signal::{Approach, CycleOptimum, IntersectionConfig, LostTimeMode, Objective};
