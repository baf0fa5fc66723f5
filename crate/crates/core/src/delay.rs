//! Deterministic-queue delay for one approach and one cycle under constant
//! arrivals.
//!
//! Time runs from the start of effective red (`t = 0`). Arrivals accumulate as
//! `q t`. A CAV-led platoon discharges at capacity from `t = R`. An HDV-led
//! platoon waits out the reaction time, discharges along a parabola for the
//! acceleration time and then at capacity. Delay is the area between the two
//! cumulative curves up to the moment they meet.

use crate::capacity::Capacity;
use crate::error::{ensure, ModelError, Result};

/// Effective red/green split of one cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalTiming {
    pub cycle: f64,
    pub green: f64,
    pub red: f64,
}

impl SignalTiming {
    pub fn new(green: f64, red: f64) -> Result<Self> {
        ensure(
            green > 0.0 && green.is_finite(),
            "green",
            green,
            "effective green must be positive",
        )?;
        ensure(
            red >= 0.0 && red.is_finite(),
            "red",
            red,
            "effective red must be non-negative",
        )?;
        Ok(Self {
            cycle: green + red,
            green,
            red,
        })
    }

    /// Splits `cycle` with `green_ratio` of it effectively green.
    pub fn from_cycle(cycle: f64, green_ratio: f64) -> Result<Self> {
        ensure(
            cycle > 0.0 && cycle.is_finite(),
            "cycle",
            cycle,
            "cycle length must be positive",
        )?;
        ensure(
            green_ratio > 0.0 && green_ratio <= 1.0,
            "green_ratio",
            green_ratio,
            "green ratio must lie in (0, 1]",
        )?;
        let green = green_ratio * cycle;
        Ok(Self {
            cycle,
            green,
            red: cycle - green,
        })
    }

    pub fn green_ratio(&self) -> f64 {
        self.green / self.cycle
    }
}

/// Constant arrival rate on an approach (veh/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproachDemand {
    pub arrival_rate: f64,
}

impl ApproachDemand {
    pub fn new(arrival_rate: f64) -> Result<Self> {
        ensure(
            arrival_rate >= 0.0 && arrival_rate.is_finite(),
            "q",
            arrival_rate,
            "arrival rate must be non-negative",
        )?;
        Ok(Self { arrival_rate })
    }
}

/// Start-up behaviour of an HDV platoon leader.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HdvStartupParams {
    /// T_r (s)
    pub reaction_time: f64,
    /// T_a (s); zero is the instantaneous-acceleration limit
    pub accel_time: f64,
}

impl Default for HdvStartupParams {
    fn default() -> Self {
        Self {
            reaction_time: 2.0,
            accel_time: 3.0,
        }
    }
}

impl HdvStartupParams {
    pub fn new(reaction_time: f64, accel_time: f64) -> Result<Self> {
        ensure(
            reaction_time >= 0.0 && reaction_time.is_finite(),
            "t_r",
            reaction_time,
            "must be non-negative",
        )?;
        ensure(
            accel_time >= 0.0 && accel_time.is_finite(),
            "t_a",
            accel_time,
            "must be non-negative",
        )?;
        Ok(Self {
            reaction_time,
            accel_time,
        })
    }
}

/// Per-cycle delay of one platoon type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayResult {
    /// veh*s per cycle
    pub total_delay: f64,
    /// s/veh
    pub avg_delay: f64,
    /// t_d (CAV) or t_d' (HDV), measured from the start of capacity discharge
    pub queue_clear_time: f64,
    /// Vehicles arriving per cycle.
    pub n_total: f64,
    /// Vehicles discharged during acceleration (HDV only).
    pub n1: Option<f64>,
    /// Cumulative departures when the queue clears (HDV only).
    pub n2: Option<f64>,
}

/// Areas of the queuing diagram whose difference is the delay.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DelayBreakdown {
    /// Area under the arrival curve up to clearance.
    pub arrival_area: f64,
    /// Area under the acceleration parabola, `c T_a^2 / 6`.
    pub departure_area_accel: f64,
    /// Area under the capacity-rate segment of an HDV-led discharge.
    pub departure_area_free: f64,
    /// Area under the CAV-led discharge, `c t_d^2 / 2`.
    pub cav_departure_area: f64,
}

impl DelayBreakdown {
    pub fn delay(&self) -> f64 {
        self.arrival_area - self.departure_area_accel - self.departure_area_free - self.cav_departure_area
    }
}

/// Mixed delay by total probability over the platoon leader type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedDelay {
    pub total: f64,
    pub average: f64,
}

fn check_under_capacity(q: &ApproachDemand, c: &Capacity) -> Result<()> {
    if c.value > q.arrival_rate {
        Ok(())
    } else {
        Err(ModelError::OverCapacity {
            arrival: q.arrival_rate,
            capacity: c.value,
        })
    }
}

fn average(total: f64, n_total: f64) -> f64 {
    if n_total > 0.0 {
        total / n_total
    } else {
        0.0
    }
}

pub fn queue_clear_time_cav(q: &ApproachDemand, red: f64, c: &Capacity) -> Result<f64> {
    check_under_capacity(q, c)?;
    Ok(q.arrival_rate * red / (c.value - q.arrival_rate))
}

/// Time from the end of the acceleration phase until the HDV-led queue clears.
pub fn queue_clear_time_hdv(q: &ApproachDemand, red: f64, startup: &HdvStartupParams, c: &Capacity) -> Result<f64> {
    check_under_capacity(q, c)?;
    let qr = q.arrival_rate;
    let arrivals = qr * (red + startup.reaction_time + startup.accel_time);
    let discharged = c.value * startup.accel_time / 2.0;
    if arrivals < discharged {
        return Err(ModelError::EarlyClearance { arrivals, discharged });
    }
    Ok((arrivals - discharged) / (c.value - qr))
}

/// Cumulative HDV-led departures at time `t` (no queue-clearance cap).
pub fn cumulative_departures_hdv(t: f64, red: f64, startup: &HdvStartupParams, c: &Capacity) -> f64 {
    let s = t - red - startup.reaction_time;
    let ta = startup.accel_time;
    if s <= 0.0 {
        0.0
    } else if s <= ta {
        c.value / (2.0 * ta) * s * s
    } else {
        c.value * t - c.value * (ta / 2.0 + red + startup.reaction_time)
    }
}

pub fn breakdown_cav(q: &ApproachDemand, red: f64, c: &Capacity) -> Result<DelayBreakdown> {
    let td = queue_clear_time_cav(q, red, c)?;
    let t_end = red + td;
    Ok(DelayBreakdown {
        arrival_area: 0.5 * q.arrival_rate * t_end * t_end,
        cav_departure_area: 0.5 * c.value * td * td,
        ..DelayBreakdown::default()
    })
}

pub fn breakdown_hdv(q: &ApproachDemand, red: f64, startup: &HdvStartupParams, c: &Capacity) -> Result<DelayBreakdown> {
    let tdp = queue_clear_time_hdv(q, red, startup, c)?;
    let ta = startup.accel_time;
    let t_end = red + startup.reaction_time + ta + tdp;
    Ok(DelayBreakdown {
        arrival_area: 0.5 * q.arrival_rate * t_end * t_end,
        departure_area_accel: c.value * ta * ta / 6.0,
        departure_area_free: 0.5 * c.value * tdp * (ta + tdp),
        cav_departure_area: 0.0,
    })
}

pub fn delay_cav(q: &ApproachDemand, timing: &SignalTiming, c: &Capacity) -> Result<DelayResult> {
    let td = queue_clear_time_cav(q, timing.red, c)?;
    if td > timing.green {
        return Err(ModelError::Saturated {
            required: td,
            green: timing.green,
        });
    }
    let qr = q.arrival_rate;
    let cv = c.value;
    let total = cv * qr * timing.red * timing.red / (2.0 * (cv - qr));
    let n_total = qr * (timing.red + timing.green);
    Ok(DelayResult {
        total_delay: total,
        avg_delay: average(total, n_total),
        queue_clear_time: td,
        n_total,
        n1: None,
        n2: None,
    })
}

pub fn delay_hdv(
    q: &ApproachDemand,
    timing: &SignalTiming,
    startup: &HdvStartupParams,
    c: &Capacity,
) -> Result<DelayResult> {
    check_under_capacity(q, c)?;
    if q.arrival_rate == 0.0 {
        // nothing arrives, nothing waits
        return Ok(DelayResult {
            total_delay: 0.0,
            avg_delay: 0.0,
            queue_clear_time: 0.0,
            n_total: 0.0,
            n1: Some(0.0),
            n2: Some(0.0),
        });
    }
    let parts = breakdown_hdv(q, timing.red, startup, c)?;
    let tdp = queue_clear_time_hdv(q, timing.red, startup, c)?;
    let required = startup.reaction_time + startup.accel_time + tdp;
    if required > timing.green {
        return Err(ModelError::Saturated {
            required,
            green: timing.green,
        });
    }
    let qr = q.arrival_rate;
    let total = parts.delay();
    let n_total = qr * (timing.red + timing.green);
    Ok(DelayResult {
        total_delay: total,
        avg_delay: average(total, n_total),
        queue_clear_time: tdp,
        n_total,
        n1: Some(c.value * startup.accel_time / 2.0),
        n2: Some(qr * (timing.red + required)),
    })
}

pub fn expected_delay(p: f64, cav: &DelayResult, hdv: &DelayResult) -> ExpectedDelay {
    ExpectedDelay {
        total: (1.0 - p) * hdv.total_delay + p * cav.total_delay,
        average: (1.0 - p) * hdv.avg_delay + p * cav.avg_delay,
    }
}
