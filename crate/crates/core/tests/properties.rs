use mixsig_core::capacity::{capacity_from_gap, cav_time_gap, expected_time_gap, mixed_capacity, VehicleParams};
use mixsig_core::delay::{
    cumulative_departures_hdv, delay_cav, delay_hdv, queue_clear_time_hdv, ApproachDemand, HdvStartupParams,
    SignalTiming,
};
use mixsig_core::markov::{build_transition_matrix, steady_state_closed_form, MarkovSpec};
use mixsig_core::signal::{
    min_cycle_length, optimize_cycle, total_delay, total_delay_derivative_exact, Approach, IntersectionConfig,
    Objective,
};
use mixsig_core::Capacity;
use proptest::prelude::*;

proptest! {
    #[test]
    fn transition_rows_are_stochastic(n in 1usize..20, p in 0.0f64..=1.0) {
        let m = build_transition_matrix(&MarkovSpec::new(n, p).unwrap());
        for row in m.rows() {
            let sum: f64 = row.iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
            prop_assert!(row.iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }

    #[test]
    fn closed_form_is_a_fixed_point(n in 1usize..15, p in 0.0f64..0.999) {
        let spec = MarkovSpec::new(n, p).unwrap();
        let pi = steady_state_closed_form(&spec);
        let sum: f64 = pi.probabilities().iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-12);
        prop_assert!(pi.residual(&build_transition_matrix(&spec)) <= 1e-10);
    }

    #[test]
    fn stationary_probabilities_decrease_below_half(n in 2usize..12, p in 0.01f64..0.49) {
        let pi = steady_state_closed_form(&MarkovSpec::new(n, p).unwrap());
        for w in pi.probabilities().windows(2) {
            prop_assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn capacity_bounded_by_extreme_gaps(n in 1usize..10, p in 0.0f64..=1.0, omega_v in 0.0f64..3.0) {
        let params = VehicleParams { omega_v, ..VehicleParams::default() };
        let c = mixed_capacity(&MarkovSpec::new(n, p).unwrap(), &params).unwrap();
        let gaps: Vec<f64> = (0..=n).map(|i| params.gap_for_state(i)).collect();
        let lo = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = gaps.iter().cloned().fold(0.0, f64::max);
        let lt = params.length_time();
        prop_assert!(c.value >= 1.0 / (hi + lt) - 1e-12);
        prop_assert!(c.value <= 1.0 / (lo + lt) + 1e-12);
        prop_assert!((c.value - 1.0 / (c.expected_gap + lt)).abs() <= 1e-12);
    }

    #[test]
    fn departure_curve_non_decreasing(
        red in 0.0f64..80.0, tr in 0.0f64..4.0, ta in 0.0f64..6.0, t in 0.0f64..200.0, dt in 0.0f64..5.0,
    ) {
        let s = HdvStartupParams::new(tr, ta).unwrap();
        let c = Capacity::from_rate(0.6).unwrap();
        prop_assert!(cumulative_departures_hdv(t + dt, red, &s, &c) >= cumulative_departures_hdv(t, red, &s, &c) - 1e-12);
    }

    #[test]
    fn hdv_delay_dominates_cav(
        q in 0.05f64..0.35, red in 10.0f64..70.0, tr in 0.0f64..4.0, ta in 0.0f64..6.0, p in 0.0f64..0.95,
    ) {
        let c = mixed_capacity(&MarkovSpec::new(5, p).unwrap(), &VehicleParams::default()).unwrap();
        let timing = SignalTiming::new(400.0, red).unwrap();
        let demand = ApproachDemand::new(q).unwrap();
        let startup = HdvStartupParams::new(tr, ta).unwrap();
        if let (Ok(cav), Ok(hdv)) = (delay_cav(&demand, &timing, &c), delay_hdv(&demand, &timing, &startup, &c)) {
            prop_assert!(hdv.total_delay >= cav.total_delay - 1e-9 * cav.total_delay.max(1.0));
            let n1 = hdv.n1.unwrap();
            prop_assert!((n1 + c.value * hdv.queue_clear_time - hdv.n2.unwrap()).abs() <= 1e-9 * hdv.n2.unwrap().max(1.0));
        }
    }

    #[test]
    fn exact_derivative_non_negative(
        q in 0.05f64..0.35, lam in 0.25f64..0.95, p in 0.0f64..=1.0, cycle in 10.0f64..300.0,
    ) {
        let a = Approach::new(q, lam, HdvStartupParams::default()).unwrap();
        let cfg = IntersectionConfig::new(vec![a], MarkovSpec::new(5, p).unwrap());
        if let Ok(d) = total_delay_derivative_exact(&cfg, cycle) {
            prop_assert!(d >= 0.0);
        }
    }
}

#[test]
fn cav_gap_index_uses_chain_state() {
    let params = VehicleParams::default();
    let pi = steady_state_closed_form(&MarkovSpec::new(3, 0.4).unwrap());
    let manual = pi.get(0) * params.tau_hdv
        + (1..=3)
            .map(|i| pi.get(i) * cav_time_gap(i, &params).unwrap())
            .sum::<f64>();
    assert!((expected_time_gap(&pi, &params) - manual).abs() < 1e-15);
}

#[test]
fn capacity_composes_over_grid() {
    let params = VehicleParams::default();
    for n in 1..=10 {
        for k in 0..=19 {
            let spec = MarkovSpec::new(n, k as f64 * 0.05).unwrap();
            let direct = mixed_capacity(&spec, &params).unwrap();
            let composed = capacity_from_gap(expected_time_gap(&steady_state_closed_form(&spec), &params), &params);
            assert_eq!(direct.value, composed.value);
        }
    }
}

#[test]
fn capacity_non_decreasing_in_penetration() {
    let params = VehicleParams::default();
    assert!(params.cav_gaps_dominate(5));
    let caps: Vec<f64> = (0..=99)
        .map(|k| {
            mixed_capacity(&MarkovSpec::new(5, k as f64 / 100.0).unwrap(), &params)
                .unwrap()
                .value
        })
        .collect();
    for w in caps.windows(2) {
        assert!(w[1] >= w[0]);
    }
}

#[test]
fn hdv_clear_time_sign_matches_regime() {
    let c = Capacity::from_rate(6.0 / 11.0).unwrap();
    let s = HdvStartupParams::default();
    // boundary q(R+T_r+T_a) = c T_a / 2 exactly
    let red = c.value * 1.5 / 0.1 - 5.0;
    let q = ApproachDemand::new(0.1).unwrap();
    let t = queue_clear_time_hdv(&q, red + 1e-6, &s, &c).unwrap();
    assert!((0.0..1e-6).contains(&t));
    assert!(queue_clear_time_hdv(&q, red - 1e-6, &s, &c).is_err());
}

fn table_like(q: f64, lam: f64, p: f64, startup: HdvStartupParams) -> IntersectionConfig {
    let a = Approach::new(q, lam, startup).unwrap();
    IntersectionConfig::new(vec![a], MarkovSpec::new(5, p).unwrap())
}

#[test]
fn average_objective_matches_exhaustive_scan() {
    // HDV-heavy, light demand, long start-up: the per-vehicle average has an
    // interior minimum above the saturation edge
    let cfg = table_like(0.1, 0.7, 0.1, HdvStartupParams::new(6.0, 3.0).unwrap());
    let c_min = min_cycle_length(&cfg).unwrap();
    let opt = optimize_cycle(&cfg, c_min, 300.0, Objective::AveragePerVehicle).unwrap();
    let f = |c: f64| mixsig_core::signal::average_delay(&cfg, c);
    let (grid_x, grid_y) = mixsig_core::oracle::grid_argmin(f, c_min, 300.0, 0.01).unwrap();
    assert!(
        (opt.c_opt_numeric - grid_x).abs() <= 0.05,
        "{} vs {}",
        opt.c_opt_numeric,
        grid_x
    );
    assert!(opt.delay_at_opt <= grid_y + 1e-9);
    assert!(opt.c_opt_numeric > c_min + 1.0);
}

#[test]
fn average_objective_pure_cav_without_startup_hits_floor() {
    let mut cfg = table_like(0.2, 0.55, 1.0, HdvStartupParams::new(0.0, 0.0).unwrap());
    cfg.critical_flow_ratios = Some(vec![0.7]);
    let c_min = min_cycle_length(&cfg).unwrap();
    let opt = optimize_cycle(&cfg, c_min, 300.0, Objective::AveragePerVehicle).unwrap();
    assert!((opt.c_opt_numeric - c_min).abs() < 1e-6);
}

#[test]
fn optimizer_never_loses_to_grid() {
    for (q, lam, p) in [(0.15, 0.55, 0.2), (0.25, 0.6, 0.5), (0.3, 0.75, 0.8), (0.2, 0.45, 0.05)] {
        let cfg = table_like(q, lam, p, HdvStartupParams::default());
        let c_min = min_cycle_length(&cfg).unwrap();
        for objective in [Objective::TotalPerCycle, Objective::AveragePerVehicle] {
            let opt = optimize_cycle(&cfg, c_min, 300.0, objective).unwrap();
            let f = |c: f64| mixsig_core::signal::objective_value(&cfg, c, objective);
            let (gx, gy) = mixsig_core::oracle::grid_argmin(f, c_min, 300.0, 0.01).unwrap();
            assert!(opt.delay_at_opt <= gy + 1e-9, "{q} {lam} {p} {objective:?}");
            assert!(
                (opt.c_opt_numeric - gx).abs() <= 0.05,
                "{q} {lam} {p} {objective:?}: {} vs {gx}",
                opt.c_opt_numeric
            );
        }
    }
}

#[test]
fn min_cycle_decreases_with_penetration() {
    let base = table_like(0.2, 0.55, 0.0, HdvStartupParams::default());
    let mins: Vec<f64> = (0..=20)
        .map(|k| min_cycle_length(&base.with_penetration(k as f64 * 0.05).unwrap()).unwrap())
        .collect();
    for w in mins.windows(2) {
        assert!(w[1] < w[0]);
    }
}

#[test]
fn total_delay_additive_across_approaches() {
    let a = Approach::new(0.2, 0.55, HdvStartupParams::default()).unwrap();
    let b = Approach::new(0.15, 0.4, HdvStartupParams::new(1.0, 2.0).unwrap()).unwrap();
    let spec = MarkovSpec::new(5, 0.4).unwrap();
    let both = IntersectionConfig::new(vec![a, b], spec);
    let only_a = IntersectionConfig::new(vec![a], spec);
    let only_b = IntersectionConfig::new(vec![b], spec);
    let sum = total_delay(&only_a, 110.0).unwrap() + total_delay(&only_b, 110.0).unwrap();
    assert!((total_delay(&both, 110.0).unwrap() - sum).abs() < 1e-12 * sum);
}
