//! Subcommand bodies. Each returns an [`Output`]; writing and exit codes are
//! left to the caller.

use mixsig_core::delay::{delay_cav, delay_hdv, SignalTiming};
use mixsig_core::markov::{build_transition_matrix, steady_state_closed_form, steady_state_power_iteration};
use mixsig_core::oracle::{numeric_delay, CurveKind, DepartureCurveSpec};
use mixsig_core::signal::{approach_delay, average_delay, min_cycle_length, optimize_cycle, total_delay};
use mixsig_core::{mixed_capacity, ModelError};
use thiserror::Error;

use crate::config::{objective_name, ConfigError, RunConfig};
use crate::svg;
use crate::sweep::{SweepAxis, SweepSpec};
use crate::table::{fmt_num, Cell, Table};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Model(#[from] ModelError),

    #[error("no feasible cells: every grid point is outside the under-saturated regime")]
    NoFeasibleCells,

    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 1,
            CliError::NoFeasibleCells => 2,
            CliError::Model(e) if e.is_regime() => 2,
            CliError::Model(ModelError::Infeasible(_)) => 2,
            CliError::Model(_) => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Clone, Default)]
pub struct Output {
    pub table: Table,
    /// Human-readable summary lines.
    pub report: Vec<String>,
    pub svg: Option<String>,
    /// Some requested evaluation fell outside the under-saturated regime.
    pub saturated: bool,
    /// Oracle-equivalence checks that failed.
    pub oracle_failures: Vec<String>,
}

impl Output {
    fn new(table: Table) -> Self {
        Self {
            table,
            ..Self::default()
        }
    }

    pub fn csv(&self, config: &RunConfig) -> String {
        self.table.to_csv(&config.header())
    }

    pub fn exit_code(&self) -> i32 {
        if !self.oracle_failures.is_empty() {
            3
        } else if self.saturated {
            2
        } else {
            0
        }
    }
}

/// Short code for a regime failure, safe inside a CSV cell.
pub fn regime_code(e: &ModelError) -> &'static str {
    match e {
        ModelError::OverCapacity { .. } => "over_capacity",
        ModelError::Saturated { .. } => "saturated",
        ModelError::EarlyClearance { .. } => "early_clearance",
        ModelError::Approaches(list) => list.first().map_or("regime", |(_, e)| regime_code(e)),
        _ => "error",
    }
}

fn only_p_axis(axes: &[SweepAxis], command: &str) -> Result<Option<Vec<f64>>, ConfigError> {
    match axes {
        [] => Ok(None),
        [axis] if axis.name == "p" => {
            let values = axis.values();
            if values.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(ConfigError::Invalid("penetration sweep must stay within [0, 1]".into()));
            }
            Ok(Some(values))
        }
        _ => Err(ConfigError::Invalid(format!(
            "`{command}` accepts only a single `p` sweep"
        ))),
    }
}

fn with_p(config: &RunConfig, p: f64) -> RunConfig {
    RunConfig {
        p: Some(p),
        ..config.clone()
    }
}

pub fn steady_state(config: &RunConfig) -> CliResult<Output> {
    config.validate()?;
    let spec = config.markov()?;
    let closed = steady_state_closed_form(&spec);
    let power = steady_state_power_iteration(&build_transition_matrix(&spec), 1e-12, 1_000_000)?;
    let mut table = Table::new(&["state", "closed_form", "power_iteration", "abs_diff"]);
    let mut max_diff: f64 = 0.0;
    for (i, (a, b)) in closed.probabilities().iter().zip(power.probabilities()).enumerate() {
        let d = (a - b).abs();
        max_diff = max_diff.max(d);
        table.push(vec![Cell::Int(i as i64), (*a).into(), (*b).into(), d.into()]);
    }
    let sum: f64 = closed.probabilities().iter().sum();
    table.footer.push(format!("max_abs_diff = {}", fmt_num(max_diff)));
    table.footer.push(format!("closed_form_sum = {}", fmt_num(sum)));
    Ok(Output::new(table))
}

pub fn capacity(config: &RunConfig, axes: &[SweepAxis]) -> CliResult<Output> {
    config.validate()?;
    let ps = match only_p_axis(axes, "capacity")? {
        Some(ps) => ps,
        None => vec![config.require_p()?],
    };
    let mut table = Table::new(&["p", "expected_gap", "capacity", "capacity_veh_per_hour"]);
    let mut points = Vec::new();
    for p in ps {
        let c = mixed_capacity(&with_p(config, p).markov()?, &config.vehicle())?;
        table.push(vec![
            p.into(),
            c.expected_gap.into(),
            c.value.into(),
            (3600.0 * c.value).into(),
        ]);
        points.push((p, Some(c.value)));
    }
    let mut out = Output::new(table);
    if config.svg && points.len() > 1 {
        out.svg = Some(svg::line_chart(
            "Mixed-traffic capacity",
            "p",
            "capacity (veh/s)",
            &points,
        ));
    }
    Ok(out)
}

pub fn delay(config: &RunConfig) -> CliResult<Output> {
    let ix = config.intersection()?;
    let caps = ix.capacities()?;
    let cycle = config.c;
    let mut table = Table::new(&[
        "approach",
        "leader",
        "q",
        "green_ratio",
        "capacity",
        "red",
        "green",
        "clear_time",
        "total_delay",
        "avg_delay",
        "closed_form",
        "saturated",
        "note",
    ]);
    let mut out = Output::default();
    for (i, (a, cap)) in ix.approaches.iter().zip(&caps).enumerate() {
        let timing = SignalTiming::from_cycle(cycle, a.green_ratio)?;
        let vehicles = a.demand.arrival_rate * cycle;
        let per_vehicle = |total: f64| if vehicles > 0.0 { total / vehicles } else { 0.0 };
        let base = |leader: &str| -> Vec<Cell> {
            vec![
                Cell::Int(i as i64 + 1),
                leader.into(),
                a.demand.arrival_rate.into(),
                a.green_ratio.into(),
                cap.value.into(),
                timing.red.into(),
                timing.green.into(),
            ]
        };
        for (leader, kind) in [("cav", CurveKind::CavLed), ("hdv", CurveKind::HdvLed(a.startup))] {
            let closed = match kind {
                CurveKind::CavLed => delay_cav(&a.demand, &timing, cap),
                CurveKind::HdvLed(s) => delay_hdv(&a.demand, &timing, &s, cap),
            };
            let mut row = base(leader);
            match closed {
                Ok(r) => row.extend([
                    r.queue_clear_time.into(),
                    r.total_delay.into(),
                    r.avg_delay.into(),
                    true.into(),
                    false.into(),
                    Cell::Empty,
                ]),
                Err(e) if e.is_regime() => {
                    let curve = DepartureCurveSpec {
                        kind,
                        red: timing.red,
                        green: Some(timing.green),
                        capacity: *cap,
                    };
                    match numeric_delay(&a.demand, &curve, 1e-3) {
                        Ok(rep) => {
                            out.report.push(format!(
                                "approach {} {leader}: {}; numeric delay {} veh*s reported beyond closed-form regime",
                                i + 1,
                                e,
                                fmt_num(rep.numeric_delay)
                            ));
                            row.extend([
                                Cell::Empty,
                                rep.numeric_delay.into(),
                                per_vehicle(rep.numeric_delay).into(),
                                false.into(),
                                false.into(),
                                Cell::Text(format!("{}_numeric", regime_code(&e))),
                            ]);
                        }
                        Err(_) => {
                            out.report.push(format!("approach {} {leader}: {e}", i + 1));
                            row.extend([
                                Cell::Empty,
                                Cell::Empty,
                                Cell::Empty,
                                false.into(),
                                true.into(),
                                regime_code(&e).into(),
                            ]);
                        }
                    }
                }
                Err(e) => return Err(e.into()),
            }
            table.push(row);
        }
        let mut row = base("expected");
        match approach_delay(&ix, i, cycle) {
            Ok(d) => row.extend([
                Cell::Empty,
                d.total.into(),
                d.average.into(),
                true.into(),
                false.into(),
                Cell::Empty,
            ]),
            Err(e) if e.is_regime() => {
                out.saturated = true;
                row.extend([
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    false.into(),
                    true.into(),
                    regime_code(&e).into(),
                ]);
            }
            Err(e) => return Err(e.into()),
        }
        table.push(row);
    }
    out.table = table;
    Ok(out)
}

fn axis_label(name: &str) -> &str {
    match name {
        "q" => "q (veh/s)",
        "green_ratio" => "green ratio G/C",
        "p" => "CAV penetration p",
        "c" => "cycle length C (s)",
        other => other,
    }
}

pub fn sweep(config: &RunConfig, spec: &SweepSpec) -> CliResult<Output> {
    config.validate()?;
    let names: Vec<&str> = spec.axes.iter().map(|a| a.name.as_str()).collect();
    let mut columns = names.clone();
    columns.extend(["E_D", "E_Dbar", "saturated", "reason"]);
    let mut table = Table::new(&columns);
    let mut feasible = 0usize;
    for point in spec.points() {
        let mut cell_cfg = config.clone();
        for (name, &v) in names.iter().zip(&point) {
            cell_cfg.set_number(name, v)?;
        }
        let ix = cell_cfg.intersection()?;
        let mut row: Vec<Cell> = point.iter().map(|&v| v.into()).collect();
        match total_delay(&ix, cell_cfg.c).and_then(|t| Ok((t, average_delay(&ix, cell_cfg.c)?))) {
            Ok((total, avg)) => {
                feasible += 1;
                row.extend([total.into(), avg.into(), false.into(), Cell::Empty]);
            }
            Err(e) if e.is_regime() => {
                row.extend([Cell::Empty, Cell::Empty, true.into(), regime_code(&e).into()]);
            }
            Err(e) => return Err(e.into()),
        }
        table.push(row);
    }
    if feasible == 0 {
        return Err(CliError::NoFeasibleCells);
    }
    let saturated = table.rows.len() - feasible;
    let mut out = Output::new(table);
    out.report.push(format!(
        "{} cells, {feasible} feasible, {saturated} flagged",
        out.table.rows.len()
    ));
    if config.svg {
        out.svg = Some(sweep_svg(spec, &out.table));
    }
    Ok(out)
}

fn sweep_svg(spec: &SweepSpec, table: &Table) -> String {
    let avg = table.column("E_Dbar").expect("E_Dbar column");
    match &spec.axes[..] {
        [x] => {
            let xs = x.values();
            let pts: Vec<(f64, Option<f64>)> = xs.iter().zip(avg).map(|(&x, c)| (x, c.as_num())).collect();
            svg::line_chart("Expected average delay", axis_label(&x.name), "E[Dbar] (s/veh)", &pts)
        }
        [x, y] => {
            let xs = x.values();
            let ys = y.values();
            let grid: Vec<Vec<Option<f64>>> = avg
                .chunks(ys.len())
                .map(|col| col.iter().map(|c| c.as_num()).collect())
                .collect();
            svg::heatmap(
                "Expected average delay",
                axis_label(&x.name),
                axis_label(&y.name),
                &xs,
                &ys,
                &grid,
            )
        }
        _ => unreachable!("sweeps have one or two axes"),
    }
}

pub fn optimize(config: &RunConfig, axes: &[SweepAxis]) -> CliResult<Output> {
    config.validate()?;
    let sweep = only_p_axis(axes, "optimize")?;
    let ps = match &sweep {
        Some(ps) => ps.clone(),
        None => vec![config.require_p()?],
    };
    let mut table = Table::new(&[
        "p",
        "c_min",
        "c_star_paper",
        "c_star_non_physical",
        "c_opt_numeric",
        "objective_value",
        "avg_delay",
        "excluded_grid_points",
        "derivative_exact",
        "derivative_printed",
        "feasible",
    ]);
    let mut out = Output::default();
    let mut curve = Vec::new();
    for p in ps {
        let ix = with_p(config, p).intersection()?;
        let c_min = match min_cycle_length(&ix) {
            Ok(c) => c,
            Err(e) if sweep.is_none() => return Err(e.into()),
            Err(e) => {
                out.report.push(format!("p = {}: {e}", fmt_num(p)));
                let mut row = vec![Cell::Num(p)];
                row.extend(std::iter::repeat_n(Cell::Empty, 9));
                row.push(false.into());
                table.push(row);
                curve.push((p, None));
                continue;
            }
        };
        let hi = config.c_max.max(2.0 * c_min);
        let opt = optimize_cycle(&ix, c_min, hi, config.objective)?;
        let avg = average_delay(&ix, opt.c_opt_numeric)?;
        if sweep.is_none() {
            out.report.push(format!("objective: {}", objective_name(opt.objective)));
            out.report.push(format!("C_min = {} s", fmt_num(c_min)));
            match &opt.c_star_paper {
                Ok(c) if *c <= 0.0 => out.report.push(format!(
                    "printed C* = {} s (warning: non-positive, outside the physical region)",
                    fmt_num(*c)
                )),
                Ok(c) => out.report.push(format!("printed C* = {} s", fmt_num(*c))),
                Err(e) => out.report.push(format!("printed C* undefined: {e}")),
            }
            out.report.push(format!(
                "numeric optimum C = {} s on [{}, {}]",
                fmt_num(opt.c_opt_numeric),
                fmt_num(c_min),
                fmt_num(hi)
            ));
            out.report
                .push(format!("objective at optimum = {}", fmt_num(opt.delay_at_opt)));
            out.report
                .push(format!("average delay at optimum = {} s/veh", fmt_num(avg)));
        }
        table.push(vec![
            p.into(),
            c_min.into(),
            Cell::opt(opt.c_star_paper.as_ref().ok().copied()),
            opt.c_star_non_physical().into(),
            opt.c_opt_numeric.into(),
            opt.delay_at_opt.into(),
            avg.into(),
            Cell::Int(opt.excluded_grid_points as i64),
            opt.diagnostics.exact.into(),
            Cell::opt(opt.diagnostics.printed.as_ref().ok().copied()),
            true.into(),
        ]);
        curve.push((p, Some(opt.c_opt_numeric)));
    }
    if curve.iter().all(|c| c.1.is_none()) {
        return Err(CliError::NoFeasibleCells);
    }
    if config.svg && curve.len() > 1 {
        out.svg = Some(svg::line_chart(
            "Optimal cycle length",
            "CAV penetration p",
            "optimal cycle (s)",
            &curve,
        ));
    }
    out.table = table;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(p: f64) -> RunConfig {
        RunConfig {
            p: Some(p),
            ..RunConfig::default()
        }
    }

    #[test]
    fn steady_state_two_states() {
        let c = RunConfig { n: 2, ..cfg(0.5) };
        let out = steady_state(&c).unwrap();
        let closed: Vec<f64> = out
            .table
            .column("closed_form")
            .unwrap()
            .iter()
            .map(|c| c.as_num().unwrap())
            .collect();
        assert_eq!(closed, vec![0.5, 0.25, 0.25]);
        let out = steady_state(&cfg(0.0)).unwrap();
        let nonzero = out
            .table
            .column("closed_form")
            .unwrap()
            .iter()
            .filter(|c| c.as_num().unwrap() > 0.0)
            .count();
        assert_eq!(nonzero, 1);
        assert!(matches!(
            steady_state(&RunConfig::default()),
            Err(CliError::Config(ConfigError::Missing("p")))
        ));
    }

    #[test]
    fn capacity_rows() {
        let out = capacity(&cfg(0.0), &[]).unwrap();
        assert_eq!(
            out.table.rows[0][2],
            Cell::Num(mixsig_core::capacity::capacity_from_gap(1.5, &Default::default()).value)
        );
        let axis: SweepAxis = "p=0:0.99:0.01".parse().unwrap();
        let out = capacity(&RunConfig::default(), &[axis]).unwrap();
        let caps: Vec<f64> = out
            .table
            .column("capacity")
            .unwrap()
            .iter()
            .map(|c| c.as_num().unwrap())
            .collect();
        assert_eq!(caps.len(), 100);
        assert!(caps.windows(2).all(|w| w[1] >= w[0]));
        let wrong: SweepAxis = "q=0.1:0.2:0.05".parse().unwrap();
        assert!(capacity(&cfg(0.5), &[wrong]).is_err());
    }

    #[test]
    fn delay_flags_saturation() {
        let out = delay(&cfg(0.5)).unwrap();
        assert_eq!(out.table.rows.len(), 3);
        assert!(!out.saturated);
        let heavy = RunConfig {
            q: vec![0.5],
            ..cfg(0.0)
        };
        let out = delay(&heavy).unwrap();
        assert!(out.saturated);
        assert_eq!(out.exit_code(), 2);
    }

    #[test]
    fn delay_reports_numeric_beyond_regime() {
        let light = RunConfig {
            q: vec![0.01],
            c: 11.0,
            green_ratio: vec![0.5],
            ..cfg(0.0)
        };
        let out = delay(&light).unwrap();
        let note = &out.table.rows[1][12];
        assert_eq!(note, &Cell::Text("early_clearance_numeric".into()));
        assert!(out.table.rows[1][8].as_num().unwrap() > 0.0);
    }

    #[test]
    fn sweep_all_saturated_is_error() {
        let spec = SweepSpec::new(vec!["q=0.6:0.7:0.05".parse().unwrap()]).unwrap();
        let err = sweep(&cfg(0.0), &spec).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("no feasible cells"));
    }

    #[test]
    fn sweep_flags_not_drops() {
        let spec = SweepSpec::new(vec!["q=0.15:0.5:0.05".parse().unwrap()]).unwrap();
        let out = sweep(&cfg(0.0), &spec).unwrap();
        assert_eq!(out.table.rows.len(), 8);
        let flags = out.table.column("saturated").unwrap();
        assert!(flags.iter().any(|f| **f == Cell::Flag(true)));
        assert!(flags.iter().any(|f| **f == Cell::Flag(false)));
    }

    #[test]
    fn optimize_pure_cav() {
        let c = RunConfig {
            critical_flow_ratios: Some(vec![0.7]),
            ..cfg(1.0)
        };
        let out = optimize(&c, &[]).unwrap();
        let row = &out.table.rows[0];
        assert!((row[1].as_num().unwrap() - 15.2).abs() < 1e-9);
        assert!((row[4].as_num().unwrap() - 15.2).abs() < 1e-6);
    }

    #[test]
    fn optimize_unit_green_ratio_keeps_numeric() {
        let c = RunConfig {
            q: vec![0.3],
            green_ratio: vec![1.0],
            critical_flow_ratios: Some(vec![0.35, 0.35]),
            ..cfg(0.5)
        };
        let out = optimize(&c, &[]).unwrap();
        assert!(out
            .report
            .iter()
            .any(|l| l.contains("printed C* undefined: degenerate")));
        assert_eq!(out.table.rows[0][2], Cell::Empty);
        assert!(out.table.rows[0][4].as_num().is_some());
    }

    #[test]
    fn optimize_infeasible() {
        let c = RunConfig {
            critical_flow_ratios: Some(vec![0.5, 0.5]),
            ..cfg(0.5)
        };
        assert_eq!(optimize(&c, &[]).unwrap_err().exit_code(), 2);
    }
}
