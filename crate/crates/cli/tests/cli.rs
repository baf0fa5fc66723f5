use std::path::Path;
use std::process::{Command, Output};

fn mixsig(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixsig")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn steady_state_requires_p() {
    let o = mixsig(&["steady-state"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing required parameter `p`"));
}

#[test]
fn steady_state_two_state_chain() {
    let o = mixsig(&["steady-state", "--set", "n=2", "--set", "p=0.5"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("# n = 2\n"));
    let rows = data_rows(&out);
    let closed: Vec<&str> = rows.iter().map(|r| r[1].as_str()).collect();
    assert_eq!(closed, ["0.5", "0.25", "0.25"]);
    assert!(out.contains("# max_abs_diff = "));
}

#[test]
fn capacity_at_zero_penetration() {
    let o = mixsig(&["capacity", "--set", "p=0"]);
    assert_eq!(o.status.code(), Some(0));
    let rows = data_rows(&stdout(&o));
    assert_eq!(rows[0][2], "0.545454545");
}

#[test]
fn zero_step_is_rejected() {
    let o = mixsig(&["capacity", "--sweep", "p=0:0.99:0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("step must be positive"));
}

#[test]
fn config_file_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "bad.cfg", "p = 0.5\n# comment\nspeed_limit = 20\n");
    let o = mixsig(&["capacity", "--config", &path]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains("line 3: unknown key `speed_limit`"),
        "{}",
        stderr(&o)
    );
    let path = write(dir.path(), "bad2.cfg", "p = half\n");
    let o = mixsig(&["capacity", "--config", &path]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 1: bad value for `p`"));
}

#[test]
fn config_file_and_overrides_merge() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "ok.cfg", "p = 0.2\nomega_v = 0.6\n");
    let o = mixsig(&["capacity", "--config", &path, "--set", "p=0.4", "--seed", "9"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("# p = 0.4\n") && out.contains("# omega_v = 0.6\n") && out.contains("# seed = 9\n"));
}

#[test]
fn range_warnings_do_not_fail() {
    let o = mixsig(&["capacity", "--set", "p=0.5", "--set", "c=200"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("warning: c = 200"));
}

#[test]
fn fully_saturated_sweep_exits_2() {
    let o = mixsig(&["sweep", "--set", "p=0", "--sweep", "q=0.6:0.8:0.1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no feasible cells"));
}

#[test]
fn sweep_flags_saturated_cells() {
    let o = mixsig(&["sweep", "--set", "p=0", "--sweep", "q=0.15:0.35:0.025"]);
    assert_eq!(o.status.code(), Some(0));
    let rows = data_rows(&stdout(&o));
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().any(|r| r[3] == "1" && r[1].is_empty()));
    assert!(rows.iter().any(|r| r[3] == "0"));
}

#[test]
fn sweep_writes_svg() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("grid.csv");
    let o = mixsig(&[
        "sweep",
        "--sweep",
        "p=0:1:0.25",
        "--sweep",
        "c=60:120:30",
        "--out",
        out.to_str().unwrap(),
        "--svg",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let svg = std::fs::read_to_string(dir.path().join("grid.svg")).unwrap();
    assert!(svg.contains("CAV penetration p") && svg.contains("cycle length C (s)"));
    assert!(std::fs::read_to_string(&out)
        .unwrap()
        .contains("p,c,E_D,E_Dbar,saturated,reason"));
    assert!(stdout(&o).contains("15 cells"));
}

#[test]
fn svg_without_out_is_config_error() {
    let o = mixsig(&["sweep", "--sweep", "q=0.15:0.35:0.05", "--set", "p=0.5", "--svg"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn optimize_pure_cav_minimum_cycle() {
    let o = mixsig(&[
        "optimize",
        "--set",
        "p=1",
        "--set",
        "critical_flow_ratios=0.7",
        "--set",
        "phases=1",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let err = stderr(&o);
    assert!(err.contains("C_min = 15.2 s"), "{err}");
    assert!(err.contains("numeric optimum C = 15.2"), "{err}");
}

#[test]
fn optimize_reports_degenerate_printed_optimum() {
    let o = mixsig(&[
        "optimize",
        "--set",
        "p=0.5",
        "--set",
        "q=0.3",
        "--set",
        "green_ratio=1",
        "--set",
        "critical_flow_ratios=0.35,0.35",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("printed C* undefined: degenerate denominator"));
    assert!(stderr(&o).contains("numeric optimum C = "));
}

#[test]
fn optimize_infeasible_exits_2() {
    let o = mixsig(&["optimize", "--set", "p=0.5", "--set", "critical_flow_ratios=0.5,0.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("infeasible"));
}

#[test]
fn optimize_warns_on_non_positive_printed_optimum() {
    let o = mixsig(&[
        "optimize",
        "--set",
        "p=0.5",
        "--objective",
        "average",
        "--ls-mode",
        "paper",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let err = stderr(&o);
    assert!(err.contains("objective: average"));
    assert!(err.contains("non-positive"));
    assert!(stdout(&o).contains("# ls_mode = paper\n"));
}

#[test]
fn delay_command_reports_each_leader() {
    let o = mixsig(&["delay", "--set", "p=0.5"]);
    assert_eq!(o.status.code(), Some(0));
    let rows = data_rows(&stdout(&o));
    let leaders: Vec<&str> = rows.iter().map(|r| r[1].as_str()).collect();
    assert_eq!(leaders, ["cav", "hdv", "expected"]);
    let o = mixsig(&["delay", "--set", "p=0", "--set", "q=0.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_defaults_pass() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v.csv");
    let o = mixsig(&["validate", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = stdout(&o);
    assert!(report.contains("derived 7 s, printed 13 s"));
    assert!(report.contains("the exact derivative varies with C while the printed value is constant"));
    assert!(report.contains("all oracle checks passed"));
}

#[test]
fn validate_flags_monte_carlo_shortfall() {
    // ten vehicles cannot estimate the capacity to half a percent
    let o = mixsig(&["validate", "--set", "mc_vehicles=10", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("oracle failure: capacity/monte_carlo"));
}
