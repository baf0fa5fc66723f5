//! Argument handling and output routing.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use mixsig_core::signal::{LostTimeMode, Objective};

use crate::commands::{self, CliError, CliResult, Output};
use crate::config::{ConfigError, RunConfig};
use crate::sweep::{SweepAxis, SweepSpec};
use crate::validate;

#[derive(Debug, Parser)]
#[command(name = "mixsig", version, about = "Signal timing analysis for mixed CAV/HDV traffic")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub global: GlobalArgs,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Write CSV here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Also write an SVG chart next to the CSV (requires --out).
    #[arg(long, global = true)]
    pub svg: bool,

    #[arg(long, global = true, value_name = "INT")]
    pub seed: Option<u64>,

    #[arg(long, global = true, value_enum)]
    pub objective: Option<ObjectiveArg>,

    #[arg(long = "ls-mode", global = true, value_enum)]
    pub ls_mode: Option<LsModeArg>,

    /// Override one configuration key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ObjectiveArg {
    Total,
    Average,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LsModeArg {
    Derived,
    Paper,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stationary distribution of the platoon-length chain.
    SteadyState,
    /// Expected capacity, optionally over a `p` sweep.
    Capacity {
        #[arg(long, value_name = "p=LO:HI:STEP")]
        sweep: Vec<String>,
    },
    /// Delay of every approach at the configured cycle length.
    Delay,
    /// Expected delay over one or two swept parameters.
    Sweep {
        #[arg(long, value_name = "NAME=LO:HI:STEP", required = true)]
        sweep: Vec<String>,
    },
    /// Minimum and delay-optimal cycle length, optionally over a `p` sweep.
    Optimize {
        #[arg(long, value_name = "p=LO:HI:STEP")]
        sweep: Vec<String>,
    },
    /// Oracle checks and printed-formula findings.
    Validate,
}

/// Resolves the configuration: file, then `--set`, then dedicated flags.
pub fn resolve_config(global: &GlobalArgs) -> Result<RunConfig, ConfigError> {
    let mut cfg = match &global.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    for assignment in &global.set {
        cfg.apply_override(assignment)?;
    }
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    if let Some(o) = global.objective {
        cfg.objective = match o {
            ObjectiveArg::Total => Objective::TotalPerCycle,
            ObjectiveArg::Average => Objective::AveragePerVehicle,
        };
    }
    if let Some(m) = global.ls_mode {
        cfg.ls_mode = match m {
            LsModeArg::Derived => LostTimeMode::Derived,
            LsModeArg::Paper => LostTimeMode::Printed,
        };
    }
    if let Some(out) = &global.out {
        cfg.out = Some(out.display().to_string());
    }
    cfg.svg |= global.svg;
    if cfg.svg && cfg.out.is_none() {
        return Err(ConfigError::Invalid(
            "--svg needs --out to know where to write the chart".into(),
        ));
    }
    Ok(cfg)
}

fn axes(raw: &[String]) -> Result<Vec<SweepAxis>, ConfigError> {
    raw.iter().map(|s| s.parse()).collect()
}

pub fn run(command: &Command, cfg: &RunConfig) -> CliResult<Output> {
    match command {
        Command::SteadyState => commands::steady_state(cfg),
        Command::Capacity { sweep } => commands::capacity(cfg, &axes(sweep)?),
        Command::Delay => commands::delay(cfg),
        Command::Sweep { sweep } => commands::sweep(cfg, &SweepSpec::new(axes(sweep)?)?),
        Command::Optimize { sweep } => commands::optimize(cfg, &axes(sweep)?),
        Command::Validate => validate::validate(cfg),
    }
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn emit(cfg: &RunConfig, out: &Output, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    let csv = out.csv(cfg);
    // the report goes to stderr when stdout carries the CSV
    let report_sink: &mut dyn Write = if cfg.out.is_some() { stdout } else { stderr };
    for line in &out.report {
        let _ = writeln!(report_sink, "{line}");
    }
    match &cfg.out {
        Some(path) => {
            let path = PathBuf::from(path);
            write_file(&path, &csv)?;
            if let Some(svg) = &out.svg {
                write_file(&path.with_extension("svg"), svg)?;
            }
        }
        None => {
            let _ = stdout.write_all(csv.as_bytes());
        }
    }
    Ok(())
}

/// Runs one invocation and returns its exit code.
pub fn execute(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let cfg = match resolve_config(&cli.global) {
        Ok(cfg) => cfg,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return 1;
        }
    };
    for w in cfg.warnings() {
        let _ = writeln!(stderr, "warning: {w}");
    }
    let result = run(&cli.command, &cfg).and_then(|out| emit(&cfg, &out, stdout, stderr).map(|_| out));
    match result {
        Ok(out) => {
            for f in &out.oracle_failures {
                let _ = writeln!(stderr, "oracle failure: {f}");
            }
            out.exit_code()
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
