use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hetnet_core::blocking::fair_pm_search;
use hetnet_core::report::{
    run_scenario, run_sweep, run_validation, write_sweep_csv, write_validation_csv, Metric,
    SweepSpec, SweepVariable,
};
use hetnet_core::{Error, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "hetnet",
    version,
    about = "Load-aware coverage, blocking and energy analysis of two-tier networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (JSON); defaults are used when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "mc-trials")]
    mc_trials: Option<usize>,
    /// Suppress the summary on stderr
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic report for one scenario, as JSON
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Append a Monte-Carlo comparison using --mc-trials trials
        #[arg(long)]
        validate: bool,
    },
    /// Sweep one parameter and write a CSV table
    Sweep {
        #[command(flatten)]
        common: Common,
        /// lambda_m, lambda_f, p_m or beta
        #[arg(long)]
        variable: String,
        /// Comma-separated values
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Comma-separated output columns; all when omitted
        #[arg(long, value_delimiter = ',')]
        outputs: Vec<String>,
    },
    /// Monte-Carlo against analytic values, as CSV
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Search the center share p_m that equalizes center and edge blocking
    FairPm {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[arg(long, default_value_t = 0.05)]
        lo: f64,
        #[arg(long, default_value_t = 0.95)]
        hi: f64,
    },
}

enum Failure {
    Core(Error),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn load_config(common: &Common) -> Result<ScenarioConfig, Failure> {
    let mut cfg = match &common.config {
        Some(p) => ScenarioConfig::from_path(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(n) = common.mc_trials {
        cfg.mc_trials = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json(path: Option<&Path>, value: &serde_json::Value) -> Result<(), Failure> {
    let mut out = open_out(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| Failure::Io(e.to_string()))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Analyze { common, validate } => {
            let cfg = load_config(&common)?;
            let report = run_scenario(&cfg)?;
            let mut value =
                serde_json::to_value(&report).map_err(|e| Failure::Io(e.to_string()))?;
            if validate {
                let rows = run_validation(&cfg, cfg.mc_trials, cfg.seed)?;
                value["validation"] =
                    serde_json::to_value(rows).map_err(|e| Failure::Io(e.to_string()))?;
            }
            write_json(common.out.as_deref(), &value)?;
            if !common.quiet {
                eprintln!(
                    "{}: zeta {:.4}/{:.4}, coverage {:.4}/{:.4}, blocking {:.3e}/{:.3e}",
                    cfg.policy.label(),
                    report.load.zeta_center,
                    report.load.zeta_edge,
                    report.coverage_ccu,
                    report.coverage_ceu,
                    report.blocking.b_ccu,
                    report.blocking.b_ceu
                );
            }
        }
        Command::Sweep {
            common,
            variable,
            values,
            outputs,
        } => {
            let cfg = load_config(&common)?;
            let mut spec = SweepSpec::new(SweepVariable::parse(&variable)?, values);
            for name in &outputs {
                let m = Metric::from_column(name)
                    .ok_or_else(|| Error::invalid("outputs", format!("unknown column `{name}`")))?;
                spec.outputs.push(m);
            }
            let table = run_sweep(&cfg, &spec)?;
            let mut out = open_out(common.out.as_deref())?;
            write_sweep_csv(&table, &mut out)?;
            out.flush()?;
            if !common.quiet {
                let failed = table.rows.iter().filter(|r| !r.is_ok()).count();
                eprintln!("{} points, {failed} failed", table.rows.len());
            }
        }
        Command::Validate { common } => {
            let cfg = load_config(&common)?;
            let rows = run_validation(&cfg, cfg.mc_trials, cfg.seed)?;
            let mut out = open_out(common.out.as_deref())?;
            write_validation_csv(&rows, &mut out)?;
            out.flush()?;
            if !common.quiet {
                let worst = rows
                    .iter()
                    .filter(|r| r.stderr > 0.0)
                    .map(|r| (r.analytic - r.simulated).abs() / r.stderr)
                    .fold(0.0, f64::max);
                eprintln!("{} rows, largest z-score {worst:.2}", rows.len());
            }
        }
        Command::FairPm {
            common,
            tol,
            lo,
            hi,
        } => {
            let cfg = load_config(&common)?;
            let fair = fair_pm_search(&cfg, tol, lo, hi)?;
            let value = serde_json::to_value(fair).map_err(|e| Failure::Io(e.to_string()))?;
            write_json(common.out.as_deref(), &value)?;
            if !common.quiet {
                eprintln!("p_m = {:.4} after {} iterations", fair.p_m, fair.iterations);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
