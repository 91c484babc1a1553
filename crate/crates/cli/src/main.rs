use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use forwarder_aoi::sweep::{
    figure_data, rows_to_csv, run_sweep, verify_with, Figure, Grid, Mode, SimSettings, SweepSpec,
    SweepVar, VerifyOptions,
};
use forwarder_aoi::{analyze, Primitive, PrimitiveKind, RateParams};
use serde_json::json;

const EXIT_VERIFY_FAILED: u8 = 1;
const EXIT_INVALID: u8 = 2;

/// Age of information of location and app updates in a shared-memory
/// forwarder synchronized by RCU or a readers-writer lock.
#[derive(Parser)]
#[command(name = "forwarder-aoi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one parameter point and print the result as JSON.
    Analyze(AnalyzeArgs),
    /// Sweep one rate over a grid and write CSV.
    Sweep(SweepArgs),
    /// Write the preset data behind one figure as CSV.
    Figure {
        /// 3a, 3b, 4a, 4b, 5a, 5b or 6
        figure: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the self-check suite and print a JSON report.
    Verify {
        /// Number of random parameter tuples for the analytic checks.
        #[arg(long, default_value_t = 100)]
        grid: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Simulated time per kind.
        #[arg(long, default_value_t = 1e6)]
        horizon: f64,
    },
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    model: Primitive,
    #[arg(long)]
    no_preempt: bool,
    #[arg(long)]
    rho_hat: f64,
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    sigma: f64,
}

#[derive(Args)]
struct SweepArgs {
    /// Comma-separated kinds: rcu, rwl, rcu-np, rwl-np.
    #[arg(long, value_delimiter = ',', default_value = "rcu,rwl")]
    models: Vec<PrimitiveKind>,
    #[arg(long, default_value = "rho_hat")]
    var: SweepVar,
    /// start:stop:points, optionally with a trailing :log
    #[arg(long, default_value = "0.005:0.1:20")]
    range: Grid,
    /// Fixed ρ̂ when sweeping another variable.
    #[arg(long, default_value_t = 0.05)]
    rho_hat: f64,
    #[arg(long, default_value_t = 10.0)]
    beta: f64,
    #[arg(long, default_value_t = 10.0)]
    sigma_rcu: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma_rwl: f64,
    /// Add simulation columns next to the analytic ones.
    #[arg(long)]
    simulate: bool,
    #[arg(long, default_value_t = 1e6)]
    horizon: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    batches: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Invalid(String),
    Io(String),
    Verify,
}

impl From<forwarder_aoi::Error> for Failure {
    fn from(e: forwarder_aoi::Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::Io(format!("writing {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Analyze(a) => {
            let kind = PrimitiveKind::new(a.model, !a.no_preempt);
            let params = RateParams::normalized(a.rho_hat, a.beta, a.sigma)?;
            let r = analyze(kind, &params)?;
            let report = json!({
                "model": kind.primitive,
                "preemptive": kind.preemptive,
                "rho_hat": a.rho_hat,
                "beta": a.beta,
                "sigma": a.sigma,
                "age_app": r.age_app(),
                "age_location": r.age_location(),
                "delivery": r.delivery,
                "pi": r.stationary.pi,
                "v_bar_app": r.app.v_bar,
                "v_bar_location": r.location.v_bar,
            });
            println!("{}", serde_json::to_string_pretty(&report).expect("json"));
        }
        Command::Sweep(s) => {
            let spec = SweepSpec {
                kinds: s.models,
                variable: s.var,
                grid: s.range,
                rho_hat: s.rho_hat,
                beta: s.beta,
                sigma_rcu: s.sigma_rcu,
                sigma_rwl: s.sigma_rwl,
                mode: if s.simulate { Mode::Both } else { Mode::Analytic },
                sim: SimSettings {
                    horizon: s.horizon,
                    seed: s.seed,
                    batches: s.batches,
                    ..SimSettings::default()
                },
            };
            let rows = run_sweep(&spec)?;
            emit(&rows_to_csv(&rows), s.out.as_ref())?;
        }
        Command::Figure { figure, out } => {
            let figure: Figure = figure.parse()?;
            emit(&figure_data(figure)?, out.as_ref())?;
        }
        Command::Verify {
            grid,
            seed,
            horizon,
        } => {
            if grid == 0 || !(horizon.is_finite() && horizon > 0.0) {
                return Err(Failure::Invalid(
                    "grid and horizon must be positive".into(),
                ));
            }
            let report = verify_with(&VerifyOptions {
                grid,
                seed,
                sim_horizon: horizon,
                model_override: None,
            });
            println!("{}", report.to_json());
            if !report.passed {
                return Err(Failure::Verify);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INVALID)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_VERIFY_FAILED)
        }
        Err(Failure::Verify) => {
            eprintln!("verification failed");
            ExitCode::from(EXIT_VERIFY_FAILED)
        }
    }
}
