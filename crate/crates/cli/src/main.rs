use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

/// Forecast campus demand and schedule activities and batteries under a
/// peak cap.
#[derive(Parser, Debug)]
#[command(name = "valleyfill", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Reserved: no command currently draws random numbers.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fill short gaps, drop long ones, apply manual directives.
    Repair(RepairArgs),
    /// STL decomposition into trend, seasonal and remainder.
    Decompose(DecomposeArgs),
    /// Refined daily motif of a generation series.
    Motif(MotifArgs),
    /// Baseline forecasts, optionally scored on a holdout tail.
    Forecast(ForecastArgs),
    /// Two-stage activity and battery schedule.
    Schedule(ScheduleArgs),
}

#[derive(Args, Debug)]
pub struct RepairArgs {
    /// `timestamp,value` CSV.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Centered imputation window in intervals.
    #[arg(long, default_value_t = 96)]
    pub window: usize,
    /// `constant_fill:<kW>:<start>..<end>`, `year_shift_fill:<years>:<start>..<end>`
    /// or `@directives.json`. Applied in order before the gap rules.
    #[arg(long)]
    pub directive: Vec<String>,
}

#[derive(Args, Debug)]
pub struct DecomposeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 672)]
    pub period: usize,
    /// Robustness passes.
    #[arg(long, default_value_t = 0)]
    pub outer_iterations: usize,
}

#[derive(Args, Debug)]
pub struct MotifArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 96)]
    pub window: usize,
    #[arg(long, default_value_t = 10)]
    pub neighbors: usize,
}

#[derive(Args, Debug)]
pub struct ForecastArgs {
    /// One or more series; each is forecast independently.
    #[arg(long, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Forecast spec JSON. Without it a seasonal-naive model with `--period` is used.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Seasonal period, also the MASE lag.
    #[arg(long, default_value_t = 672)]
    pub period: usize,
    /// Forecast length when neither `--spec` nor `--holdout` fixes it.
    #[arg(long, default_value_t = 2880)]
    pub horizon: usize,
    /// Hold out this many trailing points, forecast them and print MASE.
    #[arg(long)]
    pub holdout: Option<usize>,
    /// Exogenous frame CSV (motif models).
    #[arg(long)]
    pub exogenous: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ScheduleArgs {
    /// Instance JSON. Omit with `--demo`.
    #[arg(long, required_unless_present = "demo")]
    pub input: Option<PathBuf>,
    /// Use the bundled one-day instance.
    #[arg(long, conflicts_with = "input")]
    pub demo: bool,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Replace the instance baseload with this `timestamp,value` series.
    #[arg(long)]
    pub baseload: Option<PathBuf>,
    /// Multiplication factor on the peak lower bound.
    #[arg(long, default_value_t = 1.10)]
    pub mf: f64,
    /// Stage-2 time limit in seconds.
    #[arg(long)]
    pub time_limit: Option<f64>,
    /// Stage-2 relative gap.
    #[arg(long, default_value_t = 1e-4)]
    pub gap: f64,
    /// Re-explore pruned subtrees after the search.
    #[arg(long)]
    pub audit: bool,
    /// Re-price the schedule against this actual baseload series.
    #[arg(long)]
    pub evaluate_against: Option<PathBuf>,
    /// Also write both problems in plain-text LP form.
    #[arg(long)]
    pub dump_lp: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(seed) = cli.seed {
        log::debug!("seed {seed} accepted; nothing is random");
    }
    let res = match &cli.command {
        Command::Repair(a) => commands::repair(a),
        Command::Decompose(a) => commands::decompose(a),
        Command::Motif(a) => commands::motif(a),
        Command::Forecast(a) => commands::forecast(a),
        Command::Schedule(a) => commands::schedule(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
