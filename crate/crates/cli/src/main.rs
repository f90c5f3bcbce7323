//! `tennis-graph`: ingestion, walk-forward forecasting, evaluation,
//! intransitivity analysis and betting simulation driven by one TOML config.

mod commands;
mod run;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use tennis_graph::betting::Staking;
use tennis_graph::config::{Config, DATA_DIR_ENV};
use tennis_graph::eval::Source;
use tennis_graph::ingest::Tour;

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_MISSING_CONFIG: u8 = 3;
pub const EXIT_MISSING_INPUT: u8 = 4;

#[derive(Parser)]
#[command(name = "tennis-graph", version, about = "Graph-based tennis forecasting and betting simulation")]
struct Cli {
    /// TOML run configuration; built-in defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Raw data directory. Overrides `data.dir` and the environment.
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    /// Artifact directory. Overrides `data.output`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TourArg {
    Men,
    Women,
    Both,
}

impl TourArg {
    pub fn tours(self) -> Vec<Tour> {
        match self {
            TourArg::Men => vec![Tour::Men],
            TourArg::Women => vec![Tour::Women],
            TourArg::Both => Tour::ALL.to_vec(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse raw results CSVs into the canonical match ledger.
    Ingest {
        #[arg(long, value_enum, default_value_t = TourArg::Both)]
        tour: TourArg,
    },
    /// Walk forward through the validation and test periods, writing the
    /// prediction ledger, checkpoints and loss traces.
    Walkforward {
        #[arg(long, value_enum, default_value_t = TourArg::Both)]
        tour: TourArg,
    },
    /// Accuracy, Brier, calibration and intransitivity-stratified reports.
    Evaluate {
        #[arg(long, value_enum, default_value_t = TourArg::Both)]
        tour: TourArg,
    },
    /// Weighted intransitivity per match and its distribution summary.
    Intransitivity {
        #[arg(long, value_enum, default_value_t = TourArg::Both)]
        tour: TourArg,
    },
    /// Betting simulation on the test period.
    Bet {
        #[arg(long, value_enum, default_value_t = TourArg::Both)]
        tour: TourArg,
        /// Intransitivity threshold; 0 disables the filter.
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        staking: Option<Staking>,
        /// Probability column to bet with.
        #[arg(long)]
        source: Option<Source>,
    },
    /// Non-dominated trials from a tuning CSV with columns
    /// `brier_men,brier_women,params`.
    Pareto { trials: PathBuf },
    /// Property checks on built-in synthetic fixtures; needs no data.
    Selftest,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ingest { .. } => "ingest",
            Command::Walkforward { .. } => "walkforward",
            Command::Evaluate { .. } => "evaluate",
            Command::Intransitivity { .. } => "intransitivity",
            Command::Bet { .. } => "bet",
            Command::Pareto { .. } => "pareto",
            Command::Selftest => "selftest",
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("config file not found: {}", .0.display())]
struct MissingConfig(PathBuf);

fn load_config(cli: &Cli) -> anyhow::Result<Config> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path).map_err(|e| match e {
            tennis_graph::Error::MissingFile(p) => anyhow::Error::new(MissingConfig(p)),
            other => anyhow::Error::new(other).context(format!("loading {}", path.display())),
        })?,
        None => {
            let mut c = Config::default();
            c.apply_env_override(std::env::var_os(DATA_DIR_ENV).map(PathBuf::from));
            c
        }
    };
    if let Some(d) = &cli.data_dir {
        config.data.dir = d.clone();
    }
    if let Some(o) = &cli.out {
        config.data.output = o.clone();
    }
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    config.validate()?;
    Ok(config)
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    let config = load_config(&cli)?;
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let mut run = run::Run::new(cli.command.name(), config, argv)?;
    let outcome = match cli.command {
        Command::Ingest { tour } => commands::ingest(&mut run, &tour.tours()),
        Command::Walkforward { tour } => commands::walkforward(&mut run, &tour.tours()),
        Command::Evaluate { tour } => commands::evaluate(&mut run, &tour.tours()),
        Command::Intransitivity { tour } => commands::intransitivity(&mut run, &tour.tours()),
        Command::Bet {
            tour,
            gamma,
            staking,
            source,
        } => commands::bet(&mut run, &tour.tours(), gamma, staking, source),
        Command::Pareto { trials } => commands::pareto(&mut run, &trials),
        Command::Selftest => selftest::run(&mut run),
    };
    outcome?;
    run.finish()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<MissingConfig>() {
            return EXIT_MISSING_CONFIG;
        }
        if let Some(tennis_graph::Error::MissingFile(_)) = cause.downcast_ref::<tennis_graph::Error>() {
            return EXIT_MISSING_INPUT;
        }
    }
    EXIT_FAILURE
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors, including unknown subcommands
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
