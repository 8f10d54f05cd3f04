//! Command-line orchestration of the aneurysm surrogate pipeline: profile
//! generation, wall simulation, dataset construction, operator-network
//! training/evaluation, full benchmark cases and report rendering.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 I/O or format error.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use taa_core::CoreError;

#[derive(Parser)]
#[command(name = "taa", version, about = "Synthetic aneurysm growth data and insult-inversion surrogates")]
struct Cli {
    /// TOML configuration overriding the built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker thread count (defaults to the available cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    ElasticFiber,
    Mechanosensing,
    Both,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScenarioArg {
    Normotensive,
    Hypertensive,
    Both,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ArchArg {
    Sensor25,
    Sensor9,
    Image,
}

impl ArchArg {
    fn label(self) -> &'static str {
        match self {
            ArchArg::Sensor25 => "sensor25",
            ArchArg::Sensor9 => "sensor9",
            ArchArg::Image => "image",
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate and write analytic insult profiles.
    GenAnalytic {
        #[arg(long, value_enum, default_value = "both")]
        kind: KindArg,
        #[arg(long, value_enum, default_value = "normotensive")]
        scenario: ScenarioArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate the random (censored Gaussian field) profile set.
    GenRandom {
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the equilibrated wall model over profiles, producing field maps.
    Simulate {
        /// Directory of .insult files laid out as <dir>/<scenario>/...
        #[arg(long)]
        profiles: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert maps + profiles into a training dataset.
    BuildDataset {
        #[arg(long)]
        profiles: PathBuf,
        #[arg(long)]
        maps: PathBuf,
        #[arg(long, value_enum)]
        arch: ArchArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model on a dataset's training split and save a checkpoint.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the multi-trial evaluation protocol on a dataset.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        /// Case number recorded in the report row.
        #[arg(long, default_value_t = 0)]
        case: u8,
        #[arg(long)]
        trials: Option<usize>,
        /// Test-input noise level (fraction of per-channel std).
        #[arg(long)]
        noise: Option<f64>,
        /// Directory receiving/merging report_rows.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Full pipeline for one benchmark case and architecture.
    RunCase {
        #[arg(long)]
        case: u8,
        #[arg(long, value_enum)]
        arch: ArchArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Render accumulated report rows as text and JSON.
    Report {
        /// Directory holding report_rows.json.
        #[arg(long)]
        rows: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code_for(err: &CoreError) -> u8 {
    match err {
        CoreError::Parameter(_) => 2,
        CoreError::Numerical(_) => 3,
        CoreError::Format(_) | CoreError::Io(_) | CoreError::Json(_) => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();

    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("error: could not configure {jobs} worker threads: {e}");
            return ExitCode::from(2);
        }
    }

    let config = match commands::load_config(cli.config.as_deref(), cli.seed) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };

    let result = match cli.command {
        Command::GenAnalytic { kind, scenario, out } => {
            commands::gen_analytic(&config, kind, scenario, &out)
        }
        Command::GenRandom { out } => commands::gen_random(&config, &out),
        Command::Simulate { profiles, out } => commands::simulate_dir(&config, &profiles, &out),
        Command::BuildDataset {
            profiles,
            maps,
            arch,
            out,
        } => commands::build_dataset(&config, &profiles, &maps, arch, &out),
        Command::Train { dataset, out } => commands::train_once(&config, &dataset, &out),
        Command::Evaluate {
            dataset,
            case,
            trials,
            noise,
            out,
        } => commands::evaluate_protocol(&config, &dataset, case, trials, noise, &out),
        Command::RunCase {
            case,
            arch,
            out,
            trials,
            noise,
        } => commands::run_case(&config, case, arch, trials, noise, &out),
        Command::Report { rows, out } => commands::render_report(&rows, &out),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
