//! grouptune: group-aware compiler flag tuning.

mod compare;
mod config;
mod session;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use grouptune::evaluation::{EvalError, LandscapeError, PlantedLandscape};
use grouptune::option_space::{GroupTableError, GCC_9_2_0_ID, GCC_9_2_0_SIZES};
use grouptune::reporting::{HistoryError, ReportError};
use grouptune::{GroupTable, SearchError, SearcherKind};

use crate::config::{config_error, AlgorithmArg, ConfigError, SessionArgs, SessionConfig};

#[derive(Parser)]
#[command(
    name = "grouptune",
    version,
    about = "Group-aware compiler flag tuning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one tuning session
    Tune {
        #[command(flatten)]
        session: SessionArgs,
        /// Search algorithm [default: group-tuner]
        #[arg(long, value_enum)]
        algorithm: Option<AlgorithmArg>,
        /// RNG seed [default: 0]
        #[arg(long)]
        seed: Option<u64>,
        /// Session directory
        #[arg(long, default_value = "grouptune-session")]
        out: PathBuf,
    },
    /// Run several algorithms and seeds and tabulate the results
    Compare {
        #[command(flatten)]
        session: SessionArgs,
        /// Algorithms to compare
        #[arg(
            long,
            value_enum,
            value_delimiter = ',',
            default_value = "group-tuner,rio,global-sa"
        )]
        algorithm: Vec<AlgorithmArg>,
        /// Seeds, e.g. "0..30" or "1,2,5"
        #[arg(long, default_value = "0")]
        seeds: String,
        /// Output directory
        #[arg(long, default_value = "grouptune-compare")]
        out: PathBuf,
    },
    /// Check a grouping file and print its shape
    ValidateGroups {
        /// Grouping file [default: shipped gcc-9.2.0 table]
        path: Option<PathBuf>,
    },
    /// Rebuild report.json and report.csv from a session's history
    Report {
        /// Session directory
        dir: PathBuf,
    },
    /// Write a random synthetic landscape and its grouping file
    Plant {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Noise amplitude in pseudo-seconds
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_EVALUATOR: u8 = 3;
const EXIT_IO: u8 = 4;
const EXIT_SEARCH: u8 = 5;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ConfigError>()
            || cause.is::<GroupTableError>()
            || cause.is::<LandscapeError>()
        {
            return EXIT_CONFIG;
        }
        if let Some(e) = cause.downcast_ref::<SearchError>() {
            return match e {
                SearchError::Eval(_) => EXIT_EVALUATOR,
                SearchError::History(_) => EXIT_IO,
                SearchError::BudgetExhausted { .. } => EXIT_SEARCH,
                _ => EXIT_CONFIG,
            };
        }
        if cause.is::<EvalError>() {
            return EXIT_EVALUATOR;
        }
        if cause.is::<HistoryError>() || cause.is::<ReportError>() || cause.is::<std::io::Error>() {
            return EXIT_IO;
        }
    }
    1
}

fn tune(
    session: SessionArgs,
    algorithm: Option<AlgorithmArg>,
    seed: Option<u64>,
    out: PathBuf,
) -> anyhow::Result<()> {
    let cfg = SessionConfig::resolve(&session, algorithm.map(SearcherKind::from), seed)?;
    let res = session::run_session(&cfg, &out)?;
    let r = &res.report;
    match (&res.best_tokens, r.best_perf, r.improvement_pct) {
        (Some(tokens), Some(perf), Some(imp)) => {
            println!("best flags: {}", tokens.join(" "));
            println!("best_perf: {perf:.6} s (-O3: {:.6} s)", r.perf_o3);
            println!("improvement: {imp:.3}%");
        }
        _ => println!("no valid combination found"),
    }
    println!("session written to {}", out.display());
    Ok(())
}

fn validate_groups(path: Option<PathBuf>) -> anyhow::Result<()> {
    let table = session::load_table(path.as_deref())?;
    let sizes = table.group_sizes();
    println!("{} groups, {} options", table.num_groups(), table.len());
    let listed: Vec<String> = sizes.iter().map(ToString::to_string).collect();
    println!("sizes: [{}]", listed.join(", "));
    if !table.is_partition() {
        return Err(config_error("groups do not partition the flag set"));
    }
    if table.compiler_id() == GCC_9_2_0_ID && sizes != GCC_9_2_0_SIZES {
        return Err(config_error(format!(
            "{GCC_9_2_0_ID} table must have group sizes {GCC_9_2_0_SIZES:?}"
        )));
    }
    println!("ok");
    Ok(())
}

fn plant(seed: u64, noise: f64, out: PathBuf) -> anyhow::Result<()> {
    let gen = PlantedLandscape {
        noise_amplitude: noise,
        ..PlantedLandscape::default()
    };
    let (table, land): (GroupTable, _) = gen.generate(seed)?;
    std::fs::create_dir_all(&out)?;
    std::fs::write(out.join("groups.json"), table.to_json())?;
    std::fs::write(out.join("landscape.json"), land.to_json())?;
    println!(
        "wrote {} ({} groups, {} flags) and {}",
        out.join("groups.json").display(),
        table.num_groups(),
        table.len(),
        out.join("landscape.json").display()
    );
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Tune {
            session,
            algorithm,
            seed,
            out,
        } => tune(session, algorithm, seed, out),
        Command::Compare {
            session,
            algorithm,
            seeds,
            out,
        } => {
            let algorithms: Vec<SearcherKind> =
                algorithm.into_iter().map(SearcherKind::from).collect();
            let seeds = compare::parse_seeds(&seeds)?;
            compare::run_compare(&session, &algorithms, &seeds, &out).map(|_| ())
        }
        Command::ValidateGroups { path } => validate_groups(path),
        Command::Report { dir } => {
            let r = session::regenerate_report(&dir)?;
            println!(
                "{} records, best improvement {}",
                r.records,
                r.improvement_pct
                    .map(|i| format!("{i:.3}%"))
                    .unwrap_or_else(|| "n/a".into())
            );
            Ok(())
        }
        Command::Plant { seed, noise, out } => plant(seed, noise, out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
