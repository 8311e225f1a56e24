//! Session configuration: command-line flags over an optional JSON file
//! over built-in defaults.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use grouptune::evaluation::DEFAULT_REPETITIONS;
use grouptune::search::{DEFAULT_ALPHA, DEFAULT_BUDGET, DEFAULT_N_INIT, DEFAULT_T0, DEFAULT_T_MIN};
use grouptune::SearcherKind;

/// Bad flags, bad config files, or inconsistent settings.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum EvaluatorKind {
    Compiler,
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgorithmArg {
    GroupTuner,
    Rio,
    GlobalSa,
}

impl From<AlgorithmArg> for SearcherKind {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::GroupTuner => SearcherKind::GroupTuner,
            AlgorithmArg::Rio => SearcherKind::Rio,
            AlgorithmArg::GlobalSa => SearcherKind::GlobalSa,
        }
    }
}

/// Flags shared by `tune` and `compare`. Every field is optional so the
/// config file and defaults can fill the gaps.
#[derive(Debug, Clone, Default, Args)]
pub struct SessionArgs {
    /// JSON config file; command-line flags take precedence over it
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Total evaluation budget, initialization included [default: 500]
    #[arg(long)]
    pub budget: Option<usize>,
    /// Candidate list size [default: 10]
    #[arg(long)]
    pub n_init: Option<usize>,
    /// Grouping file [default: shipped gcc-9.2.0 table]
    #[arg(long)]
    pub groups: Option<PathBuf>,
    /// Benchmark manifest (compiler evaluator)
    #[arg(long)]
    pub bench: Option<PathBuf>,
    /// Compiler driver
    #[arg(long, env = "GROUPTUNE_CC")]
    pub cc: Option<String>,
    /// Timed runs per evaluation [default: 5]
    #[arg(long)]
    pub reps: Option<usize>,
    /// Pin benchmark runs to this CPU core
    #[arg(long)]
    pub pin_core: Option<usize>,
    /// Initial temperature [default: 1.0]
    #[arg(long)]
    pub t0: Option<f64>,
    /// Final temperature [default: 0.001]
    #[arg(long)]
    pub tmin: Option<f64>,
    /// Acceptance scaling factor [default: 1.0]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Evaluator backend [default: compiler]
    #[arg(long, value_enum)]
    pub evaluator: Option<EvaluatorKind>,
    /// Synthetic landscape file
    #[arg(long)]
    pub landscape: Option<PathBuf>,
}

/// Config file contents. Relative paths resolve against the file's directory.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub algorithm: Option<SearcherKind>,
    pub seed: Option<u64>,
    pub budget: Option<usize>,
    pub n_init: Option<usize>,
    pub groups: Option<PathBuf>,
    pub bench: Option<PathBuf>,
    pub cc: Option<String>,
    pub reps: Option<usize>,
    pub pin_core: Option<usize>,
    pub t0: Option<f64>,
    pub tmin: Option<f64>,
    pub alpha: Option<f64>,
    pub evaluator: Option<EvaluatorKind>,
    pub landscape: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: FileConfig = serde_json::from_str(&text)
            .map_err(|e| config_error(format!("bad config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.groups, &mut cfg.bench, &mut cfg.landscape]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// Fully resolved settings for one session.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionConfig {
    pub algorithm: SearcherKind,
    pub seed: u64,
    pub budget: usize,
    pub n_init: usize,
    pub groups: Option<PathBuf>,
    pub bench: Option<PathBuf>,
    pub cc: String,
    pub reps: usize,
    pub pin_core: Option<usize>,
    pub t0: f64,
    pub tmin: f64,
    pub alpha: f64,
    pub evaluator: EvaluatorKind,
    pub landscape: Option<PathBuf>,
}

impl SessionConfig {
    pub fn resolve(
        args: &SessionArgs,
        algorithm: Option<SearcherKind>,
        seed: Option<u64>,
    ) -> anyhow::Result<Self> {
        let file = match &args.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let cfg = SessionConfig {
            algorithm: algorithm
                .or(file.algorithm)
                .unwrap_or(SearcherKind::GroupTuner),
            seed: seed.or(file.seed).unwrap_or(0),
            budget: args.budget.or(file.budget).unwrap_or(DEFAULT_BUDGET),
            n_init: args.n_init.or(file.n_init).unwrap_or(DEFAULT_N_INIT),
            groups: args.groups.clone().or(file.groups),
            bench: args.bench.clone().or(file.bench),
            cc: args.cc.clone().or(file.cc).unwrap_or_else(|| "gcc".into()),
            reps: args.reps.or(file.reps).unwrap_or(DEFAULT_REPETITIONS),
            pin_core: args.pin_core.or(file.pin_core),
            t0: args.t0.or(file.t0).unwrap_or(DEFAULT_T0),
            tmin: args.tmin.or(file.tmin).unwrap_or(DEFAULT_T_MIN),
            alpha: args.alpha.or(file.alpha).unwrap_or(DEFAULT_ALPHA),
            evaluator: args
                .evaluator
                .or(file.evaluator)
                .unwrap_or(EvaluatorKind::Compiler),
            landscape: args.landscape.clone().or(file.landscape),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.budget <= self.n_init {
            return Err(config_error(format!(
                "budget ({}) must be greater than n_init ({})",
                self.budget, self.n_init
            )));
        }
        if self.n_init == 0 {
            return Err(config_error("n-init must be at least 1"));
        }
        if self.reps == 0 {
            return Err(config_error("reps must be at least 1"));
        }
        match self.evaluator {
            EvaluatorKind::Compiler if self.bench.is_none() => {
                return Err(config_error("the compiler evaluator needs --bench"));
            }
            EvaluatorKind::Synthetic if self.landscape.is_none() => {
                return Err(config_error("the synthetic evaluator needs --landscape"));
            }
            _ => {}
        }
        for p in [&self.groups, &self.bench, &self.landscape]
            .into_iter()
            .flatten()
        {
            if !p.exists() {
                return Err(config_error(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }
}
