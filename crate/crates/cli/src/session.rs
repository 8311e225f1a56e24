//! One tuning session: evaluator setup, search, history and report files.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use log::info;

use grouptune::evaluation::{
    BenchmarkSpec, CompilerEvaluator, CompilerOptions, SyntheticEvaluator, SyntheticLandscape,
};
use grouptune::reporting::{
    build_report, read_history, HistoryHeader, JsonlHistory, SessionReport, HISTORY_FORMAT,
};
use grouptune::{
    run_searcher, sha256_hex, Evaluator, GroupTable, ReferenceResult, SearchConfig, SeededRng,
};

use crate::config::{config_error, EvaluatorKind, SessionConfig};

pub const HISTORY_FILE: &str = "history.jsonl";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";

pub struct SessionResult {
    pub report: SessionReport,
    pub best_tokens: Option<Vec<String>>,
    pub wall_time: f64,
}

pub fn load_table(path: Option<&Path>) -> anyhow::Result<GroupTable> {
    match path {
        Some(p) => GroupTable::from_path(p).map_err(|e| config_error(e.to_string())),
        None => Ok(GroupTable::shipped()),
    }
}

fn file_digest(path: &Path) -> anyhow::Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

/// Runs a session and writes `history.jsonl`, `report.json` and `report.csv`
/// into `out`.
pub fn run_session(cfg: &SessionConfig, out: &Path) -> anyhow::Result<SessionResult> {
    let started = Instant::now();
    let table = load_table(cfg.groups.as_deref())?;
    let search =
        SearchConfig::with_schedule_params(cfg.budget, cfg.n_init, cfg.t0, cfg.tmin, cfg.alpha)
            .map_err(|e| config_error(e.to_string()))?;

    let (mut evaluator, reference, bench_digest, landscape_digest): (
        Box<dyn Evaluator>,
        ReferenceResult,
        Option<String>,
        Option<String>,
    ) = match cfg.evaluator {
        EvaluatorKind::Synthetic => {
            let path = cfg.landscape.as_deref().expect("validated");
            let land =
                SyntheticLandscape::from_path(path).map_err(|e| config_error(e.to_string()))?;
            let eval = SyntheticEvaluator::new(&land, &table, cfg.seed)
                .map_err(|e| config_error(e.to_string()))?;
            let reference = ReferenceResult {
                output_digest: None,
                perf_o3: eval.noiseless(&table.default_combination()),
            };
            (Box::new(eval), reference, None, Some(file_digest(path)?))
        }
        EvaluatorKind::Compiler => {
            let path = cfg.bench.as_deref().expect("validated");
            let bench = BenchmarkSpec::from_path(path).map_err(|e| {
                config_error(format!("bad benchmark manifest {}: {e}", path.display()))
            })?;
            let options = CompilerOptions {
                cc: PathBuf::from(&cfg.cc),
                repetitions: cfg.reps,
                pin_core: cfg.pin_core,
            };
            let mut eval = CompilerEvaluator::new(bench, table.clone(), options)?;
            info!("establishing -O3 reference");
            let reference = eval.establish_reference()?;
            info!("reference: {:.6} s", reference.perf_o3);
            (Box::new(eval), reference, Some(file_digest(path)?), None)
        }
    };

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let header = HistoryHeader {
        format: HISTORY_FORMAT.to_string(),
        grouping_digest: table.digest().to_string(),
        compiler_id: table.compiler_id().to_string(),
        flags: table.len(),
        algorithm: cfg.algorithm,
        seed: cfg.seed,
        budget: cfg.budget,
        n_init: cfg.n_init,
        schedule: search.schedule,
        evaluator: match cfg.evaluator {
            EvaluatorKind::Compiler => "compiler".into(),
            EvaluatorKind::Synthetic => "synthetic".into(),
        },
        bench_digest,
        landscape_digest,
        reference: reference.clone(),
        config: serde_json::to_value(cfg)?,
    };
    let history_path = out.join(HISTORY_FILE);
    let mut history = JsonlHistory::create(&history_path, &header)?
        .with_timestamps(cfg.evaluator == EvaluatorKind::Compiler);

    info!(
        "{} session: {} flags in {} groups, budget {}, seed {}",
        cfg.algorithm,
        table.len(),
        table.num_groups(),
        cfg.budget,
        cfg.seed
    );
    let mut rng = SeededRng::new(cfg.seed);
    let outcome = run_searcher(
        cfg.algorithm,
        &table,
        &search,
        &mut evaluator,
        &mut rng,
        &mut history,
    )?;
    info!("search finished after {} evaluations", outcome.evaluations);
    drop(history);

    let loaded = read_history(&history_path)?;
    let report = write_report(out, &loaded.records, &reference)?;
    let best_tokens = report
        .best_combination
        .as_deref()
        .map(|bits| {
            grouptune::Combination::from_bitstring_for(&table, bits).map(|c| table.render_flags(&c))
        })
        .transpose()?;
    Ok(SessionResult {
        report,
        best_tokens,
        wall_time: started.elapsed().as_secs_f64(),
    })
}

pub fn write_report(
    out: &Path,
    records: &[grouptune::reporting::HistoryRecord],
    reference: &ReferenceResult,
) -> anyhow::Result<SessionReport> {
    let report = build_report(records, reference)?;
    let json = out.join(REPORT_JSON);
    fs::write(&json, report.to_json()).with_context(|| format!("writing {}", json.display()))?;
    let csv = out.join(REPORT_CSV);
    fs::write(&csv, report.to_csv(records))
        .with_context(|| format!("writing {}", csv.display()))?;
    Ok(report)
}

/// Rebuilds the report files of `dir` from its history.
pub fn regenerate_report(dir: &Path) -> anyhow::Result<SessionReport> {
    let path = dir.join(HISTORY_FILE);
    let loaded = read_history(&path)?;
    if loaded.truncated_tail {
        log::warn!(
            "{}: last line is incomplete; reporting over the first {} records",
            path.display(),
            loaded.records.len()
        );
    }
    write_report(dir, &loaded.records, &loaded.header.reference)
}
