//! Side-by-side runs of several searchers over the same benchmark.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::Write as _;
use std::path::Path;

use anyhow::Context;

use grouptune::SearcherKind;

use crate::config::{config_error, SessionArgs, SessionConfig};
use crate::session::run_session;

pub const COMPARE_CSV: &str = "compare.csv";
pub const COMPARE_TXT: &str = "compare.txt";

#[derive(Debug, Clone)]
pub struct Row {
    pub algorithm: SearcherKind,
    pub seed: u64,
    pub best_improvement_pct: Option<f64>,
    pub window_means: Vec<Option<f64>>,
    pub wall_time: f64,
}

/// Parses `0,3,7` and `0..30` style seed lists.
pub fn parse_seeds(spec: &str) -> anyhow::Result<Vec<u64>> {
    let mut seeds = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || config_error(format!("bad seed list entry {part:?}"));
        if let Some((a, b)) = part.split_once("..") {
            let a: u64 = a.parse().map_err(|_| bad())?;
            let b: u64 = b.parse().map_err(|_| bad())?;
            seeds.extend(a..b);
        } else {
            seeds.push(part.parse().map_err(|_| bad())?);
        }
    }
    Ok(seeds)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

fn csv_line(r: &Row) -> String {
    let windows: Vec<String> = r.window_means.iter().map(|w| fmt_opt(*w)).collect();
    format!(
        "{},{},{},{:.3},{}\n",
        r.algorithm,
        r.seed,
        fmt_opt(r.best_improvement_pct),
        r.wall_time,
        windows.join(";")
    )
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

pub fn run_compare(
    args: &SessionArgs,
    algorithms: &[SearcherKind],
    seeds: &[u64],
    out: &Path,
) -> anyhow::Result<Vec<Row>> {
    if algorithms.len() * seeds.len() < 2 {
        return Err(config_error(
            "compare needs at least two sessions (algorithms x seeds)",
        ));
    }
    let configs = algorithms
        .iter()
        .flat_map(|&a| seeds.iter().map(move |&s| (a, s)))
        .map(|(a, s)| SessionConfig::resolve(args, Some(a), Some(s)))
        .collect::<anyhow::Result<Vec<_>>>()?;

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let csv_path = out.join(COMPARE_CSV);
    let mut csv =
        File::create(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?;
    writeln!(
        csv,
        "algorithm,seed,best_improvement_pct,wall_time_s,window_means"
    )?;

    let mut rows = Vec::with_capacity(configs.len());
    for cfg in &configs {
        let dir = out.join(format!("{}-seed{}", cfg.algorithm, cfg.seed));
        let res = run_session(cfg, &dir).with_context(|| {
            format!(
                "{} seed {} failed; earlier rows are in {}",
                cfg.algorithm,
                cfg.seed,
                csv_path.display()
            )
        })?;
        let row = Row {
            algorithm: cfg.algorithm,
            seed: cfg.seed,
            best_improvement_pct: res.report.improvement_pct,
            window_means: res
                .report
                .window_stats
                .iter()
                .map(|w| w.mean_improvement_pct)
                .collect(),
            wall_time: res.wall_time,
        };
        csv.write_all(csv_line(&row).as_bytes())?;
        csv.flush()?;
        rows.push(row);
    }

    let table = render_table(&rows, algorithms);
    let txt = out.join(COMPARE_TXT);
    fs::write(&txt, &table).with_context(|| format!("writing {}", txt.display()))?;
    print!("{table}");
    Ok(rows)
}

pub fn render_table(rows: &[Row], algorithms: &[SearcherKind]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<12} {:>6} {:>10} {:>9}  window means (%)",
        "algorithm", "seed", "best (%)", "wall (s)"
    );
    for r in rows {
        let windows: Vec<String> = r
            .window_means
            .iter()
            .map(|w| w.map(|x| format!("{x:.2}")).unwrap_or_else(|| "-".into()))
            .collect();
        let _ = writeln!(
            s,
            "{:<12} {:>6} {:>10} {:>9.2}  {}",
            r.algorithm.as_str(),
            r.seed,
            r.best_improvement_pct
                .map(|b| format!("{b:.3}"))
                .unwrap_or_else(|| "-".into()),
            r.wall_time,
            windows.join(" ")
        );
    }
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "{:<12} {:>6} {:>12} {:>12}",
        "algorithm", "runs", "median (%)", "mean (%)"
    );
    for &a in algorithms {
        let mut best: Vec<f64> = rows
            .iter()
            .filter(|r| r.algorithm == a)
            .filter_map(|r| r.best_improvement_pct)
            .collect();
        let runs = best.len();
        let mean = (runs > 0).then(|| best.iter().sum::<f64>() / runs as f64);
        let med = median(&mut best);
        let _ = writeln!(
            s,
            "{:<12} {:>6} {:>12} {:>12}",
            a.as_str(),
            runs,
            med.map(|m| format!("{m:.3}")).unwrap_or_else(|| "-".into()),
            mean.map(|m| format!("{m:.3}"))
                .unwrap_or_else(|| "-".into()),
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("0..3,7").unwrap(), vec![0, 1, 2, 7]);
        assert_eq!(parse_seeds("5").unwrap(), vec![5]);
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn medians() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&mut []), None);
    }

    #[test]
    fn single_session_is_a_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = run_compare(
            &SessionArgs::default(),
            &[SearcherKind::Rio],
            &[1],
            dir.path(),
        )
        .unwrap_err();
        assert!(err.downcast_ref::<crate::config::ConfigError>().is_some());
    }
}
