//! Session summaries computed from a history.
//!
//! Improvement of a valid record is `(perf_O3 - perf) / perf_O3 * 100`.
//! Invalid records count toward iteration numbers and window sizes but are
//! excluded from every mean.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::history::HistoryRecord;
use crate::evaluation::ReferenceResult;

/// Records per window in [`SessionReport::window_stats`].
pub const WINDOW: usize = 50;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReportError {
    #[error("history has no records")]
    EmptyHistory,
    #[error("reference time must be positive")]
    BadReference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowStat {
    /// First iteration in the window.
    pub start: usize,
    /// One past the last iteration in the window.
    pub end: usize,
    pub valid: usize,
    /// Mean improvement over valid records; `None` if there were none.
    pub mean_improvement_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupContribution {
    /// 1-based group index.
    pub group: usize,
    pub evaluations: usize,
    pub mean_improvement_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub records: usize,
    pub valid_records: usize,
    pub status_counts: BTreeMap<String, usize>,
    pub perf_o3: f64,
    /// Iteration of the best valid record (earliest on ties).
    pub best_iteration: Option<usize>,
    pub best_combination: Option<String>,
    pub best_perf: Option<f64>,
    pub improvement_pct: Option<f64>,
    pub window_size: usize,
    pub window_stats: Vec<WindowStat>,
    /// Best improvement observed up to and including each record.
    pub best_curve: Vec<Option<f64>>,
    pub group_contrib: Vec<GroupContribution>,
}

pub fn improvement_pct(perf_o3: f64, perf: f64) -> f64 {
    (perf_o3 - perf) / perf_o3 * 100.0
}

pub fn build_report(
    history: &[HistoryRecord],
    reference: &ReferenceResult,
) -> Result<SessionReport, ReportError> {
    if history.is_empty() {
        return Err(ReportError::EmptyHistory);
    }
    let perf_o3 = reference.perf_o3;
    if !(perf_o3 > 0.0 && perf_o3.is_finite()) {
        return Err(ReportError::BadReference);
    }

    let improvements: Vec<Option<f64>> = history
        .iter()
        .map(|r| {
            r.measurement
                .candidate_perf()
                .map(|p| improvement_pct(perf_o3, p))
        })
        .collect();

    let mut status_counts = BTreeMap::new();
    for r in history {
        *status_counts
            .entry(r.measurement.status.as_str().to_string())
            .or_insert(0) += 1;
    }

    let mut best: Option<(usize, f64)> = None;
    let mut best_curve = Vec::with_capacity(history.len());
    for (i, r) in history.iter().enumerate() {
        if let Some(p) = r.measurement.candidate_perf() {
            if best.is_none_or(|(_, b)| p < b) {
                best = Some((i, p));
            }
        }
        best_curve.push(best.map(|(_, p)| improvement_pct(perf_o3, p)));
    }

    let window_stats = history
        .chunks(WINDOW)
        .enumerate()
        .map(|(w, chunk)| {
            let start = w * WINDOW;
            let vals: Vec<f64> = improvements[start..start + chunk.len()]
                .iter()
                .flatten()
                .copied()
                .collect();
            WindowStat {
                start,
                end: start + chunk.len(),
                valid: vals.len(),
                mean_improvement_pct: mean_opt(&vals),
            }
        })
        .collect();

    let mut per_group: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (r, imp) in history.iter().zip(&improvements) {
        if let (Some(g), Some(imp)) = (r.mutated_group, imp) {
            per_group.entry(g).or_default().push(*imp);
        }
    }
    let group_contrib = per_group
        .into_iter()
        .map(|(group, vals)| GroupContribution {
            group,
            evaluations: vals.len(),
            mean_improvement_pct: mean_opt(&vals).expect("non-empty"),
        })
        .collect();

    Ok(SessionReport {
        records: history.len(),
        valid_records: improvements.iter().flatten().count(),
        status_counts,
        perf_o3,
        best_iteration: best.map(|(i, _)| history[i].iteration),
        best_combination: best.map(|(i, _)| history[i].combination.clone()),
        best_perf: best.map(|(_, p)| p),
        improvement_pct: best.map(|(_, p)| improvement_pct(perf_o3, p)),
        window_size: WINDOW,
        window_stats,
        best_curve,
        group_contrib,
    })
}

fn mean_opt(vals: &[f64]) -> Option<f64> {
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

impl SessionReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Plot-ready per-iteration table.
    pub fn to_csv(&self, history: &[HistoryRecord]) -> String {
        let mut out =
            String::from("iteration,improvement_pct,best_improvement_pct,mutated_group,status\n");
        for (r, best) in history.iter().zip(&self.best_curve) {
            let imp = r
                .measurement
                .candidate_perf()
                .map(|p| improvement_pct(self.perf_o3, p).to_string())
                .unwrap_or_default();
            let best = best.map(|b| b.to_string()).unwrap_or_default();
            let group = r.mutated_group.map(|g| g.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.iteration,
                imp,
                best,
                group,
                r.measurement.status.as_str()
            );
        }
        out
    }
}
