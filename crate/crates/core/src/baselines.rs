//! Comparison searchers: random iterative optimization (RIO) and global
//! simulated annealing.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::evaluation::Evaluator;
use crate::option_space::{Combination, GroupTable};
use crate::reporting::{HistorySink, Phase};
use crate::rng::RandomSource;
use crate::search::{
    anneal_with, Candidate, CandidateList, Mutation, MutationKind, SearchConfig, SearchError,
    SearchOutcome, Tracker,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearcherKind {
    GroupTuner,
    Rio,
    GlobalSa,
}

impl SearcherKind {
    pub const ALL: [SearcherKind; 3] = [Self::GroupTuner, Self::Rio, Self::GlobalSa];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::GroupTuner => "group-tuner",
            Self::Rio => "rio",
            Self::GlobalSa => "global-sa",
        }
    }
}

impl fmt::Display for SearcherKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SearcherKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                format!("unknown algorithm {s:?} (expected group-tuner, rio or global-sa)")
            })
    }
}

/// A combination with every flag drawn uniformly and independently.
pub fn rio_step(table: &GroupTable, rng: &mut impl RandomSource) -> Combination {
    Combination::from_states((0..table.len()).map(|_| rng.uniform() < 0.5).collect())
}

/// Flips every flag independently with probability 1/2.
///
/// Uses the same draw and threshold as the group-aware operator, so on a
/// table with one group the two produce identical combinations.
pub fn global_sa_step(comb: &Combination, rng: &mut impl RandomSource) -> Combination {
    let mut out = comb.clone();
    for pos in 0..out.len() {
        if rng.uniform() <= 0.5 {
            out.flip(pos);
        }
    }
    out
}

/// Pure random sampling for `budget` evaluations, keeping the running best.
pub fn run_rio(
    table: &GroupTable,
    budget: usize,
    evaluator: &mut impl Evaluator,
    rng: &mut impl RandomSource,
    history: &mut impl HistorySink,
) -> Result<SearchOutcome, SearchError> {
    if budget == 0 {
        return Err(SearchError::Config("budget must be positive".into()));
    }
    let mut tracker = Tracker {
        algorithm: SearcherKind::Rio,
        table,
        evaluator,
        history,
        budget,
        evaluations: 0,
    };
    let mut best: Option<Candidate> = None;
    while tracker.remaining() > 0 {
        let comb = rio_step(table, rng);
        let measurement = tracker.measure(&comb)?;
        let cand = measurement
            .candidate_perf()
            .and_then(|p| Candidate::new(comb.clone(), p));
        let improved = match (&cand, &best) {
            (Some(c), Some(b)) => c.perf < b.perf,
            (Some(_), None) => true,
            _ => false,
        };
        if improved {
            best = cand;
        }
        let m = Mutation {
            combination: comb,
            group: None,
        };
        tracker.record(Phase::Sample, &m, measurement, improved, None)?;
    }
    let best = best.ok_or(SearchError::BudgetExhausted {
        evaluations: tracker.evaluations,
        valid: 0,
        needed: 1,
    })?;
    let mut final_list = CandidateList::new(1);
    final_list.push(best.clone());
    Ok(SearchOutcome {
        best,
        evaluations: tracker.evaluations,
        final_list,
    })
}

/// The annealing loop of [`run_search`](crate::search::run_search) with
/// whole-space mutation.
pub fn run_global_sa(
    table: &GroupTable,
    config: &SearchConfig,
    evaluator: &mut impl Evaluator,
    rng: &mut impl RandomSource,
    history: &mut impl HistorySink,
) -> Result<SearchOutcome, SearchError> {
    let mut tracker = Tracker {
        algorithm: SearcherKind::GlobalSa,
        table,
        evaluator,
        history,
        budget: config.budget,
        evaluations: 0,
    };
    anneal_with(&mut tracker, MutationKind::Global, config, rng)
}

/// Dispatches on `kind`. RIO uses only `config.budget`.
pub fn run_searcher(
    kind: SearcherKind,
    table: &GroupTable,
    config: &SearchConfig,
    evaluator: &mut impl Evaluator,
    rng: &mut impl RandomSource,
    history: &mut impl HistorySink,
) -> Result<SearchOutcome, SearchError> {
    match kind {
        SearcherKind::GroupTuner => {
            crate::search::run_search(table, config, evaluator, rng, history)
        }
        SearcherKind::Rio => run_rio(table, config.budget, evaluator, rng, history),
        SearcherKind::GlobalSa => run_global_sa(table, config, evaluator, rng, history),
    }
}
