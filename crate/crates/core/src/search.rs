//! History-guided, group-aware simulated annealing.
//!
//! The search keeps a fixed-capacity list of the best combinations seen so
//! far. Each step mutates one randomly chosen group of a randomly chosen
//! list entry. A better result replaces the list's worst entry directly; a
//! worse one replaces it with probability `exp(-Δ / (T·α))`, where Δ is the
//! relative regression against the worst entry.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::SearcherKind;
use crate::evaluation::{EvalError, Evaluator, Measurement};
use crate::option_space::{Combination, GroupTable};
use crate::reporting::{HistoryError, HistoryRecord, HistorySink, Phase};
use crate::rng::RandomSource;

pub const DEFAULT_BUDGET: usize = 500;
pub const DEFAULT_N_INIT: usize = 10;
pub const DEFAULT_T0: f64 = 1.0;
pub const DEFAULT_T_MIN: f64 = 0.001;
pub const DEFAULT_ALPHA: f64 = 1.0;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid schedule: {0}")]
    BadSchedule(String),
    #[error("invalid search configuration: {0}")]
    Config(String),
    #[error("acceptance probability domain error: {0}")]
    Domain(String),
    #[error("evaluation budget exhausted after {evaluations} evaluations with {valid} of {needed} valid initial candidates")]
    BudgetExhausted {
        evaluations: usize,
        valid: usize,
        needed: usize,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    History(#[from] HistoryError),
}

/// Temperature schedule: `T_k = t0 · cool_r^k`, iterating while `T > t_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealingSchedule {
    pub t0: f64,
    pub t_min: f64,
    pub cool_r: f64,
    pub alpha: f64,
}

impl AnnealingSchedule {
    pub fn new(t0: f64, t_min: f64, cool_r: f64, alpha: f64) -> Result<Self, SearchError> {
        let s = Self {
            t0,
            t_min,
            cool_r,
            alpha,
        };
        s.validate()?;
        Ok(s)
    }

    /// Schedule whose loop runs exactly `steps` iterations:
    /// `cool_r = (t_min / t0)^(1 / steps)`, nudged by ulps where rounding
    /// would otherwise add or drop an iteration.
    pub fn for_steps(t0: f64, t_min: f64, alpha: f64, steps: usize) -> Result<Self, SearchError> {
        if steps == 0 {
            return Err(SearchError::BadSchedule(
                "at least one annealing step required".into(),
            ));
        }
        let mut s = Self::new(t0, t_min, (t_min / t0).powf(1.0 / steps as f64), alpha)?;
        while s.iterations() > steps {
            s.cool_r = s.cool_r.next_down();
        }
        while s.iterations() < steps {
            s.cool_r = s.cool_r.next_up();
        }
        s.validate()?;
        Ok(s)
    }

    /// The default schedule for a total evaluation budget.
    pub fn for_budget(
        t0: f64,
        t_min: f64,
        alpha: f64,
        budget: usize,
        n_init: usize,
    ) -> Result<Self, SearchError> {
        if budget <= n_init {
            return Err(SearchError::Config(format!(
                "budget ({budget}) must exceed n_init ({n_init})"
            )));
        }
        Self::for_steps(t0, t_min, alpha, budget - n_init)
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        let Self {
            t0,
            t_min,
            cool_r,
            alpha,
        } = *self;
        if !(t_min > 0.0 && t_min < t0 && t0.is_finite()) {
            return Err(SearchError::BadSchedule(format!(
                "need 0 < t_min < t0 (t0={t0}, t_min={t_min})"
            )));
        }
        if !(cool_r > 0.0 && cool_r < 1.0) {
            return Err(SearchError::BadSchedule(format!(
                "cool_r {cool_r} not in (0, 1)"
            )));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(SearchError::BadSchedule(format!(
                "alpha {alpha} must be > 0"
            )));
        }
        Ok(())
    }

    /// Temperatures visited by the loop, in order.
    pub fn temperatures(&self) -> impl Iterator<Item = f64> + '_ {
        std::iter::successors(Some(self.t0), move |t| Some(t * self.cool_r))
            .take_while(move |t| *t > self.t_min)
    }

    /// Number of loop iterations the schedule allows.
    pub fn iterations(&self) -> usize {
        self.temperatures().count()
    }
}

impl Default for AnnealingSchedule {
    fn default() -> Self {
        Self::for_budget(
            DEFAULT_T0,
            DEFAULT_T_MIN,
            DEFAULT_ALPHA,
            DEFAULT_BUDGET,
            DEFAULT_N_INIT,
        )
        .expect("default schedule is valid")
    }
}

/// `exp(-Δ / (T·α))` with `Δ = (perf_new - perf_worst) / perf_worst`.
/// Values of `perf_new` below `perf_worst` give 1.
pub fn acceptance_probability(
    perf_new: f64,
    perf_worst: f64,
    temperature: f64,
    alpha: f64,
) -> Result<f64, SearchError> {
    if perf_worst.is_nan() || perf_worst <= 0.0 {
        return Err(SearchError::Domain(format!(
            "perf_worst {perf_worst} must be > 0"
        )));
    }
    if temperature.is_nan() || temperature <= 0.0 {
        return Err(SearchError::Domain(format!(
            "temperature {temperature} must be > 0"
        )));
    }
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(SearchError::Domain(format!("alpha {alpha} must be > 0")));
    }
    if perf_new.is_nan() {
        return Err(SearchError::Domain("perf_new is NaN".into()));
    }
    let delta = (perf_new - perf_worst) / perf_worst;
    if delta <= 0.0 {
        return Ok(1.0);
    }
    Ok((-delta / (temperature * alpha)).exp())
}

/// A valid, timed combination.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub combination: Combination,
    pub perf: f64,
}

impl Candidate {
    /// `None` unless `perf` is finite and positive.
    pub fn new(combination: Combination, perf: f64) -> Option<Self> {
        (perf.is_finite() && perf > 0.0).then_some(Self { combination, perf })
    }
}

/// Fixed-capacity pool of the best historical candidates, kept in insertion
/// order. Ties in [`worst`](Self::worst) and [`best`](Self::best) resolve to
/// the earliest inserted entry.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateList {
    capacity: usize,
    entries: Vec<Candidate>,
}

impl CandidateList {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "candidate list capacity must be positive");
        Self {
            capacity,
            entries: Vec::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() == self.capacity
    }

    pub fn entries(&self) -> &[Candidate] {
        &self.entries
    }

    /// Adds a candidate while the list is still filling up.
    pub fn push(&mut self, cand: Candidate) {
        assert!(!self.is_full(), "candidate list is full");
        self.entries.push(cand);
    }

    pub fn worst_index(&self) -> Option<usize> {
        let mut worst: Option<usize> = None;
        for (i, c) in self.entries.iter().enumerate() {
            if worst.is_none_or(|w| c.perf > self.entries[w].perf) {
                worst = Some(i);
            }
        }
        worst
    }

    pub fn best_index(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, c) in self.entries.iter().enumerate() {
            if best.is_none_or(|b| c.perf < self.entries[b].perf) {
                best = Some(i);
            }
        }
        best
    }

    pub fn worst(&self) -> Option<&Candidate> {
        self.worst_index().map(|i| &self.entries[i])
    }

    pub fn best(&self) -> Option<&Candidate> {
        self.best_index().map(|i| &self.entries[i])
    }

    /// Removes the worst entry and appends `cand`; returns the removed entry.
    pub fn replace_worst(&mut self, cand: Candidate) -> Candidate {
        let w = self.worst_index().expect("replace_worst on an empty list");
        let removed = self.entries.remove(w);
        self.entries.push(cand);
        removed
    }
}

/// A mutated combination plus the 1-based index of the group it touched.
#[derive(Debug, Clone, PartialEq)]
pub struct Mutation {
    pub combination: Combination,
    pub group: Option<usize>,
}

/// Picks one group uniformly and flips each of its flags independently when
/// a uniform draw is `<= 0.5`. Flags outside the group are untouched.
pub fn group_aware_mutation(
    comb: &Combination,
    table: &GroupTable,
    rng: &mut impl RandomSource,
) -> Mutation {
    let group = rng.index(table.num_groups());
    let mut out = comb.clone();
    for pos in table.group_range(group) {
        if rng.uniform() <= 0.5 {
            out.flip(pos);
        }
    }
    Mutation {
        combination: out,
        group: Some(table.groups()[group].index),
    }
}

/// How the annealing loop perturbs a base combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MutationKind {
    /// One group per step.
    GroupAware,
    /// Every flag independently.
    Global,
}

impl MutationKind {
    pub fn apply(
        self,
        comb: &Combination,
        table: &GroupTable,
        rng: &mut impl RandomSource,
    ) -> Mutation {
        match self {
            MutationKind::GroupAware => group_aware_mutation(comb, table, rng),
            MutationKind::Global => Mutation {
                combination: crate::baselines::global_sa_step(comb, rng),
                group: None,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub schedule: AnnealingSchedule,
    /// Candidate list capacity and number of initial candidates.
    pub n_init: usize,
    /// Hard cap on evaluations, initialization included.
    pub budget: usize,
}

impl SearchConfig {
    /// Default schedule parameters with `cool_r` derived from the budget.
    pub fn for_budget(budget: usize, n_init: usize) -> Result<Self, SearchError> {
        Self::with_schedule_params(budget, n_init, DEFAULT_T0, DEFAULT_T_MIN, DEFAULT_ALPHA)
    }

    pub fn with_schedule_params(
        budget: usize,
        n_init: usize,
        t0: f64,
        t_min: f64,
        alpha: f64,
    ) -> Result<Self, SearchError> {
        if n_init == 0 {
            return Err(SearchError::Config("n_init must be positive".into()));
        }
        Ok(Self {
            schedule: AnnealingSchedule::for_budget(t0, t_min, alpha, budget, n_init)?,
            n_init,
            budget,
        })
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        self.schedule.validate()?;
        if self.n_init == 0 {
            return Err(SearchError::Config("n_init must be positive".into()));
        }
        if self.budget < self.n_init {
            return Err(SearchError::Config(format!(
                "budget ({}) is smaller than n_init ({})",
                self.budget, self.n_init
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub best: Candidate,
    /// Evaluations spent, initialization included.
    pub evaluations: usize,
    /// Candidate list at termination (RIO leaves it holding only the best).
    pub final_list: CandidateList,
}

/// Shared bookkeeping: evaluates, counts budget, and writes history.
pub(crate) struct Tracker<'a, E, H> {
    pub algorithm: SearcherKind,
    pub table: &'a GroupTable,
    pub evaluator: E,
    pub history: H,
    pub budget: usize,
    pub evaluations: usize,
}

impl<E: Evaluator, H: HistorySink> Tracker<'_, E, H> {
    pub fn remaining(&self) -> usize {
        self.budget - self.evaluations
    }

    pub fn measure(&mut self, comb: &Combination) -> Result<Measurement, SearchError> {
        debug_assert_eq!(comb.len(), self.table.len());
        let m = self.evaluator.evaluate(comb)?;
        Ok(m)
    }

    pub fn record(
        &mut self,
        phase: Phase,
        mutation: &Mutation,
        measurement: Measurement,
        accepted: bool,
        temperature: Option<f64>,
    ) -> Result<(), SearchError> {
        self.history.append(HistoryRecord {
            iteration: self.evaluations,
            phase,
            algorithm: self.algorithm,
            mutated_group: mutation.group,
            combination: mutation.combination.to_bitstring(),
            measurement,
            accepted,
            temperature,
            timestamp_ms: None,
        })?;
        self.evaluations += 1;
        Ok(())
    }
}

/// Fills a candidate list with `n_init` valid mutations of the -O3
/// combination, each mutated independently. Invalid evaluations are logged
/// and retried; each costs one unit of budget.
pub(crate) fn initialize_with<E: Evaluator, H: HistorySink>(
    tracker: &mut Tracker<'_, E, H>,
    mutation: MutationKind,
    n_init: usize,
    rng: &mut impl RandomSource,
) -> Result<CandidateList, SearchError> {
    let seed = tracker.table.default_combination();
    let mut list = CandidateList::new(n_init);
    while !list.is_full() {
        if tracker.remaining() == 0 {
            return Err(SearchError::BudgetExhausted {
                evaluations: tracker.evaluations,
                valid: list.len(),
                needed: n_init,
            });
        }
        let m = mutation.apply(&seed, tracker.table, rng);
        let measurement = tracker.measure(&m.combination)?;
        let cand = measurement
            .candidate_perf()
            .and_then(|p| Candidate::new(m.combination.clone(), p));
        if cand.is_none() {
            log::info!(
                "initial candidate {} invalid ({}), retrying",
                tracker.evaluations,
                measurement.status.as_str()
            );
        }
        let accepted = cand.is_some();
        tracker.record(Phase::Init, &m, measurement, accepted, None)?;
        if let Some(c) = cand {
            list.push(c);
        }
    }
    Ok(list)
}

/// The temperature-scheduled loop shared by group-tuner and global SA.
pub(crate) fn anneal_with<E: Evaluator, H: HistorySink>(
    tracker: &mut Tracker<'_, E, H>,
    mutation: MutationKind,
    config: &SearchConfig,
    rng: &mut impl RandomSource,
) -> Result<SearchOutcome, SearchError> {
    config.validate()?;
    let mut list = initialize_with(tracker, mutation, config.n_init, rng)?;
    let schedule = config.schedule;
    let mut temperature = schedule.t0;
    while temperature > schedule.t_min && tracker.remaining() > 0 {
        let base = &list.entries()[rng.index(list.len())].combination;
        let m = mutation.apply(base, tracker.table, rng);
        let measurement = tracker.measure(&m.combination)?;
        let mut accepted = false;
        if let Some(cand) = measurement
            .candidate_perf()
            .and_then(|p| Candidate::new(m.combination.clone(), p))
        {
            let worst = list.worst().expect("list is full").perf;
            accepted = if cand.perf < worst {
                true
            } else {
                let p = acceptance_probability(cand.perf, worst, temperature, schedule.alpha)?;
                rng.uniform() < p
            };
            if accepted {
                list.replace_worst(cand);
            }
        }
        tracker.record(Phase::Anneal, &m, measurement, accepted, Some(temperature))?;
        temperature *= schedule.cool_r;
    }
    Ok(SearchOutcome {
        best: list.best().expect("list is full").clone(),
        evaluations: tracker.evaluations,
        final_list: list,
    })
}

/// Builds the initial candidate list by group-aware mutation of -O3.
pub fn initialize(
    table: &GroupTable,
    n_init: usize,
    budget: usize,
    evaluator: &mut impl Evaluator,
    rng: &mut impl RandomSource,
    history: &mut impl HistorySink,
) -> Result<CandidateList, SearchError> {
    if n_init == 0 {
        return Err(SearchError::Config("n_init must be positive".into()));
    }
    let mut tracker = Tracker {
        algorithm: SearcherKind::GroupTuner,
        table,
        evaluator,
        history,
        budget,
        evaluations: 0,
    };
    initialize_with(&mut tracker, MutationKind::GroupAware, n_init, rng)
}

/// Runs the group-aware search to schedule termination or budget exhaustion.
pub fn run_search(
    table: &GroupTable,
    config: &SearchConfig,
    evaluator: &mut impl Evaluator,
    rng: &mut impl RandomSource,
    history: &mut impl HistorySink,
) -> Result<SearchOutcome, SearchError> {
    let mut tracker = Tracker {
        algorithm: SearcherKind::GroupTuner,
        table,
        evaluator,
        history,
        budget: config.budget,
        evaluations: 0,
    };
    anneal_with(&mut tracker, MutationKind::GroupAware, config, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::PlantedLandscape;
    use crate::evaluation::{FnEvaluator, Status, SyntheticEvaluator};
    use crate::option_space::{FlagSpec, OptionGroup};
    use crate::reporting::MemoryHistory;
    use crate::rng::{ScriptedRng, SeededRng};
    use proptest::prelude::*;

    fn table(sizes: &[usize]) -> GroupTable {
        let mut n = 0;
        let groups = sizes
            .iter()
            .enumerate()
            .map(|(g, &size)| OptionGroup {
                index: g + 1,
                description: String::new(),
                members: (0..size)
                    .map(|_| {
                        n += 1;
                        FlagSpec::new(format!("f{n}"), n % 2 == 0)
                    })
                    .collect(),
            })
            .collect();
        GroupTable::new("t", groups).unwrap()
    }

    fn cand(perf: f64) -> Candidate {
        Candidate::new(Combination::from_states(vec![]), perf).unwrap()
    }

    fn perfs(list: &CandidateList) -> Vec<f64> {
        list.entries().iter().map(|c| c.perf).collect()
    }

    #[test]
    fn forced_flip_of_single_group() {
        let t = table(&[2]);
        let comb = Combination::from_states(vec![true, true]);
        // One group: no draw for selection; two flip draws at 0.0.
        let mut rng = ScriptedRng::new([0.0, 0.0]);
        let m = group_aware_mutation(&comb, &t, &mut rng);
        assert_eq!(m.combination.states(), &[false, false]);
        assert_eq!(m.group, Some(1));
        assert_eq!(rng.remaining(), 0);
    }

    #[test]
    fn flip_threshold_is_inclusive() {
        let t = table(&[2]);
        let comb = Combination::from_states(vec![true, true]);
        let mut rng = ScriptedRng::new([0.5, 0.5000001]);
        let m = group_aware_mutation(&comb, &t, &mut rng);
        assert_eq!(m.combination.states(), &[false, true]);
    }

    #[test]
    fn acceptance_examples() {
        assert_eq!(acceptance_probability(1.0, 1.0, 0.3, 2.0).unwrap(), 1.0);
        let p = acceptance_probability(1.05, 1.0, 1.0, 1.0).unwrap();
        assert!((p - 0.951229424500714).abs() < 1e-12);
        let p = acceptance_probability(2.0, 1.0, 0.01, 1.0).unwrap();
        assert!((p / 3.720075976020836e-44 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn acceptance_domain_errors() {
        assert!(acceptance_probability(1.0, 0.0, 1.0, 1.0).is_err());
        assert!(acceptance_probability(1.0, 1.0, 0.0, 1.0).is_err());
        assert!(acceptance_probability(1.0, 1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn schedule_one_iteration() {
        let s = AnnealingSchedule::new(1.0, 0.5, 0.5, 1.0).unwrap();
        assert_eq!(s.iterations(), 1);
    }

    #[test]
    fn schedule_validation() {
        assert!(AnnealingSchedule::new(1.0, 1.0, 0.5, 1.0).is_err());
        assert!(AnnealingSchedule::new(1.0, 0.1, 1.0, 1.0).is_err());
        assert!(AnnealingSchedule::new(1.0, 0.1, 0.5, 0.0).is_err());
        assert!(AnnealingSchedule::new(1.0, -0.1, 0.5, 1.0).is_err());
        assert!(SearchConfig::for_budget(5, 10).is_err());
        assert!(SearchConfig::for_budget(10, 10).is_err());
    }

    #[test]
    fn derived_schedule_hits_step_count() {
        for steps in [1, 2, 7, 40, 190, 490, 990, 5000] {
            for (t0, tmin) in [(1.0, 0.001), (5.0, 0.01), (1.0, 0.5), (100.0, 1e-9)] {
                let s = AnnealingSchedule::for_steps(t0, tmin, 1.0, steps).unwrap();
                assert_eq!(s.iterations(), steps, "t0={t0} tmin={tmin} steps={steps}");
            }
        }
        assert_eq!(AnnealingSchedule::default().iterations(), 490);
    }

    #[test]
    fn replace_worst_examples() {
        let mut list = CandidateList::new(3);
        for p in [3.0, 2.0, 1.0] {
            list.push(cand(p));
        }
        list.replace_worst(cand(2.5));
        let mut got = perfs(&list);
        got.sort_by(f64::total_cmp);
        assert_eq!(got, vec![1.0, 2.0, 2.5]);

        let mut list = CandidateList::new(3);
        for (i, p) in [1.0, 1.0, 1.0].into_iter().enumerate() {
            let mut c = cand(p);
            c.combination = Combination::from_states(vec![i == 0, i == 1, i == 2]);
            list.push(c);
        }
        let removed = list.replace_worst(cand(5.0));
        assert_eq!(removed.combination.states(), &[true, false, false]);
        assert_eq!(perfs(&list), vec![1.0, 1.0, 5.0]);
        assert_eq!(list.best_index(), Some(0));
        assert_eq!(list.worst_index(), Some(2));
    }

    #[test]
    fn candidate_rejects_bad_perf() {
        let c = Combination::from_states(vec![]);
        assert!(Candidate::new(c.clone(), 0.0).is_none());
        assert!(Candidate::new(c.clone(), f64::NAN).is_none());
        assert!(Candidate::new(c, f64::INFINITY).is_none());
    }

    #[test]
    fn initialize_fills_list() {
        let t = table(&[3, 4, 5]);
        let mut eval = FnEvaluator(|c: &Combination| {
            Measurement::valid(vec![1.0 + c.enabled_count() as f64], None)
        });
        let mut hist = MemoryHistory::new();
        let list = initialize(&t, 10, 500, &mut eval, &mut SeededRng::new(1), &mut hist).unwrap();
        assert_eq!(list.len(), 10);
        assert_eq!(hist.records.len(), 10);
        for c in list.entries() {
            assert_eq!(c.perf, 1.0 + c.combination.enabled_count() as f64);
            // every initial candidate differs from -O3 in at most one group
            let diff = c.combination.diff_positions(&t.default_combination());
            let groups: std::collections::HashSet<_> =
                diff.iter().map(|&p| t.group_of(p)).collect();
            assert!(groups.len() <= 1);
        }
    }

    #[test]
    fn initialize_single_entry() {
        let t = table(&[3]);
        let mut eval = FnEvaluator(|c: &Combination| {
            Measurement::valid(vec![2.0 + c.enabled_count() as f64], None)
        });
        let mut hist = MemoryHistory::new();
        let list = initialize(&t, 1, 5, &mut eval, &mut SeededRng::new(4), &mut hist).unwrap();
        assert_eq!(list.len(), 1);
        let c = &list.entries()[0];
        assert_eq!(c.perf, 2.0 + c.combination.enabled_count() as f64);
    }

    #[test]
    fn initialize_exhausts_budget_on_rejecting_oracle() {
        let t = table(&[3]);
        let mut eval =
            FnEvaluator(|_: &Combination| Measurement::invalid(Status::CompileError, vec![], None));
        let mut hist = MemoryHistory::new();
        let err = initialize(&t, 10, 25, &mut eval, &mut SeededRng::new(1), &mut hist).unwrap_err();
        assert!(matches!(
            err,
            SearchError::BudgetExhausted {
                evaluations: 25,
                valid: 0,
                needed: 10
            }
        ));
        assert_eq!(hist.records.len(), 25);
    }

    #[test]
    fn one_loop_iteration_after_init() {
        let t = table(&[3, 3]);
        let config = SearchConfig {
            schedule: AnnealingSchedule::new(1.0, 0.5, 0.5, 1.0).unwrap(),
            n_init: 4,
            budget: 100,
        };
        let mut eval = FnEvaluator(|c: &Combination| {
            Measurement::valid(vec![1.0 + c.enabled_count() as f64], None)
        });
        let mut hist = MemoryHistory::new();
        let out = run_search(&t, &config, &mut eval, &mut SeededRng::new(2), &mut hist).unwrap();
        assert_eq!(out.evaluations, 5);
        assert_eq!(
            hist.records
                .iter()
                .filter(|r| r.phase == Phase::Anneal)
                .count(),
            1
        );
    }

    #[test]
    fn invalid_steps_cost_budget_and_cooling() {
        let t = table(&[4, 4]);
        let config = SearchConfig::for_budget(60, 10).unwrap();
        let mut n = 0usize;
        let mut eval = FnEvaluator(move |c: &Combination| {
            n += 1;
            if n > 10 && n.is_multiple_of(4) {
                Measurement::invalid(Status::RuntimeError, vec![], None)
            } else {
                Measurement::valid(vec![1.0 + c.enabled_count() as f64], None)
            }
        });
        let mut hist = MemoryHistory::new();
        let out = run_search(&t, &config, &mut eval, &mut SeededRng::new(3), &mut hist).unwrap();
        assert_eq!(out.evaluations, 60);
        let temps: Vec<f64> = hist.records.iter().filter_map(|r| r.temperature).collect();
        assert_eq!(temps.len(), 50);
        for (k, w) in temps.windows(2).enumerate() {
            assert!(w[1] < w[0], "step {k}");
            assert_eq!(w[1], w[0] * config.schedule.cool_r);
        }
        for r in &hist.records {
            if !r.measurement.is_valid() {
                assert!(!r.accepted);
            }
        }
    }

    #[test]
    fn full_budget_consumed_and_reproducible() {
        let (t, land) = PlantedLandscape::default().generate(8).unwrap();
        let config = SearchConfig::for_budget(500, 10).unwrap();
        let run = |seed| {
            let mut eval = SyntheticEvaluator::new(&land, &t, seed).unwrap();
            let mut hist = MemoryHistory::new();
            let out =
                run_search(&t, &config, &mut eval, &mut SeededRng::new(seed), &mut hist).unwrap();
            (out.best, hist.records)
        };
        let (best_a, hist_a) = run(5);
        let (best_b, hist_b) = run(5);
        assert_eq!(hist_a.len(), 500);
        assert_eq!(best_a, best_b);
        assert_eq!(hist_a, hist_b);
    }

    #[test]
    fn best_is_monotone() {
        let (t, land) = PlantedLandscape::default().generate(2).unwrap();
        let config = SearchConfig::for_budget(300, 10).unwrap();
        let mut eval = SyntheticEvaluator::new(&land, &t, 0).unwrap();
        let mut hist = MemoryHistory::new();
        run_search(&t, &config, &mut eval, &mut SeededRng::new(0), &mut hist).unwrap();
        // Replay the list operations from the history and check best().
        let mut list = CandidateList::new(10);
        let mut last_best = f64::INFINITY;
        for r in &hist.records {
            let Some(p) = r.measurement.candidate_perf() else {
                continue;
            };
            let c =
                Candidate::new(Combination::from_bitstring(&r.combination).unwrap(), p).unwrap();
            match r.phase {
                Phase::Init => list.push(c),
                _ if r.accepted => {
                    list.replace_worst(c);
                }
                _ => {}
            }
            if list.is_full() {
                let b = list.best().unwrap().perf;
                assert!(b <= last_best);
                last_best = b;
            }
        }
    }

    proptest! {
        #[test]
        fn mutation_is_group_local(
            sizes in proptest::collection::vec(1usize..12, 1..8),
            seed in any::<u64>(),
        ) {
            let t = table(&sizes);
            let mut rng = SeededRng::new(seed);
            let base = Combination::from_states((0..t.len()).map(|_| rng.uniform() < 0.5).collect());
            let m = group_aware_mutation(&base, &t, &mut rng);
            let g = m.group.unwrap() - 1;
            for pos in base.diff_positions(&m.combination) {
                prop_assert_eq!(t.group_of(pos), g);
            }
        }

        #[test]
        fn acceptance_monotonicity(
            worst in 0.1f64..10.0,
            d1 in 0.0f64..2.0,
            d2 in 0.0f64..2.0,
            t1 in 0.001f64..1.0,
            t2 in 0.001f64..1.0,
            alpha in 0.01f64..10.0,
        ) {
            let (dlo, dhi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            let (tlo, thi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let p = |d: f64, t: f64, a: f64| acceptance_probability(worst * (1.0 + d), worst, t, a).unwrap();
            prop_assert!(p(dlo, t1, alpha) >= p(dhi, t1, alpha));
            prop_assert!(p(d1, tlo, alpha) <= p(d1, thi, alpha));
            prop_assert!(p(d1, t1, alpha) <= p(d1, t1, alpha * 2.0));
            prop_assert!((0.0..=1.0).contains(&p(d1, t1, alpha)));
        }

        #[test]
        fn replace_worst_matches_brute_force(
            cap in 1usize..8,
            perfs in proptest::collection::vec(1u8..5, 1..40),
        ) {
            // Oracle: (insertion id, perf); worst is the max perf with the lowest id.
            let mut oracle: Vec<(usize, f64)> = Vec::new();
            let mut list = CandidateList::new(cap);
            for (id, p) in perfs.into_iter().enumerate() {
                let p = p as f64;
                let c = Candidate::new(Combination::from_states((0..8).map(|i| id >> i & 1 == 1).collect()), p).unwrap();
                if oracle.len() < cap {
                    oracle.push((id, p));
                    list.push(c);
                    continue;
                }
                let max = oracle.iter().map(|e| e.1).fold(f64::MIN, f64::max);
                let w = oracle.iter().filter(|e| e.1 == max).map(|e| e.0).min().unwrap();
                oracle.retain(|e| e.0 != w);
                oracle.push((id, p));
                list.replace_worst(c);
                let ids: Vec<usize> = list
                    .entries()
                    .iter()
                    .map(|c| c.combination.states().iter().enumerate().map(|(i, &b)| (b as usize) << i).sum())
                    .collect();
                let want: Vec<usize> = oracle.iter().map(|e| e.0).collect();
                prop_assert_eq!(ids, want);
            }
        }

        #[test]
        fn temperatures_are_geometric(steps in 1usize..2000, t0 in 0.1f64..10.0) {
            let s = AnnealingSchedule::for_steps(t0, t0 / 1000.0, 1.0, steps).unwrap();
            let temps: Vec<f64> = s.temperatures().collect();
            prop_assert_eq!(temps.len(), steps);
            for (k, t) in temps.iter().enumerate() {
                let want = t0 * s.cool_r.powi(k as i32);
                prop_assert!(((t - want) / want).abs() < 1e-12);
                if k > 0 {
                    prop_assert!(*t < temps[k - 1]);
                }
            }
        }

        #[test]
        fn list_size_is_constant(perfs in proptest::collection::vec(0.1f64..10.0, 5..60)) {
            let mut list = CandidateList::new(5);
            for (i, p) in perfs.into_iter().enumerate() {
                if i < 5 { list.push(cand(p)); } else { list.replace_worst(cand(p)); }
                prop_assert!(list.len() <= 5);
            }
            prop_assert_eq!(list.len(), 5);
        }
    }
}
