//! Group-aware compiler flag tuning.
//!
//! The flag space is partitioned into functionally related groups. The
//! searcher mutates one group at a time and anneals over a short list of
//! the best combinations seen so far. Random sampling and whole-space
//! annealing are included for comparison.

pub mod baselines;
pub mod evaluation;
pub mod option_space;
pub mod reporting;
pub mod rng;
pub mod search;

pub use baselines::{run_global_sa, run_rio, run_searcher, SearcherKind};
pub use evaluation::{Evaluator, Measurement, ReferenceResult, Status};
pub use option_space::{sha256_hex, Combination, GroupTable};
pub use rng::{RandomSource, SeededRng};
pub use search::{run_search, AnnealingSchedule, SearchConfig, SearchError, SearchOutcome};
