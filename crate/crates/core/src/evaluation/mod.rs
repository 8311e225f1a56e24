//! Turning combinations into measurements.

mod compiler;
mod synthetic;

pub use compiler::{BenchmarkSpec, CompilerEvaluator, CompilerOptions, DEFAULT_REPETITIONS};
pub use synthetic::{
    LandscapeError, PlantedLandscape, Synergy, SyntheticEvaluator, SyntheticLandscape,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::option_space::Combination;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Valid,
    CompileError,
    RuntimeError,
    Timeout,
    OutputMismatch,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Valid => "valid",
            Status::CompileError => "compile-error",
            Status::RuntimeError => "runtime-error",
            Status::Timeout => "timeout",
            Status::OutputMismatch => "output-mismatch",
        }
    }
}

/// Outcome of evaluating one combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub status: Status,
    /// Mean run time in seconds; present iff `status` is valid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perf: Option<f64>,
    /// Per-run times in seconds.
    #[serde(default)]
    pub runs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_digest: Option<String>,
}

impl Measurement {
    /// A valid measurement whose perf is the arithmetic mean of `runs`.
    pub fn valid(runs: Vec<f64>, output_digest: Option<String>) -> Self {
        let perf = mean(&runs);
        Self {
            status: Status::Valid,
            perf: Some(perf),
            runs,
            output_digest,
        }
    }

    pub fn invalid(status: Status, runs: Vec<f64>, output_digest: Option<String>) -> Self {
        debug_assert_ne!(status, Status::Valid);
        Self {
            status,
            perf: None,
            runs,
            output_digest,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.status == Status::Valid
    }

    /// The perf of a valid measurement usable as a candidate (finite, > 0).
    pub fn candidate_perf(&self) -> Option<f64> {
        self.perf
            .filter(|p| self.is_valid() && p.is_finite() && *p > 0.0)
    }
}

/// Baseline against which improvements are reported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceResult {
    /// Digest of the -O3 program outputs; absent for synthetic sessions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_digest: Option<String>,
    /// Mean -O3 execution time in seconds.
    pub perf_o3: f64,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("compiler {0:?} not found")]
    CompilerMissing(String),
    #[error("reference -O3 build failed: {0}")]
    ReferenceFailed(String),
    #[error("evaluator used before the reference was established")]
    NoReference,
    #[error("i/o error during evaluation: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Landscape(#[from] LandscapeError),
}

/// Anything that can score a combination. Implementations are used by one
/// session at a time; calls are strictly sequential.
pub trait Evaluator {
    fn evaluate(&mut self, comb: &Combination) -> Result<Measurement, EvalError>;
}

impl<E: Evaluator + ?Sized> Evaluator for &mut E {
    fn evaluate(&mut self, comb: &Combination) -> Result<Measurement, EvalError> {
        (**self).evaluate(comb)
    }
}

impl<E: Evaluator + ?Sized> Evaluator for Box<E> {
    fn evaluate(&mut self, comb: &Combination) -> Result<Measurement, EvalError> {
        (**self).evaluate(comb)
    }
}

/// Evaluator backed by a closure; handy for scripted oracles in tests.
pub struct FnEvaluator<F>(pub F);

impl<F> Evaluator for FnEvaluator<F>
where
    F: FnMut(&Combination) -> Measurement,
{
    fn evaluate(&mut self, comb: &Combination) -> Result<Measurement, EvalError> {
        Ok((self.0)(comb))
    }
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}
