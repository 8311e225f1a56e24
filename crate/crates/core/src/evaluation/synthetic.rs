//! Deterministic synthetic performance landscapes.
//!
//! A landscape models a program's run time as a base time minus additive
//! per-flag effects minus bonuses for planted flag interactions. Flags with
//! zero weight that belong to no synergy are redundant: toggling them never
//! changes the result.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{EvalError, Evaluator, Measurement};
use crate::option_space::{Combination, FlagSpec, GroupTable, OptionGroup};
use crate::rng::{RandomSource, SeededRng};

const NOISE_STREAM: u64 = 0x006e_6f69_7365;

fn default_floor() -> f64 {
    1e-6
}

#[derive(Debug, Error)]
pub enum LandscapeError {
    #[error("landscape references unknown flag {0:?}")]
    UnknownFlag(String),
    #[error("synergy flag {flag:?} is in group {actual}, not group {declared}")]
    WrongGroup {
        flag: String,
        declared: usize,
        actual: usize,
    },
    #[error("combination has {found} flags, landscape table has {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("invalid landscape: {0}")]
    Invalid(String),
    #[error("failed to parse landscape: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("failed to read landscape: {0}")]
    Io(#[from] std::io::Error),
}

/// A planted interaction: when every flag in `pattern` has the required
/// state, `bonus` pseudo-seconds are subtracted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Synergy {
    /// 1-based index of the group holding all pattern flags.
    pub group: usize,
    pub pattern: BTreeMap<String, bool>,
    pub bonus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticLandscape {
    pub base: f64,
    /// Pseudo-seconds saved when the flag is enabled. Missing flags weigh 0.
    #[serde(default)]
    pub weights: BTreeMap<String, f64>,
    #[serde(default)]
    pub synergies: Vec<Synergy>,
    #[serde(default)]
    pub noise_amplitude: f64,
    /// Lower clamp for the result.
    #[serde(default = "default_floor")]
    pub floor: f64,
}

impl SyntheticLandscape {
    pub fn constant(base: f64) -> Self {
        Self {
            base,
            weights: BTreeMap::new(),
            synergies: Vec::new(),
            noise_amplitude: 0.0,
            floor: default_floor(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, LandscapeError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: &Path) -> Result<Self, LandscapeError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("landscape serializes")
    }

    /// Checks the landscape against `table` and indexes it by flag position.
    pub fn resolve(&self, table: &GroupTable) -> Result<ResolvedLandscape, LandscapeError> {
        if !(self.base.is_finite() && self.floor > 0.0 && self.noise_amplitude >= 0.0) {
            return Err(LandscapeError::Invalid(
                "base must be finite, floor > 0, noise_amplitude >= 0".into(),
            ));
        }
        let mut weights = vec![0.0; table.len()];
        for (name, &w) in &self.weights {
            let pos = table
                .position(name)
                .ok_or_else(|| LandscapeError::UnknownFlag(name.clone()))?;
            weights[pos] = w;
        }
        let mut synergies = Vec::with_capacity(self.synergies.len());
        for syn in &self.synergies {
            let mut pattern = Vec::with_capacity(syn.pattern.len());
            for (name, &state) in &syn.pattern {
                let pos = table
                    .position(name)
                    .ok_or_else(|| LandscapeError::UnknownFlag(name.clone()))?;
                let actual = table.group_of(pos) + 1;
                if actual != syn.group {
                    return Err(LandscapeError::WrongGroup {
                        flag: name.clone(),
                        declared: syn.group,
                        actual,
                    });
                }
                pattern.push((pos, state));
            }
            synergies.push((pattern, syn.bonus));
        }
        Ok(ResolvedLandscape {
            base: self.base,
            weights,
            synergies,
            noise_amplitude: self.noise_amplitude,
            floor: self.floor,
        })
    }
}

/// A landscape bound to a table's flag positions.
#[derive(Debug, Clone)]
pub struct ResolvedLandscape {
    base: f64,
    weights: Vec<f64>,
    synergies: Vec<(Vec<(usize, bool)>, f64)>,
    noise_amplitude: f64,
    floor: f64,
}

impl ResolvedLandscape {
    /// Noise-free value of the landscape (before clamping).
    pub fn raw(&self, comb: &Combination) -> f64 {
        let mut perf = self.base;
        for (w, &on) in self.weights.iter().zip(comb.states()) {
            if on {
                perf -= w;
            }
        }
        for (pattern, bonus) in &self.synergies {
            if pattern.iter().all(|&(pos, state)| comb.get(pos) == state) {
                perf -= bonus;
            }
        }
        perf
    }

    /// Scores `comb`. `rng` is only drawn from when noise is enabled.
    pub fn evaluate(
        &self,
        comb: &Combination,
        rng: &mut impl RandomSource,
    ) -> Result<Measurement, LandscapeError> {
        if comb.len() != self.weights.len() {
            return Err(LandscapeError::LengthMismatch {
                expected: self.weights.len(),
                found: comb.len(),
            });
        }
        let mut perf = self.raw(comb);
        if self.noise_amplitude > 0.0 {
            perf += self.noise_amplitude * (2.0 * rng.uniform() - 1.0);
        }
        Ok(Measurement::valid(vec![perf.max(self.floor)], None))
    }
}

/// Evaluator over a synthetic landscape. Noise, if any, comes from its own
/// random stream so it never perturbs the searcher's draws.
#[derive(Debug, Clone)]
pub struct SyntheticEvaluator {
    landscape: ResolvedLandscape,
    rng: SeededRng,
}

impl SyntheticEvaluator {
    pub fn new(
        landscape: &SyntheticLandscape,
        table: &GroupTable,
        seed: u64,
    ) -> Result<Self, LandscapeError> {
        Ok(Self {
            landscape: landscape.resolve(table)?,
            rng: SeededRng::new(seed).fork(NOISE_STREAM),
        })
    }

    pub fn landscape(&self) -> &ResolvedLandscape {
        &self.landscape
    }

    /// Noise-free perf of `comb`, used as the -O3 reference.
    pub fn noiseless(&self, comb: &Combination) -> f64 {
        self.landscape.raw(comb).max(self.landscape.floor)
    }
}

impl Evaluator for SyntheticEvaluator {
    fn evaluate(&mut self, comb: &Combination) -> Result<Measurement, EvalError> {
        Ok(self.landscape.evaluate(comb, &mut self.rng)?)
    }
}

/// Generator for landscapes with planted intra-group synergies and
/// redundant flags, together with a matching table.
#[derive(Debug, Clone)]
pub struct PlantedLandscape {
    pub groups: usize,
    pub flags_per_group: usize,
    pub synergies: usize,
    /// Flags per synergy pattern.
    pub synergy_size: usize,
    pub synergy_bonus: f64,
    /// Number of flags with zero weight and no synergy membership.
    pub redundant: usize,
    /// Per-flag weights are drawn uniformly from ±[min, max].
    pub weight_range: (f64, f64),
    pub base: f64,
    pub noise_amplitude: f64,
}

impl Default for PlantedLandscape {
    fn default() -> Self {
        Self {
            groups: 6,
            flags_per_group: 10,
            synergies: 3,
            synergy_size: 5,
            synergy_bonus: 2.0,
            redundant: 20,
            weight_range: (0.02, 0.12),
            base: 20.0,
            noise_amplitude: 0.0,
        }
    }
}

impl PlantedLandscape {
    pub fn generate(&self, seed: u64) -> Result<(GroupTable, SyntheticLandscape), LandscapeError> {
        let total = self.groups * self.flags_per_group;
        if self.synergies > self.groups || self.synergy_size > self.flags_per_group {
            return Err(LandscapeError::Invalid(
                "synergies must fit in distinct groups".into(),
            ));
        }
        if self.redundant + self.synergies * self.synergy_size > total {
            return Err(LandscapeError::Invalid("too many redundant flags".into()));
        }
        let mut rng = SeededRng::new(seed);
        let name = |g: usize, i: usize| format!("g{}-f{}", g + 1, i + 1);

        let groups: Vec<OptionGroup> = (0..self.groups)
            .map(|g| OptionGroup {
                index: g + 1,
                description: format!("synthetic group {}", g + 1),
                members: (0..self.flags_per_group)
                    .map(|i| FlagSpec::new(name(g, i), rng.uniform() < 0.5))
                    .collect(),
            })
            .collect();
        let table = GroupTable::new(format!("synthetic-{seed}"), groups)?;

        // Synergy patterns occupy the first `synergy_size` slots of a
        // shuffled member order in distinct, randomly chosen groups.
        let mut group_order: Vec<usize> = (0..self.groups).collect();
        shuffle(&mut group_order, &mut rng);
        let mut in_synergy = vec![false; total];
        let mut synergies = Vec::new();
        for &g in group_order.iter().take(self.synergies) {
            let mut members: Vec<usize> = table.group_range(g).collect();
            shuffle(&mut members, &mut rng);
            let mut pattern = BTreeMap::new();
            for &pos in members.iter().take(self.synergy_size) {
                in_synergy[pos] = true;
                pattern.insert(table.flags()[pos].name.clone(), rng.uniform() < 0.5);
            }
            synergies.push(Synergy {
                group: g + 1,
                pattern,
                bonus: self.synergy_bonus,
            });
        }

        let mut free: Vec<usize> = (0..total).filter(|&p| !in_synergy[p]).collect();
        shuffle(&mut free, &mut rng);
        let redundant: Vec<usize> = free[..self.redundant].to_vec();
        let (lo, hi) = self.weight_range;
        let mut weights = BTreeMap::new();
        for pos in 0..total {
            let w = if redundant.contains(&pos) {
                0.0
            } else {
                let magnitude = lo + (hi - lo) * rng.uniform();
                if rng.uniform() < 0.5 {
                    magnitude
                } else {
                    -magnitude
                }
            };
            weights.insert(table.flags()[pos].name.clone(), w);
        }

        let landscape = SyntheticLandscape {
            base: self.base,
            weights,
            synergies,
            noise_amplitude: self.noise_amplitude,
            floor: default_floor(),
        };
        Ok((table, landscape))
    }
}

impl From<crate::option_space::GroupTableError> for LandscapeError {
    fn from(e: crate::option_space::GroupTableError) -> Self {
        LandscapeError::Invalid(e.to_string())
    }
}

fn shuffle<T>(items: &mut [T], rng: &mut impl RandomSource) {
    for i in (1..items.len()).rev() {
        let j = rng.index(i + 1);
        items.swap(i, j);
    }
}
