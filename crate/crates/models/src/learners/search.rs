//! Seeded random hyperparameter search for GBRT.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gbrt::GbrtParams;
use super::tree::TreeParams;
use crate::error::{ModelError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl HyperParams {
    pub fn gbrt(&self) -> GbrtParams {
        GbrtParams {
            n_trees: self.n_trees,
            learning_rate: self.learning_rate,
            tree: TreeParams {
                max_depth: self.max_depth,
                min_samples_leaf: self.min_samples_leaf,
                ..TreeParams::default()
            },
        }
    }
}

/// Inclusive bounds; the learning rate is sampled on a log scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub n_trees: (usize, usize),
    pub learning_rate: (f64, f64),
    pub max_depth: (usize, usize),
    pub min_samples_leaf: (usize, usize),
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            n_trees: (10, 500),
            learning_rate: (0.01, 0.3),
            max_depth: (2, 8),
            min_samples_leaf: (1, 50),
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        let ok = self.n_trees.0 <= self.n_trees.1
            && self.max_depth.0 <= self.max_depth.1
            && self.min_samples_leaf.0 <= self.min_samples_leaf.1
            && self.min_samples_leaf.0 >= 1
            && self.learning_rate.0 > 0.0
            && self.learning_rate.0 <= self.learning_rate.1
            && self.learning_rate.1 <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(ModelError::usage(format!("invalid search space {self:?}")))
        }
    }

    pub fn contains(&self, p: &HyperParams) -> bool {
        (self.n_trees.0..=self.n_trees.1).contains(&p.n_trees)
            && (self.max_depth.0..=self.max_depth.1).contains(&p.max_depth)
            && (self.min_samples_leaf.0..=self.min_samples_leaf.1).contains(&p.min_samples_leaf)
            && p.learning_rate >= self.learning_rate.0
            && p.learning_rate <= self.learning_rate.1
    }
}

/// Proposes the next trial. Random sampling is the default; a surrogate
/// model can implement this too.
pub trait Sampler {
    fn propose(&mut self, space: &SearchSpace, history: &[Trial]) -> HyperParams;
}

pub struct RandomSampler {
    rng: ChaCha8Rng,
}

impl RandomSampler {
    pub fn new(seed: u64) -> Self {
        RandomSampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Sampler for RandomSampler {
    fn propose(&mut self, space: &SearchSpace, _history: &[Trial]) -> HyperParams {
        let (lo, hi) = (space.learning_rate.0.ln(), space.learning_rate.1.ln());
        let lr = if hi > lo { self.rng.random_range(lo..=hi).exp() } else { space.learning_rate.0 };
        HyperParams {
            n_trees: self.rng.random_range(space.n_trees.0..=space.n_trees.1),
            // exp(ln(x)) can land an ulp outside the bounds.
            learning_rate: lr.clamp(space.learning_rate.0, space.learning_rate.1),
            max_depth: self.rng.random_range(space.max_depth.0..=space.max_depth.1),
            min_samples_leaf: self.rng.random_range(space.min_samples_leaf.0..=space.min_samples_leaf.1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub params: HyperParams,
    /// Validation MAE; `None` when the trial failed.
    pub score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: Trial,
    pub trials: Vec<Trial>,
}

pub fn search(
    space: &SearchSpace,
    objective: &mut dyn FnMut(&HyperParams) -> Result<f64>,
    budget: usize,
    seed: u64,
) -> Result<SearchResult> {
    search_with(space, &mut RandomSampler::new(seed), objective, budget)
}

/// Runs `budget` trials. A failing or non-finite objective marks the trial
/// failed and the search goes on; the best trial is the first one with the
/// lowest score.
pub fn search_with(
    space: &SearchSpace,
    sampler: &mut dyn Sampler,
    objective: &mut dyn FnMut(&HyperParams) -> Result<f64>,
    budget: usize,
) -> Result<SearchResult> {
    space.validate()?;
    if budget == 0 {
        return Err(ModelError::usage("search budget must be at least 1"));
    }
    let mut trials: Vec<Trial> = Vec::with_capacity(budget);
    for index in 0..budget {
        let params = sampler.propose(space, &trials);
        let (score, error) = match objective(&params) {
            Ok(s) if s.is_finite() => (Some(s), None),
            Ok(s) => (None, Some(format!("objective returned {s}"))),
            Err(e) => (None, Some(e.to_string())),
        };
        tracing::debug!(index, ?params, ?score, "search trial");
        trials.push(Trial {
            index,
            params,
            score,
            error,
        });
    }
    let best = trials
        .iter()
        .filter(|t| t.score.is_some())
        .fold(None::<&Trial>, |best, t| match best {
            Some(b) if b.score <= t.score => Some(b),
            _ => Some(t),
        })
        .cloned()
        .ok_or_else(|| ModelError::usage(format!("all {budget} search trials failed")))?;
    Ok(SearchResult { best, trials })
}
