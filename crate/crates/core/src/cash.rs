//! Combined algorithm selection and hyperparameter search: exhaustive grid
//! search scored by k-fold cross-validation on a buffered stream prefix.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::learners::{algorithm_info, build_learner, train_batch, Learner, ParamValue, Params};
use crate::par::{self, Execution};
use crate::types::{FeatureSchema, Instance};
use crate::{sub_seed, Error, Result};

/// One algorithm and the values to try for each of its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceEntry {
    pub algorithm: String,
    #[serde(default)]
    pub grid: BTreeMap<String, Vec<ParamValue>>,
}

impl SpaceEntry {
    pub fn new(algorithm: &str) -> Self {
        SpaceEntry {
            algorithm: algorithm.to_string(),
            grid: BTreeMap::new(),
        }
    }

    pub fn with<V: Into<ParamValue>>(mut self, name: &str, values: impl IntoIterator<Item = V>) -> Self {
        self.grid
            .insert(name.to_string(), values.into_iter().map(Into::into).collect());
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConfigSpace {
    pub entries: Vec<SpaceEntry>,
}

impl ConfigSpace {
    pub fn new(entries: Vec<SpaceEntry>) -> Self {
        ConfigSpace { entries }
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::Empty("config space"));
        }
        for e in &self.entries {
            let info = algorithm_info(&e.algorithm)
                .ok_or_else(|| Error::UnknownAlgorithm(e.algorithm.clone()))?;
            for (name, values) in &e.grid {
                if !info.params.iter().any(|p| p.name == name) {
                    return Err(Error::param(
                        name.clone(),
                        format!("not a parameter of {}", e.algorithm),
                    ));
                }
                if values.is_empty() {
                    return Err(Error::param(name.clone(), "grid must not be empty"));
                }
            }
        }
        Ok(())
    }
}

/// A point of the search space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub algorithm: String,
    pub params: Params,
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.params.is_empty() {
            write!(f, "{}", self.algorithm)
        } else {
            write!(f, "{}({})", self.algorithm, self.params)
        }
    }
}

/// Cartesian product of each entry's grid, entries in declaration order and
/// parameters varying fastest in reverse name order.
pub fn grid_expand(space: &ConfigSpace) -> Result<Vec<Configuration>> {
    space.validate()?;
    let mut out = Vec::new();
    for e in &space.entries {
        let mut partial = vec![Params::default()];
        for (name, values) in &e.grid {
            partial = partial
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |v| {
                        let mut p = p.clone();
                        p.insert(name, v.clone());
                        p
                    })
                })
                .collect();
        }
        out.extend(partial.into_iter().map(|params| Configuration {
            algorithm: e.algorithm.clone(),
            params,
        }));
    }
    Ok(out)
}

/// Grid roughly mirroring the registered batch and online algorithms with
/// two to four values per knob.
pub fn default_space() -> ConfigSpace {
    ConfigSpace::new(vec![
        SpaceEntry::new("naive_bayes"),
        SpaceEntry::new("cart_batch")
            .with("max_depth", [5_i64, 10, 20])
            .with("min_samples_leaf", [1_i64, 5]),
        SpaceEntry::new("random_forest_batch")
            .with("n_trees", [10_i64, 20])
            .with("max_depth", [10_i64, 20]),
        SpaceEntry::new("knn_batch").with("k", [1_i64, 5, 15]),
        SpaceEntry::new("linear_svm_batch")
            .with("lr", [0.01, 0.1])
            .with("alpha", [1e-4, 1e-3]),
        SpaceEntry::new("hoeffding_tree")
            .with("grace", [50_i64, 200])
            .with("leaf_prediction", ["mc", "nba"]),
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CashConfig {
    pub folds: usize,
    /// Maximum number of configurations evaluated.
    pub budget: Option<usize>,
    /// Shuffle the buffer before cutting folds (temporal order otherwise).
    pub shuffle: bool,
    /// Replays of the training split for incremental algorithms.
    pub epochs: usize,
    pub seed: u64,
    #[serde(skip)]
    pub exec: Execution,
}

impl Default for CashConfig {
    fn default() -> Self {
        CashConfig {
            folds: 5,
            budget: None,
            shuffle: false,
            epochs: 1,
            seed: 0,
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub config: Configuration,
    /// Mean of `fold_losses`.
    pub loss: f64,
    pub fold_losses: Vec<f64>,
}

/// Serializable outcome of a search (everything except the model).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CashReport {
    pub best: Configuration,
    pub best_loss: f64,
    pub folds: usize,
    /// The budget stopped the search before the grid was exhausted.
    pub truncated: bool,
    pub grid_size: usize,
    pub leaderboard: Vec<LeaderboardEntry>,
}

pub struct CashResult {
    pub report: CashReport,
    /// Winner retrained on the whole buffer and frozen.
    pub model: Box<dyn Learner>,
}

/// Validation row indices of each fold; the rest of the buffer trains.
pub fn fold_indices(n: usize, k: usize, shuffle: bool, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    if shuffle {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(sub_seed(seed, "folds")));
    }
    (0..k)
        .map(|i| order[i * n / k..(i + 1) * n / k].to_vec())
        .collect()
}

/// Seed handed to the learner of configuration `config` on fold `fold`.
pub fn fold_seed(seed: u64, config: usize, fold: usize) -> u64 {
    sub_seed(sub_seed(seed, "cash"), &format!("config-{config}/fold-{fold}"))
}

fn zero_one_loss(model: &dyn Learner, valid: &[&Instance]) -> Result<f64> {
    let mut hits = 0usize;
    for inst in valid {
        hits += usize::from(model.predict(&inst.x)? == inst.label()?);
    }
    Ok(1.0 - hits as f64 / valid.len() as f64)
}

fn evaluate(
    c: usize,
    config: &Configuration,
    buffer: &[Instance],
    folds: &[Vec<usize>],
    schema: &FeatureSchema,
    cfg: &CashConfig,
) -> Result<LeaderboardEntry> {
    let mut in_valid = vec![false; buffer.len()];
    let mut fold_losses = Vec::with_capacity(folds.len());
    for (f, valid_idx) in folds.iter().enumerate() {
        in_valid.iter_mut().for_each(|v| *v = false);
        for &i in valid_idx {
            in_valid[i] = true;
        }
        let train: Vec<Instance> = buffer
            .iter()
            .zip(&in_valid)
            .filter(|(_, &v)| !v)
            .map(|(inst, _)| inst.clone())
            .collect();
        let valid: Vec<&Instance> = valid_idx.iter().map(|&i| &buffer[i]).collect();
        let mut learner =
            build_learner(&config.algorithm, &config.params, schema, fold_seed(cfg.seed, c, f))?;
        learner.fit_batch(&train, cfg.epochs)?;
        fold_losses.push(zero_one_loss(learner.as_ref(), &valid)?);
    }
    Ok(LeaderboardEntry {
        config: config.clone(),
        loss: fold_losses.iter().sum::<f64>() / fold_losses.len() as f64,
        fold_losses,
    })
}

/// Grid search with k-fold cross-validated 0-1 loss; ties go to the
/// earliest configuration. The winner is retrained on the whole buffer.
pub fn cash_search(
    buffer: &[Instance],
    schema: &FeatureSchema,
    space: &ConfigSpace,
    cfg: &CashConfig,
) -> Result<CashResult> {
    let k = cfg.folds;
    if k < 2 || buffer.len() < 10 * k {
        return Err(Error::BufferTooSmall {
            len: buffer.len(),
            folds: k,
            needed: 10 * k.max(2),
        });
    }
    let grid = grid_expand(space)?;
    let n_eval = cfg.budget.map_or(grid.len(), |b| b.min(grid.len()));
    if n_eval == 0 {
        return Err(Error::BudgetExhausted);
    }
    let folds = fold_indices(buffer.len(), k, cfg.shuffle, cfg.seed);
    let leaderboard = par::map_range(cfg.exec, n_eval, |c| {
        evaluate(c, &grid[c], buffer, &folds, schema, cfg)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, e) in leaderboard.iter().enumerate() {
        if e.loss < leaderboard[best].loss {
            best = i;
        }
    }
    let winner = leaderboard[best].config.clone();
    let learner = build_learner(
        &winner.algorithm,
        &winner.params,
        schema,
        sub_seed(sub_seed(cfg.seed, "cash"), "final"),
    )?;
    let model = train_batch(learner, buffer, cfg.epochs)?;
    Ok(CashResult {
        report: CashReport {
            best_loss: leaderboard[best].loss,
            best: winner,
            folds: k,
            truncated: n_eval < grid.len(),
            grid_size: grid.len(),
            leaderboard,
        },
        model,
    })
}
