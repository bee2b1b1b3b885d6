//! Incremental classifiers, frozen batch classifiers and homogeneous online
//! ensembles behind one [`Learner`] contract.
//!
//! Learners are built by name through [`build_learner`]; [`ALGORITHMS`]
//! lists every registered algorithm with its hyperparameters.

mod bayes;
mod cart;
mod ensemble;
mod hoeffding;
mod knn;
mod linear;
mod params;
mod stats;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::par::Execution;
use crate::types::{FeatureSchema, Instance, PredictorStatus};
use crate::{Error, Result};

pub use bayes::{MajorityClass, NaiveBayes};
pub use cart::{Cart, CartConfig, RandomForest, RandomForestConfig};
pub use ensemble::{ensemble_vote, oza_poisson_weight, BaggingConfig, BaggingEnsemble};
pub use hoeffding::{
    evaluate_split, hoeffding_bound, HoeffdingTree, HtConfig, LeafPrediction, SplitDecision,
    SplitTest,
};
pub use knn::{KnnBatch, KnnWindow};
pub use linear::{LinearConfig, LinearLoss, LinearModel, LinearSvmBatch};
pub use params::{ParamValue, Params};
pub use stats::{LeafStats, Standardizer};

/// Something a learner noticed while training, stamped with the sample
/// index by the evaluator.
#[derive(Debug, Clone, PartialEq)]
pub enum LearnerEvent {
    Drift {
        detector: String,
        status: PredictorStatus,
    },
    Switch {
        active: usize,
    },
}

/// Incremental classifier contract.
pub trait Learner: Send {
    fn name(&self) -> &str;

    /// Updates the model with one labeled instance.
    fn partial_fit(&mut self, inst: &Instance) -> Result<()>;

    /// Pure prediction; never changes model state.
    fn predict(&self, x: &[f64]) -> Result<usize>;

    /// Trains on a whole buffer. Incremental learners replay it `epochs`
    /// times through `partial_fit`.
    fn fit_batch(&mut self, buffer: &[Instance], epochs: usize) -> Result<()> {
        if buffer.is_empty() {
            return Err(Error::Empty("training buffer"));
        }
        for _ in 0..epochs.max(1) {
            for inst in buffer {
                self.partial_fit(inst)?;
            }
        }
        Ok(())
    }

    fn is_frozen(&self) -> bool {
        false
    }

    /// Drains events raised since the last call.
    fn take_events(&mut self) -> Vec<LearnerEvent> {
        Vec::new()
    }

    /// Index of the currently active member for selecting ensembles.
    fn active_member(&self) -> Option<usize> {
        None
    }
}

impl<L: Learner + ?Sized> Learner for Box<L> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn partial_fit(&mut self, inst: &Instance) -> Result<()> {
        (**self).partial_fit(inst)
    }
    fn predict(&self, x: &[f64]) -> Result<usize> {
        (**self).predict(x)
    }
    fn fit_batch(&mut self, buffer: &[Instance], epochs: usize) -> Result<()> {
        (**self).fit_batch(buffer, epochs)
    }
    fn is_frozen(&self) -> bool {
        (**self).is_frozen()
    }
    fn take_events(&mut self) -> Vec<LearnerEvent> {
        (**self).take_events()
    }
    fn active_member(&self) -> Option<usize> {
        (**self).active_member()
    }
}

/// A predict-only wrapper produced by [`train_batch`].
pub struct Frozen {
    inner: Box<dyn Learner>,
}

impl Frozen {
    pub fn new(inner: Box<dyn Learner>) -> Self {
        Frozen { inner }
    }

    pub fn into_inner(self) -> Box<dyn Learner> {
        self.inner
    }
}

impl Learner for Frozen {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn partial_fit(&mut self, _inst: &Instance) -> Result<()> {
        Err(Error::FrozenLearner)
    }

    fn predict(&self, x: &[f64]) -> Result<usize> {
        self.inner.predict(x)
    }

    fn fit_batch(&mut self, _buffer: &[Instance], _epochs: usize) -> Result<()> {
        Err(Error::FrozenLearner)
    }

    fn is_frozen(&self) -> bool {
        true
    }
}

/// Trains `learner` on `buffer` and freezes it.
pub fn train_batch(
    mut learner: Box<dyn Learner>,
    buffer: &[Instance],
    epochs: usize,
) -> Result<Box<dyn Learner>> {
    if buffer.is_empty() {
        return Err(Error::Empty("training buffer"));
    }
    learner.fit_batch(buffer, epochs)?;
    Ok(Box::new(Frozen::new(learner)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Online,
    Batch,
    Ensemble,
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LearnerKind::Online => "online",
            LearnerKind::Batch => "batch",
            LearnerKind::Ensemble => "ensemble",
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ParamInfo {
    pub name: &'static str,
    pub default: &'static str,
    pub doc: &'static str,
}

#[derive(Debug, Clone, Copy)]
pub struct AlgorithmInfo {
    pub name: &'static str,
    pub kind: LearnerKind,
    pub params: &'static [ParamInfo],
}

const fn p(name: &'static str, default: &'static str, doc: &'static str) -> ParamInfo {
    ParamInfo { name, default, doc }
}

const HT_PARAMS: &[ParamInfo] = &[
    p("grace", "200", "samples between split attempts at a leaf"),
    p("delta", "1e-7", "split confidence"),
    p("tau", "0.05", "tie threshold"),
    p("leaf_prediction", "nba", "mc | nb | nba"),
    p("split_points", "10", "candidate thresholds per numeric feature"),
];

const HAT_PARAMS: &[ParamInfo] = &[
    p("grace", "200", "samples between split attempts at a leaf"),
    p("delta", "1e-7", "split confidence"),
    p("tau", "0.05", "tie threshold"),
    p("leaf_prediction", "nba", "mc | nb | nba"),
    p("split_points", "10", "candidate thresholds per numeric feature"),
    p("adwin_delta", "0.002", "confidence of the per-node ADWIN monitors"),
];

const BAGGING_PARAMS: &[ParamInfo] = &[
    p("n_members", "10", "ensemble size"),
    p("lambda", "1 (oza) / 6 (leveraging)", "Poisson rate of the online bootstrap"),
    p("base", "hoeffding_tree", "member algorithm (online learners only)"),
    p("adwin_delta", "0.002", "confidence of the per-member ADWIN (adwin variants)"),
];

pub const ALGORITHMS: &[AlgorithmInfo] = &[
    AlgorithmInfo {
        name: "majority_class",
        kind: LearnerKind::Online,
        params: &[],
    },
    AlgorithmInfo {
        name: "naive_bayes",
        kind: LearnerKind::Online,
        params: &[],
    },
    AlgorithmInfo {
        name: "hoeffding_tree",
        kind: LearnerKind::Online,
        params: HT_PARAMS,
    },
    AlgorithmInfo {
        name: "hoeffding_adaptive_tree",
        kind: LearnerKind::Online,
        params: HAT_PARAMS,
    },
    AlgorithmInfo {
        name: "knn_window",
        kind: LearnerKind::Online,
        params: &[
            p("k", "5", "neighbours"),
            p("window", "1000", "most recent samples kept"),
        ],
    },
    AlgorithmInfo {
        name: "linear_sgd",
        kind: LearnerKind::Online,
        params: &[
            p("lr", "0.01", "constant learning rate"),
            p("loss", "hinge", "hinge | log"),
            p("alpha", "0", "L2 penalty"),
        ],
    },
    AlgorithmInfo {
        name: "perceptron",
        kind: LearnerKind::Online,
        params: &[p("lr", "0.01", "constant learning rate")],
    },
    AlgorithmInfo {
        name: "oza_bagging",
        kind: LearnerKind::Ensemble,
        params: BAGGING_PARAMS,
    },
    AlgorithmInfo {
        name: "oza_bagging_adwin",
        kind: LearnerKind::Ensemble,
        params: BAGGING_PARAMS,
    },
    AlgorithmInfo {
        name: "leveraging_bagging",
        kind: LearnerKind::Ensemble,
        params: BAGGING_PARAMS,
    },
    AlgorithmInfo {
        name: "cart_batch",
        kind: LearnerKind::Batch,
        params: &[
            p("max_depth", "20", "depth bound"),
            p("min_samples_leaf", "1", "smallest leaf"),
            p("min_samples_split", "2", "smallest splittable node"),
        ],
    },
    AlgorithmInfo {
        name: "random_forest_batch",
        kind: LearnerKind::Batch,
        params: &[
            p("n_trees", "10", "forest size"),
            p("max_depth", "20", "depth bound per tree"),
            p("max_features", "0", "features tried per split (0 = sqrt(d))"),
            p("bootstrap", "true", "resample the buffer per tree"),
        ],
    },
    AlgorithmInfo {
        name: "knn_batch",
        kind: LearnerKind::Batch,
        params: &[p("k", "5", "neighbours")],
    },
    AlgorithmInfo {
        name: "linear_svm_batch",
        kind: LearnerKind::Batch,
        params: &[
            p("lr", "0.01", "learning rate"),
            p("alpha", "1e-4", "L2 penalty"),
            p("epochs", "10", "passes over the buffer"),
        ],
    },
];

pub fn algorithm_info(name: &str) -> Option<&'static AlgorithmInfo> {
    ALGORITHMS.iter().find(|a| a.name == name)
}

/// Builds a learner by registry name.
///
/// Unknown parameter names are rejected. `seed` feeds every random choice
/// the learner makes (bootstrap draws, feature subsampling).
pub fn build_learner(
    name: &str,
    params: &Params,
    schema: &FeatureSchema,
    seed: u64,
) -> Result<Box<dyn Learner>> {
    let info = algorithm_info(name).ok_or_else(|| Error::UnknownAlgorithm(name.to_string()))?;
    params.check_known(info.params.iter().map(|p| p.name))?;
    Ok(match name {
        "majority_class" => Box::new(MajorityClass::new(schema.n_classes())),
        "naive_bayes" => Box::new(NaiveBayes::new(schema.clone())),
        "hoeffding_tree" => Box::new(HoeffdingTree::new(
            schema.clone(),
            HtConfig::from_params(params, false)?,
        )),
        "hoeffding_adaptive_tree" => Box::new(HoeffdingTree::new(
            schema.clone(),
            HtConfig::from_params(params, true)?,
        )),
        "knn_window" => Box::new(KnnWindow::new(
            schema.clone(),
            params.usize_or("k", 5)?,
            params.usize_or("window", 1000)?,
        )?),
        "linear_sgd" => {
            let loss = match params.str_or("loss", "hinge")? {
                "hinge" => LinearLoss::Hinge,
                "log" => LinearLoss::Log,
                other => return Err(Error::param("loss", format!("unknown loss `{other}`"))),
            };
            Box::new(LinearModel::new(
                schema.clone(),
                LinearConfig {
                    loss,
                    lr: params.f64_or("lr", 0.01)?,
                    alpha: params.f64_or("alpha", 0.0)?,
                    standardize: true,
                },
                "linear_sgd",
            )?)
        }
        "perceptron" => Box::new(LinearModel::new(
            schema.clone(),
            LinearConfig {
                loss: LinearLoss::Perceptron,
                lr: params.f64_or("lr", 0.01)?,
                alpha: 0.0,
                standardize: true,
            },
            "perceptron",
        )?),
        "oza_bagging" | "oza_bagging_adwin" | "leveraging_bagging" => {
            let cfg = BaggingConfig::from_params(name, params)?;
            Box::new(BaggingEnsemble::new(
                name,
                schema.clone(),
                cfg,
                seed,
                Execution::default(),
            )?)
        }
        "cart_batch" => Box::new(Cart::new(
            schema.clone(),
            CartConfig {
                max_depth: params.usize_or("max_depth", 20)?,
                min_samples_leaf: params.usize_or("min_samples_leaf", 1)?,
                min_samples_split: params.usize_or("min_samples_split", 2)?,
                max_features: None,
            },
            seed,
        )),
        "random_forest_batch" => {
            let max_features = params.usize_or("max_features", 0)?;
            Box::new(RandomForest::new(
                schema.clone(),
                RandomForestConfig {
                    n_trees: params.usize_or("n_trees", 10)?,
                    tree: CartConfig {
                        max_depth: params.usize_or("max_depth", 20)?,
                        min_samples_leaf: 1,
                        min_samples_split: 2,
                        max_features: (max_features > 0).then_some(max_features),
                    },
                    bootstrap: params.bool_or("bootstrap", true)?,
                },
                seed,
                Execution::default(),
            )?)
        }
        "knn_batch" => Box::new(KnnBatch::new(schema.clone(), params.usize_or("k", 5)?)?),
        "linear_svm_batch" => Box::new(LinearSvmBatch::new(
            schema.clone(),
            params.f64_or("lr", 0.01)?,
            params.f64_or("alpha", 1e-4)?,
            params.usize_or("epochs", 10)?,
        )),
        _ => unreachable!("registry and builder disagree on `{name}`"),
    })
}

/// Index of the largest value; ties go to the lowest index.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
