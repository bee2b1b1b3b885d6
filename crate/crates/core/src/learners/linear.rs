use crate::types::{FeatureSchema, Instance};
use crate::{Error, Result};

use super::stats::Standardizer;
use super::{argmax, Learner};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearLoss {
    Hinge,
    Log,
    Perceptron,
}

#[derive(Debug, Clone, Copy)]
pub struct LinearConfig {
    pub loss: LinearLoss,
    pub lr: f64,
    pub alpha: f64,
    /// z-score numerics with running statistics before scoring.
    pub standardize: bool,
}

impl Default for LinearConfig {
    fn default() -> Self {
        LinearConfig {
            loss: LinearLoss::Hinge,
            lr: 0.01,
            alpha: 0.0,
            standardize: true,
        }
    }
}

/// Linear classifier trained by constant-rate SGD.
///
/// Two classes share one weight vector (positive margin means class 1);
/// more classes use one-vs-rest heads. Categoricals are one-hot encoded.
#[derive(Debug, Clone)]
pub struct LinearModel {
    name: String,
    schema: FeatureSchema,
    cfg: LinearConfig,
    scaler: Standardizer,
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
    n_seen: u64,
}

impl LinearModel {
    pub fn new(schema: FeatureSchema, cfg: LinearConfig, name: &str) -> Result<Self> {
        if !(cfg.lr > 0.0 && cfg.lr.is_finite()) {
            return Err(Error::param("lr", "must be positive and finite"));
        }
        if !(cfg.alpha >= 0.0 && cfg.alpha.is_finite()) {
            return Err(Error::param("alpha", "must be non-negative and finite"));
        }
        let heads = if schema.n_classes() == 2 {
            1
        } else {
            schema.n_classes()
        };
        let width = schema.one_hot_width();
        Ok(LinearModel {
            name: name.to_string(),
            scaler: Standardizer::new(&schema),
            weights: vec![vec![0.0; width]; heads],
            bias: vec![0.0; heads],
            schema,
            cfg,
            n_seen: 0,
        })
    }

    /// A model with fixed parameters, usable for prediction immediately.
    pub fn from_weights(
        schema: FeatureSchema,
        cfg: LinearConfig,
        name: &str,
        weights: Vec<Vec<f64>>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        let mut m = LinearModel::new(schema, cfg, name)?;
        if weights.len() != m.weights.len() || bias.len() != m.bias.len() {
            return Err(Error::param("weights", "one vector and bias per head expected"));
        }
        for w in &weights {
            if w.len() != m.weights[0].len() {
                return Err(Error::DimensionMismatch {
                    expected: m.weights[0].len(),
                    actual: w.len(),
                });
            }
        }
        m.weights = weights;
        m.bias = bias;
        m.n_seen = 1;
        Ok(m)
    }

    fn encode(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.weights[0].len());
        if self.cfg.standardize {
            let z = self.scaler.transform(x);
            self.schema.one_hot_into(&z, &mut out);
        } else {
            self.schema.one_hot_into(x, &mut out);
        }
        out
    }

    /// Raw margins, one per head.
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        let e = self.encode(x);
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| dot(w, &e) + b)
            .collect()
    }

    fn decide(&self, scores: &[f64]) -> usize {
        if scores.len() == 1 {
            usize::from(scores[0] > 0.0)
        } else {
            argmax(scores)
        }
    }

    fn step(&mut self, x: &[f64], y: usize) {
        let e = self.encode(x);
        let binary = self.weights.len() == 1;
        let LinearConfig { loss, lr, alpha, .. } = self.cfg;
        for (h, (w, b)) in self.weights.iter_mut().zip(&mut self.bias).enumerate() {
            let positive = if binary { y == 1 } else { y == h };
            let t = if positive { 1.0 } else { -1.0 };
            let margin = t * (dot(w, &e) + *b);
            let g = match loss {
                LinearLoss::Hinge => f64::from(u8::from(margin < 1.0)),
                LinearLoss::Perceptron => f64::from(u8::from(margin <= 0.0)),
                LinearLoss::Log => 1.0 / (1.0 + margin.exp()),
            };
            if alpha > 0.0 {
                for wi in w.iter_mut() {
                    *wi *= 1.0 - lr * alpha;
                }
            }
            if g > 0.0 {
                for (wi, &xi) in w.iter_mut().zip(&e) {
                    *wi += lr * g * t * xi;
                }
                *b += lr * g * t;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Learner for LinearModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn partial_fit(&mut self, inst: &Instance) -> Result<()> {
        let y = inst.label()?;
        if self.cfg.standardize {
            self.scaler.update(&inst.x);
        }
        self.step(&inst.x, y);
        self.n_seen += 1;
        Ok(())
    }

    fn predict(&self, x: &[f64]) -> Result<usize> {
        if self.n_seen == 0 {
            return Err(Error::Untrained);
        }
        Ok(self.decide(&self.scores(x)))
    }
}

/// Hinge-loss linear classifier fitted by full passes over a buffer with
/// statistics frozen from that buffer.
#[derive(Debug, Clone)]
pub struct LinearSvmBatch {
    scaler: Standardizer,
    model: LinearModel,
    epochs: usize,
    fitted: bool,
}

impl LinearSvmBatch {
    pub fn new(schema: FeatureSchema, lr: f64, alpha: f64, epochs: usize) -> Self {
        let cfg = LinearConfig {
            loss: LinearLoss::Hinge,
            lr: if lr > 0.0 && lr.is_finite() { lr } else { 0.01 },
            alpha: if alpha >= 0.0 && alpha.is_finite() { alpha } else { 0.0 },
            standardize: false,
        };
        LinearSvmBatch {
            scaler: Standardizer::new(&schema),
            model: LinearModel::new(schema, cfg, "linear_svm_batch")
                .expect("sanitised config is valid"),
            epochs: epochs.max(1),
            fitted: false,
        }
    }
}

impl Learner for LinearSvmBatch {
    fn name(&self) -> &str {
        "linear_svm_batch"
    }

    fn partial_fit(&mut self, _inst: &Instance) -> Result<()> {
        if self.fitted {
            Err(Error::FrozenLearner)
        } else {
            Err(Error::BatchOnly(self.name().into()))
        }
    }

    fn fit_batch(&mut self, buffer: &[Instance], _epochs: usize) -> Result<()> {
        if self.fitted {
            return Err(Error::FrozenLearner);
        }
        if buffer.is_empty() {
            return Err(Error::Empty("training buffer"));
        }
        self.scaler = Standardizer::fit(&self.model.schema, buffer);
        let z: Vec<(Vec<f64>, usize)> = buffer
            .iter()
            .map(|i| Ok((self.scaler.transform(&i.x), i.label()?)))
            .collect::<Result<_>>()?;
        for _ in 0..self.epochs {
            for (x, y) in &z {
                self.model.step(x, *y);
            }
        }
        self.model.n_seen = z.len() as u64;
        self.fitted = true;
        Ok(())
    }

    fn predict(&self, x: &[f64]) -> Result<usize> {
        if !self.fitted {
            return Err(Error::Untrained);
        }
        self.model.predict(&self.scaler.transform(x))
    }

    fn is_frozen(&self) -> bool {
        self.fitted
    }
}
