//! Sufficient statistics shared by the Bayesian and tree learners.

use crate::types::{FeatureSchema, Instance};

use super::argmax;

const VAR_FLOOR: f64 = 1e-9;

/// z-scores numeric features; categorical indices pass through untouched.
#[derive(Debug, Clone)]
pub struct Standardizer {
    numeric: Vec<bool>,
    n: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Standardizer {
    pub fn new(schema: &FeatureSchema) -> Self {
        let d = schema.n_features();
        Standardizer {
            numeric: schema.features.iter().map(|f| f.kind.is_numeric()).collect(),
            n: 0.0,
            mean: vec![0.0; d],
            m2: vec![0.0; d],
        }
    }

    /// Statistics of a whole buffer.
    pub fn fit(schema: &FeatureSchema, buffer: &[Instance]) -> Self {
        let mut s = Standardizer::new(schema);
        for inst in buffer {
            s.update(&inst.x);
        }
        s
    }

    pub fn update(&mut self, x: &[f64]) {
        self.n += 1.0;
        for (j, &v) in x.iter().enumerate() {
            if self.numeric[j] {
                let delta = v - self.mean[j];
                self.mean[j] += delta / self.n;
                self.m2[j] += delta * (v - self.mean[j]);
            }
        }
    }

    pub fn transform_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(x.iter().enumerate().map(|(j, &v)| {
            if !self.numeric[j] {
                return v;
            }
            let sd = if self.n > 0.0 {
                (self.m2[j] / self.n).sqrt()
            } else {
                0.0
            };
            if sd > 1e-12 {
                (v - self.mean[j]) / sd
            } else {
                0.0
            }
        }));
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(x.len());
        self.transform_into(x, &mut out);
        out
    }

    pub fn is_numeric(&self, j: usize) -> bool {
        self.numeric[j]
    }
}

/// Running mean/variance with observed bounds.
#[derive(Debug, Clone, Default)]
pub(crate) struct GaussianEstimator {
    n: f64,
    mean: f64,
    m2: f64,
    min: f64,
    max: f64,
}

impl GaussianEstimator {
    pub fn add(&mut self, v: f64) {
        if self.n == 0.0 {
            self.min = v;
            self.max = v;
        } else {
            self.min = self.min.min(v);
            self.max = self.max.max(v);
        }
        self.n += 1.0;
        let delta = v - self.mean;
        self.mean += delta / self.n;
        self.m2 += delta * (v - self.mean);
    }

    pub fn weight(&self) -> f64 {
        self.n
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn variance(&self) -> f64 {
        if self.n > 1.0 {
            self.m2 / (self.n - 1.0)
        } else {
            0.0
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Log density with a variance floor, for naive Bayes scoring.
    pub fn log_density(&self, v: f64) -> f64 {
        let var = self.variance() + VAR_FLOOR;
        let d = v - self.mean;
        -0.5 * (2.0 * std::f64::consts::PI * var).ln() - d * d / (2.0 * var)
    }

    /// Estimated weight at or below `v` and above it under the gaussian fit.
    pub fn split_weights(&self, v: f64) -> (f64, f64) {
        let sd = self.std_dev();
        let below = if sd > 0.0 {
            0.5 * libm::erfc(-(v - self.mean) / (sd * std::f64::consts::SQRT_2)) * self.n
        } else if v >= self.mean {
            self.n
        } else {
            0.0
        };
        (below, self.n - below)
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Observer {
    /// One estimator per class.
    Numeric(Vec<GaussianEstimator>),
    /// `counts[value][class]`.
    Nominal(Vec<Vec<f64>>),
}

/// Class distribution plus per-feature class-conditional statistics.
#[derive(Debug, Clone)]
pub struct LeafStats {
    pub(crate) class_counts: Vec<f64>,
    pub(crate) observers: Vec<Observer>,
}

impl LeafStats {
    pub fn new(schema: &FeatureSchema) -> Self {
        let c = schema.n_classes();
        LeafStats {
            class_counts: vec![0.0; c],
            observers: schema
                .features
                .iter()
                .map(|f| match f.kind.arity() {
                    None => Observer::Numeric(vec![GaussianEstimator::default(); c]),
                    Some(arity) => Observer::Nominal(vec![vec![0.0; c]; arity]),
                })
                .collect(),
        }
    }

    /// Empty attribute statistics with a given class distribution.
    pub(crate) fn with_counts(schema: &FeatureSchema, counts: Vec<f64>) -> Self {
        let mut s = LeafStats::new(schema);
        s.class_counts = counts;
        s
    }

    pub fn update(&mut self, x: &[f64], y: usize) {
        self.class_counts[y] += 1.0;
        for (obs, &v) in self.observers.iter_mut().zip(x) {
            match obs {
                Observer::Numeric(per_class) => per_class[y].add(v),
                Observer::Nominal(counts) => counts[v as usize][y] += 1.0,
            }
        }
    }

    pub fn class_counts(&self) -> &[f64] {
        &self.class_counts
    }

    pub fn total(&self) -> f64 {
        self.class_counts.iter().sum()
    }

    pub fn is_pure(&self) -> bool {
        self.class_counts.iter().filter(|&&c| c > 0.0).count() < 2
    }

    pub fn majority(&self) -> usize {
        argmax(&self.class_counts)
    }

    /// Unnormalised log posteriors; classes never seen score `-inf`.
    pub fn nb_log_scores(&self, x: &[f64]) -> Vec<f64> {
        let total = self.total();
        self.class_counts
            .iter()
            .enumerate()
            .map(|(c, &n_c)| {
                if n_c <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                let mut score = (n_c / total).ln();
                for (obs, &v) in self.observers.iter().zip(x) {
                    score += match obs {
                        Observer::Numeric(per_class) => per_class[c].log_density(v),
                        Observer::Nominal(counts) => {
                            let arity = counts.len() as f64;
                            let n_cv = counts.get(v as usize).map_or(0.0, |row| row[c]);
                            ((n_cv + 1.0) / (n_c + arity)).ln()
                        }
                    };
                }
                score
            })
            .collect()
    }

    pub fn nb_predict(&self, x: &[f64]) -> usize {
        argmax(&self.nb_log_scores(x))
    }
}
