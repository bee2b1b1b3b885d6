use crate::types::{FeatureSchema, Instance};
use crate::{Error, Result};

use super::stats::LeafStats;
use super::{argmax, Learner};

/// Predicts the most frequent class seen so far.
#[derive(Debug, Clone)]
pub struct MajorityClass {
    counts: Vec<u64>,
}

impl MajorityClass {
    pub fn new(n_classes: usize) -> Self {
        MajorityClass {
            counts: vec![0; n_classes],
        }
    }
}

impl Learner for MajorityClass {
    fn name(&self) -> &str {
        "majority_class"
    }

    fn partial_fit(&mut self, inst: &Instance) -> Result<()> {
        let y = inst.label()?;
        let n_classes = self.counts.len();
        *self
            .counts
            .get_mut(y)
            .ok_or(Error::UnknownClass { class: y, n_classes })? += 1;
        Ok(())
    }

    fn predict(&self, _x: &[f64]) -> Result<usize> {
        if self.counts.iter().all(|&c| c == 0) {
            return Err(Error::Untrained);
        }
        let as_f64: Vec<f64> = self.counts.iter().map(|&c| c as f64).collect();
        Ok(argmax(&as_f64))
    }
}

/// Gaussian naive Bayes for numeric features, Laplace-smoothed counts for
/// categorical ones.
#[derive(Debug, Clone)]
pub struct NaiveBayes {
    stats: LeafStats,
}

impl NaiveBayes {
    pub fn new(schema: FeatureSchema) -> Self {
        NaiveBayes {
            stats: LeafStats::new(&schema),
        }
    }

    pub fn log_scores(&self, x: &[f64]) -> Vec<f64> {
        self.stats.nb_log_scores(x)
    }
}

impl Learner for NaiveBayes {
    fn name(&self) -> &str {
        "naive_bayes"
    }

    fn partial_fit(&mut self, inst: &Instance) -> Result<()> {
        let y = inst.label()?;
        self.stats.update(&inst.x, y);
        Ok(())
    }

    fn predict(&self, x: &[f64]) -> Result<usize> {
        if self.stats.total() == 0.0 {
            return Err(Error::Untrained);
        }
        Ok(self.stats.nb_predict(x))
    }
}
