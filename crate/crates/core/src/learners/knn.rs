use std::collections::VecDeque;

use crate::types::{FeatureSchema, Instance};
use crate::{Error, Result};

use super::stats::Standardizer;
use super::{argmax, Learner};

/// Squared distance: z-scored numerics, 0/1 mismatch for categoricals.
fn distance(scaler: &Standardizer, a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(j, (&u, &v))| {
            if scaler.is_numeric(j) {
                let d = u - v;
                d * d
            } else if u == v {
                0.0
            } else {
                1.0
            }
        })
        .sum()
}

/// Majority vote of the `k` closest points; distance ties keep storage order.
fn vote<'a>(
    scaler: &Standardizer,
    points: impl Iterator<Item = (&'a [f64], usize)>,
    query: &[f64],
    k: usize,
    n_classes: usize,
) -> usize {
    let q = scaler.transform(query);
    let mut scored: Vec<(f64, usize)> = points
        .map(|(x, y)| (distance(scaler, &scaler.transform(x), &q), y))
        .collect();
    let k = k.min(scored.len());
    if k < scored.len() {
        scored.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0));
        scored.truncate(k);
    }
    let mut votes = vec![0.0; n_classes];
    for (_, y) in scored {
        votes[y] += 1.0;
    }
    argmax(&votes)
}

/// k-nearest neighbours over a sliding window of the most recent samples.
#[derive(Debug, Clone)]
pub struct KnnWindow {
    schema: FeatureSchema,
    k: usize,
    capacity: usize,
    window: VecDeque<(Vec<f64>, usize)>,
    scaler: Standardizer,
}

impl KnnWindow {
    pub fn new(schema: FeatureSchema, k: usize, window: usize) -> Result<Self> {
        if k == 0 || window == 0 {
            return Err(Error::param("k/window", "must be positive"));
        }
        Ok(KnnWindow {
            scaler: Standardizer::new(&schema),
            schema,
            k,
            capacity: window,
            window: VecDeque::with_capacity(window),
        })
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    pub fn stored(&self) -> impl Iterator<Item = (&[f64], usize)> {
        self.window.iter().map(|(x, y)| (x.as_slice(), *y))
    }
}

impl Learner for KnnWindow {
    fn name(&self) -> &str {
        "knn_window"
    }

    fn partial_fit(&mut self, inst: &Instance) -> Result<()> {
        let y = inst.label()?;
        self.scaler.update(&inst.x);
        if self.window.len() == self.capacity {
            self.window.pop_front();
        }
        self.window.push_back((inst.x.clone(), y));
        Ok(())
    }

    fn predict(&self, x: &[f64]) -> Result<usize> {
        if self.window.is_empty() {
            return Err(Error::Untrained);
        }
        Ok(vote(
            &self.scaler,
            self.stored(),
            x,
            self.k,
            self.schema.n_classes(),
        ))
    }
}

/// k-nearest neighbours over a whole training buffer, frozen after fitting.
#[derive(Debug, Clone)]
pub struct KnnBatch {
    schema: FeatureSchema,
    k: usize,
    points: Vec<(Vec<f64>, usize)>,
    scaler: Standardizer,
}

impl KnnBatch {
    pub fn new(schema: FeatureSchema, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::param("k", "must be positive"));
        }
        Ok(KnnBatch {
            scaler: Standardizer::new(&schema),
            schema,
            k,
            points: Vec::new(),
        })
    }
}

impl Learner for KnnBatch {
    fn name(&self) -> &str {
        "knn_batch"
    }

    fn partial_fit(&mut self, _inst: &Instance) -> Result<()> {
        if self.points.is_empty() {
            Err(Error::BatchOnly(self.name().into()))
        } else {
            Err(Error::FrozenLearner)
        }
    }

    fn fit_batch(&mut self, buffer: &[Instance], _epochs: usize) -> Result<()> {
        if !self.points.is_empty() {
            return Err(Error::FrozenLearner);
        }
        if buffer.is_empty() {
            return Err(Error::Empty("training buffer"));
        }
        self.scaler = Standardizer::fit(&self.schema, buffer);
        self.points = buffer
            .iter()
            .map(|i| Ok((i.x.clone(), i.label()?)))
            .collect::<Result<_>>()?;
        Ok(())
    }

    fn predict(&self, x: &[f64]) -> Result<usize> {
        if self.points.is_empty() {
            return Err(Error::Untrained);
        }
        Ok(vote(
            &self.scaler,
            self.points.iter().map(|(x, y)| (x.as_slice(), *y)),
            x,
            self.k,
            self.schema.n_classes(),
        ))
    }

    fn is_frozen(&self) -> bool {
        !self.points.is_empty()
    }
}
