//! Online model selection over a roster of incremental learners: window
//! meta-features, best-last-window selection, meta-learned selection and
//! fading-performance weighted voting.

use serde::{Deserialize, Serialize};

use crate::learners::{
    build_learner, ensemble_vote, LinearConfig, LinearLoss, LinearModel, Params,
};
use crate::learners::{Learner, LearnerEvent};
use crate::par::{self, Execution};
use crate::types::{Feature, FeatureSchema, Instance};
use crate::{sub_seed, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetaCategory {
    General,
    Statistical,
    InfoTheory,
}

/// Names and categories of the meta-features, in vector order.
pub const META_FEATURES: [(&str, MetaCategory); 19] = [
    ("n_classes", MetaCategory::General),
    ("n_features", MetaCategory::General),
    ("frac_categorical", MetaCategory::General),
    ("majority_share", MetaCategory::General),
    ("mean_of_means", MetaCategory::Statistical),
    ("std_of_means", MetaCategory::Statistical),
    ("mean_of_stds", MetaCategory::Statistical),
    ("std_of_stds", MetaCategory::Statistical),
    ("mean_skewness", MetaCategory::Statistical),
    ("std_skewness", MetaCategory::Statistical),
    ("mean_kurtosis", MetaCategory::Statistical),
    ("std_kurtosis", MetaCategory::Statistical),
    ("mean_abs_correlation", MetaCategory::Statistical),
    ("std_abs_correlation", MetaCategory::Statistical),
    ("class_entropy", MetaCategory::InfoTheory),
    ("mean_attribute_entropy", MetaCategory::InfoTheory),
    ("mean_mutual_information", MetaCategory::InfoTheory),
    ("equivalent_n_attributes", MetaCategory::InfoTheory),
    ("noise_signal_ratio", MetaCategory::InfoTheory),
];

pub const N_META_FEATURES: usize = META_FEATURES.len();

const ENTROPY_BINS: usize = 10;

/// Fixed-length characterisation of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaFeatureVector {
    pub values: [f64; N_META_FEATURES],
}

impl MetaFeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        META_FEATURES
            .iter()
            .position(|(n, _)| *n == name)
            .map(|i| self.values[i])
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Population mean, std, skewness and excess kurtosis; shape measures are
/// 0 when the values do not vary.
fn moments(xs: &[f64]) -> [f64; 4] {
    let (mean, sd) = mean_std(xs);
    if sd <= 1e-12 {
        return [mean, 0.0, 0.0, 0.0];
    }
    let n = xs.len() as f64;
    let m3 = xs.iter().map(|x| ((x - mean) / sd).powi(3)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| ((x - mean) / sd).powi(4)).sum::<f64>() / n;
    [mean, sd, m3, m4 - 3.0]
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, sa) = mean_std(a);
    let (mb, sb) = mean_std(b);
    if sa <= 1e-12 || sb <= 1e-12 {
        return 0.0;
    }
    let cov = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / a.len() as f64;
    cov / (sa * sb)
}

/// Entropy in bits of a count vector.
pub fn entropy_bits(counts: &[f64]) -> f64 {
    let n: f64 = counts.iter().sum();
    if n <= 0.0 {
        return 0.0;
    }
    -counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| (c / n) * (c / n).log2())
        .sum::<f64>()
}

/// Discrete codes of one feature over the window: categorical indices as
/// they are, numerics in equal-width bins over the window range.
fn codes(values: &[f64], arity: Option<usize>) -> (Vec<usize>, usize) {
    match arity {
        Some(a) => (values.iter().map(|&v| v as usize).collect(), a),
        None => {
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let width = hi - lo;
            let bin = |v: f64| {
                if width > 0.0 {
                    (((v - lo) / width * ENTROPY_BINS as f64) as usize).min(ENTROPY_BINS - 1)
                } else {
                    0
                }
            };
            (values.iter().map(|&v| bin(v)).collect(), ENTROPY_BINS)
        }
    }
}

/// Meta-features of a window of labeled instances, ordered as
/// [`META_FEATURES`]. Degenerate measures are 0.
pub fn extract_meta_features(
    window: &[Instance],
    schema: &FeatureSchema,
) -> Result<MetaFeatureVector> {
    if window.is_empty() {
        return Err(Error::Empty("meta window"));
    }
    let n = window.len() as f64;
    let c = schema.n_classes();
    let ys: Vec<usize> = window.iter().map(Instance::label).collect::<Result<_>>()?;
    let mut class_counts = vec![0.0; c];
    for &y in &ys {
        class_counts[y] += 1.0;
    }
    let d = schema.n_features();
    let columns: Vec<Vec<f64>> = (0..d)
        .map(|j| window.iter().map(|i| i.x[j]).collect())
        .collect();
    let numeric: Vec<usize> = (0..d)
        .filter(|&j| schema.features[j].kind.is_numeric())
        .collect();

    let mut v = [0.0; N_META_FEATURES];
    v[0] = c as f64;
    v[1] = d as f64;
    v[2] = if d == 0 {
        0.0
    } else {
        (d - numeric.len()) as f64 / d as f64
    };
    v[3] = class_counts.iter().copied().fold(0.0, f64::max) / n;

    let per_feature: Vec<[f64; 4]> = numeric.iter().map(|&j| moments(&columns[j])).collect();
    for k in 0..4 {
        let xs: Vec<f64> = per_feature.iter().map(|m| m[k]).collect();
        let (m, s) = mean_std(&xs);
        v[4 + 2 * k] = m;
        v[5 + 2 * k] = s;
    }
    let mut corr = Vec::new();
    for (a, &i) in numeric.iter().enumerate() {
        for &j in &numeric[a + 1..] {
            corr.push(pearson(&columns[i], &columns[j]).abs());
        }
    }
    (v[12], v[13]) = mean_std(&corr);

    let h_class = entropy_bits(&class_counts);
    let (mut h_attr, mut mi) = (Vec::with_capacity(d), Vec::with_capacity(d));
    for (j, col) in columns.iter().enumerate() {
        let (code, k) = codes(col, schema.features[j].kind.arity());
        let mut marginal = vec![0.0; k];
        let mut joint = vec![0.0; k * c];
        for (&b, &y) in code.iter().zip(&ys) {
            marginal[b] += 1.0;
            joint[b * c + y] += 1.0;
        }
        let h = entropy_bits(&marginal);
        h_attr.push(h);
        mi.push((h + h_class - entropy_bits(&joint)).max(0.0));
    }
    let mean_h = mean_std(&h_attr).0;
    let mean_mi = mean_std(&mi).0;
    v[14] = h_class;
    v[15] = mean_h;
    v[16] = mean_mi;
    if mean_mi > 1e-12 {
        v[17] = h_class / mean_mi;
        v[18] = (mean_h - mean_mi) / mean_mi;
    }
    Ok(MetaFeatureVector { values: v })
}

/// Learner with the most hits; a tie involving the current leader keeps it,
/// other ties go to the lowest index.
pub fn window_best_learner(hits: &[usize], current: usize) -> Result<usize> {
    let best = *hits.iter().max().ok_or(Error::Empty("roster"))?;
    if hits.get(current) == Some(&best) {
        return Ok(current);
    }
    Ok(hits.iter().position(|&h| h == best).expect("max exists"))
}

/// Fading-factor estimate of each member's recent accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceWeights {
    alpha: f64,
    weights: Vec<f64>,
}

impl PerformanceWeights {
    pub fn new(n: usize, alpha: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty("roster"));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::param("alpha", "must lie in (0, 1)"));
        }
        Ok(PerformanceWeights {
            alpha,
            weights: vec![1.0 / n as f64; n],
        })
    }

    /// `w_j <- alpha * w_j + (1 - alpha) * correct_j`.
    pub fn update(&mut self, correct: &[bool]) {
        for (w, &c) in self.weights.iter_mut().zip(correct) {
            *w = self.alpha * *w + (1.0 - self.alpha) * f64::from(u8::from(c));
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Picks the leader for the next window from the completed window.
pub trait MetaSelector: Send {
    /// Learns that `completed_best` won the window described by `features`
    /// and returns the learner to activate next.
    fn select(&mut self, features: &MetaFeatureVector, completed_best: usize) -> Result<usize>;
}

/// Incremental one-vs-rest logistic model from meta-features to the index
/// of the best learner.
pub struct LinearMetaSelector {
    model: LinearModel,
}

impl LinearMetaSelector {
    pub fn new(roster_size: usize) -> Result<Self> {
        if roster_size < 2 {
            return Err(Error::param("roster", "a selector needs at least two learners"));
        }
        let schema = FeatureSchema::new(
            META_FEATURES.iter().map(|(n, _)| Feature::numeric(*n)).collect(),
            "best_learner",
            (0..roster_size).map(|i| i.to_string()).collect(),
        )?;
        let cfg = LinearConfig {
            loss: LinearLoss::Log,
            lr: 0.05,
            alpha: 0.0,
            standardize: true,
        };
        Ok(LinearMetaSelector {
            model: LinearModel::new(schema, cfg, "meta_selector")?,
        })
    }
}

impl MetaSelector for LinearMetaSelector {
    fn select(&mut self, features: &MetaFeatureVector, completed_best: usize) -> Result<usize> {
        self.model
            .partial_fit(&Instance::labeled(features.values.to_vec(), completed_best, 0))?;
        self.model.predict(&features.values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum MetaMode {
    /// A meta-learner maps window meta-features to the next leader.
    Meta,
    /// The best learner of the completed window leads the next one.
    LastBest,
    /// All learners vote, weighted by fading accuracy.
    WeightedVote { alpha: f64 },
}

impl MetaMode {
    pub fn name(&self) -> &'static str {
        match self {
            MetaMode::Meta => "meta",
            MetaMode::LastBest => "last_best",
            MetaMode::WeightedVote { .. } => "weighted_vote",
        }
    }
}

pub const DEFAULT_ROSTER: [&str; 4] = ["hoeffding_tree", "knn_window", "perceptron", "linear_sgd"];
pub const DEFAULT_WINDOW: usize = 300;

/// A roster of online learners behind one [`Learner`] interface. Every
/// member trains on every sample; the prediction comes from the leader
/// (or the weighted vote).
pub struct MetaEnsemble {
    schema: FeatureSchema,
    bases: Vec<Box<dyn Learner>>,
    mode: MetaMode,
    window_size: usize,
    selector: Option<Box<dyn MetaSelector>>,
    perf: Option<PerformanceWeights>,
    exec: Execution,
    window: Vec<Instance>,
    hits: Vec<usize>,
    active: usize,
    n_windows: u64,
    events: Vec<LearnerEvent>,
    name: String,
}

impl MetaEnsemble {
    /// `selector` is only used in [`MetaMode::Meta`]; `None` there means
    /// the default [`LinearMetaSelector`].
    pub fn new(
        schema: FeatureSchema,
        bases: Vec<Box<dyn Learner>>,
        mode: MetaMode,
        window_size: usize,
        selector: Option<Box<dyn MetaSelector>>,
        exec: Execution,
    ) -> Result<Self> {
        if bases.is_empty() {
            return Err(Error::Empty("roster"));
        }
        if window_size == 0 {
            return Err(Error::param("window", "must be positive"));
        }
        let n = bases.len();
        let selector = match mode {
            MetaMode::Meta if n > 1 => Some(match selector {
                Some(s) => s,
                None => Box::new(LinearMetaSelector::new(n)?) as Box<dyn MetaSelector>,
            }),
            _ => None,
        };
        let perf = match mode {
            MetaMode::WeightedVote { alpha } => Some(PerformanceWeights::new(n, alpha)?),
            _ => None,
        };
        Ok(MetaEnsemble {
            name: format!("meta_{}", mode.name()),
            schema,
            hits: vec![0; n],
            bases,
            mode,
            window_size,
            selector,
            perf,
            exec,
            window: Vec::with_capacity(window_size),
            active: 0,
            n_windows: 0,
            events: Vec::new(),
        })
    }

    /// Builds the roster from the learner registry with per-member seeds.
    pub fn from_roster(
        schema: FeatureSchema,
        roster: &[(String, Params)],
        mode: MetaMode,
        window_size: usize,
        seed: u64,
        exec: Execution,
    ) -> Result<Self> {
        let bases = roster
            .iter()
            .enumerate()
            .map(|(j, (name, params))| {
                build_learner(name, params, &schema, sub_seed(seed, &format!("base-{j}")))
            })
            .collect::<Result<_>>()?;
        MetaEnsemble::new(schema, bases, mode, window_size, None, exec)
    }

    pub fn mode(&self) -> MetaMode {
        self.mode
    }

    pub fn active(&self) -> usize {
        self.active
    }

    pub fn completed_windows(&self) -> u64 {
        self.n_windows
    }

    pub fn base_names(&self) -> Vec<String> {
        self.bases.iter().map(|b| b.name().to_string()).collect()
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.perf.as_ref().map(PerformanceWeights::weights)
    }

    fn close_window(&mut self) -> Result<()> {
        let best = window_best_learner(&self.hits, self.active)?;
        let next = match self.mode {
            MetaMode::LastBest => best,
            MetaMode::Meta => {
                let feats = extract_meta_features(&self.window, &self.schema)?;
                let selector = self.selector.as_mut().expect("meta mode has a selector");
                let pick = selector.select(&feats, best)?;
                if pick >= self.bases.len() {
                    return Err(Error::param("selector", format!("chose missing learner {pick}")));
                }
                pick
            }
            MetaMode::WeightedVote { .. } => self.active,
        };
        if next != self.active {
            self.active = next;
            self.events.push(LearnerEvent::Switch { active: next });
        }
        self.window.clear();
        self.hits.iter_mut().for_each(|h| *h = 0);
        self.n_windows += 1;
        Ok(())
    }
}

impl Learner for MetaEnsemble {
    fn name(&self) -> &str {
        &self.name
    }

    fn partial_fit(&mut self, inst: &Instance) -> Result<()> {
        if self.bases.len() == 1 {
            return self.bases[0].partial_fit(inst);
        }
        let y = inst.label()?;
        let outcomes = par::map_mut(self.exec, &mut self.bases, |_, b| -> Result<(bool, Vec<LearnerEvent>)> {
            let correct = b.predict(&inst.x).is_ok_and(|p| p == y);
            b.partial_fit(inst)?;
            Ok((correct, b.take_events()))
        });
        let mut correct = Vec::with_capacity(outcomes.len());
        for (j, o) in outcomes.into_iter().enumerate() {
            let (c, events) = o?;
            self.hits[j] += usize::from(c);
            correct.push(c);
            if j == self.active {
                self.events.extend(events);
            }
        }
        if let Some(perf) = &mut self.perf {
            perf.update(&correct);
        }
        if !matches!(self.mode, MetaMode::WeightedVote { .. }) {
            self.window.push(inst.clone());
            if self.window.len() == self.window_size {
                self.close_window()?;
            }
        }
        Ok(())
    }

    fn predict(&self, x: &[f64]) -> Result<usize> {
        match (&self.perf, self.bases.len()) {
            (Some(perf), n) if n > 1 => {
                let votes: Vec<(usize, f64)> = self
                    .bases
                    .iter()
                    .zip(perf.weights())
                    .filter_map(|(b, &w)| b.predict(x).ok().map(|p| (p, w)))
                    .collect();
                if votes.is_empty() {
                    return Err(Error::Untrained);
                }
                ensemble_vote(&votes)
            }
            _ => self.bases[self.active].predict(x),
        }
    }

    fn take_events(&mut self) -> Vec<LearnerEvent> {
        if self.bases.len() == 1 {
            return self.bases[0].take_events();
        }
        std::mem::take(&mut self.events)
    }

    fn active_member(&self) -> Option<usize> {
        if self.bases.len() == 1 {
            return self.bases[0].active_member();
        }
        match &self.perf {
            Some(perf) => Some(crate::learners::argmax(perf.weights())),
            None => Some(self.active),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{run_prequential, EvalConfig};
    use crate::generators::{build_generator, Family, GeneratorParams};
    use crate::types::{StreamSource, VecSource};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn binary_cat_schema(n_features: usize) -> FeatureSchema {
        FeatureSchema::new(
            (0..n_features)
                .map(|i| Feature::categorical(format!("f{i}"), ["a", "b"]))
                .collect(),
            "y",
            vec!["0".into(), "1".into()],
        )
        .unwrap()
    }

    #[test]
    fn dimension_is_pinned() {
        assert_eq!(N_META_FEATURES, 19);
        let general = META_FEATURES.iter().filter(|f| f.1 == MetaCategory::General).count();
        let stat = META_FEATURES.iter().filter(|f| f.1 == MetaCategory::Statistical).count();
        assert_eq!((general, stat, N_META_FEATURES - general - stat), (4, 10, 5));
    }

    #[test]
    fn single_class_window_has_zero_entropy() {
        let w: Vec<Instance> = (0..50)
            .map(|i| Instance::labeled(vec![(i % 2) as f64], 0, i))
            .collect();
        let f = extract_meta_features(&w, &binary_cat_schema(1)).unwrap();
        assert_eq!(f.get("class_entropy"), Some(0.0));
        assert_eq!(f.get("majority_share"), Some(1.0));
        assert!(f.values.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn balanced_labels_have_one_bit() {
        let w: Vec<Instance> = (0..50)
            .map(|i| Instance::labeled(vec![0.0], (i % 2) as usize, i))
            .collect();
        let f = extract_meta_features(&w, &binary_cat_schema(1)).unwrap();
        assert_eq!(f.get("class_entropy"), Some(1.0));
    }

    #[test]
    fn label_copy_has_mutual_information_equal_to_class_entropy() {
        // 30 zeros, 70 ones
        let w: Vec<Instance> = (0..100)
            .map(|i| {
                let y = usize::from(i >= 30);
                Instance::labeled(vec![y as f64], y, i)
            })
            .collect();
        let f = extract_meta_features(&w, &binary_cat_schema(1)).unwrap();
        let h = -(0.3_f64 * 0.3_f64.log2() + 0.7 * 0.7_f64.log2());
        assert!((f.get("class_entropy").unwrap() - h).abs() < 1e-12);
        assert!((f.get("mean_mutual_information").unwrap() - h).abs() < 1e-12);
        assert!((f.get("equivalent_n_attributes").unwrap() - 1.0).abs() < 1e-12);
        assert!(f.get("noise_signal_ratio").unwrap().abs() < 1e-12);
    }

    #[test]
    fn numeric_measures_against_hand_values() {
        let schema = FeatureSchema::new(
            vec![Feature::numeric("a"), Feature::numeric("b")],
            "y",
            vec!["0".into(), "1".into()],
        )
        .unwrap();
        // a = 1,2,3,4 (symmetric), b = 2a (perfect correlation)
        let w: Vec<Instance> = (1..=4)
            .map(|i| Instance::labeled(vec![i as f64, 2.0 * i as f64], (i % 2) as usize, i))
            .collect();
        let f = extract_meta_features(&w, &schema).unwrap();
        assert_eq!(f.get("mean_of_means"), Some(3.75));
        assert_eq!(f.get("std_of_means"), Some(1.25));
        assert!(f.get("mean_skewness").unwrap().abs() < 1e-12);
        // population excess kurtosis of 1..4: 1.64 - 3
        assert!((f.get("mean_kurtosis").unwrap() + 1.36).abs() < 1e-12);
        assert!((f.get("mean_abs_correlation").unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(f.get("frac_categorical"), Some(0.0));
    }

    #[test]
    fn constant_numeric_column_is_imputed() {
        let schema = FeatureSchema::new(
            vec![Feature::numeric("a")],
            "y",
            vec!["0".into(), "1".into()],
        )
        .unwrap();
        let w: Vec<Instance> = (0..10).map(|i| Instance::labeled(vec![5.0], 0, i)).collect();
        let f = extract_meta_features(&w, &schema).unwrap();
        assert!(f.values.iter().all(|v| v.is_finite()));
        assert_eq!(f.get("mean_of_stds"), Some(0.0));
        assert_eq!(f.get("mean_kurtosis"), Some(0.0));
    }

    proptest! {
        #[test]
        fn class_entropy_ignores_relabeling(labels in prop::collection::vec(0usize..3, 1..100)) {
            let schema = FeatureSchema::new(
                vec![Feature::numeric("a")],
                "y",
                vec!["0".into(), "1".into(), "2".into()],
            ).unwrap();
            let mk = |perm: [usize; 3]| -> Vec<Instance> {
                labels.iter().enumerate()
                    .map(|(i, &y)| Instance::labeled(vec![i as f64], perm[y], i as u64))
                    .collect()
            };
            let a = extract_meta_features(&mk([0, 1, 2]), &schema).unwrap();
            let b = extract_meta_features(&mk([2, 0, 1]), &schema).unwrap();
            prop_assert!((a.get("class_entropy").unwrap() - b.get("class_entropy").unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn window_best_examples() {
        assert_eq!(window_best_learner(&[250, 280, 240, 100], 0).unwrap(), 1);
        assert_eq!(window_best_learner(&[7, 7, 7, 7], 2).unwrap(), 2);
        assert_eq!(window_best_learner(&[3, 9, 9], 0).unwrap(), 1);
        assert_eq!(window_best_learner(&[5], 0).unwrap(), 0);
        assert!(window_best_learner(&[], 0).is_err());
    }

    #[test]
    fn performance_weights_examples() {
        let mut p = PerformanceWeights::new(3, 0.9).unwrap();
        for _ in 0..100 {
            p.update(&[true, true, true]);
        }
        assert!(p.weights().windows(2).all(|w| w[0] == w[1]));

        let mut p = PerformanceWeights::new(2, 0.999).unwrap();
        for _ in 0..10_000 {
            p.update(&[true, false]);
        }
        // closed form: w_A = 1 - 0.5 * a^n, w_B = 0.5 * a^n
        let an = 0.999_f64.powi(10_000);
        let (wa, wb) = (p.weights()[0], p.weights()[1]);
        assert!((wa - (1.0 - 0.5 * an)).abs() < 1e-9);
        assert!((wb - 0.5 * an).abs() < 1e-12);
        assert!(wa / wb > 100.0);

        let mut p = PerformanceWeights::new(2, 1.0 - 1e-15).unwrap();
        p.update(&[true, false]);
        assert!((p.weights()[0] - 0.5).abs() < 1e-12);
        assert!(PerformanceWeights::new(2, 1.0).is_err());
        assert!(PerformanceWeights::new(2, 0.0).is_err());
    }

    /// Fixed rule `y = [x[feature] > 0.5]`.
    struct Rule(usize);

    impl Learner for Rule {
        fn name(&self) -> &str {
            "rule"
        }
        fn partial_fit(&mut self, _inst: &Instance) -> Result<()> {
            Ok(())
        }
        fn predict(&self, x: &[f64]) -> Result<usize> {
            Ok(usize::from(x[self.0] > 0.5))
        }
    }

    fn alternating(n: u64, period: u64, seed: u64) -> VecSource {
        let schema = FeatureSchema::new(
            vec![Feature::numeric("x0"), Feature::numeric("x1")],
            "y",
            vec!["0".into(), "1".into()],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..n)
            .map(|i| {
                let x = vec![rng.random::<f64>(), rng.random::<f64>()];
                let concept = ((i / period) % 2) as usize;
                let y = usize::from(x[concept] > 0.5);
                Instance::labeled(x, y, i)
            })
            .collect();
        VecSource::new(schema, data)
    }

    fn rules_ensemble(mode: MetaMode, selector: Option<Box<dyn MetaSelector>>) -> MetaEnsemble {
        let schema = alternating(1, 300, 0).schema().clone();
        MetaEnsemble::new(
            schema,
            vec![Box::new(Rule(0)), Box::new(Rule(1))],
            mode,
            300,
            selector,
            Execution::Sequential,
        )
        .unwrap()
    }

    #[test]
    fn cold_start_then_one_window_lag() {
        let mut src = alternating(3000, 300, 1);
        let mut m = rules_ensemble(MetaMode::LastBest, None);
        let mut leaders = Vec::new();
        let mut i = 0;
        while let Some(inst) = src.next_instance().unwrap() {
            if i % 300 == 0 {
                leaders.push(m.active());
            }
            m.partial_fit(&inst).unwrap();
            i += 1;
        }
        // window 1 runs on learner 0; afterwards the leader is the previous
        // window's concept
        assert_eq!(leaders[0], 0);
        for (w, &l) in leaders.iter().enumerate().skip(1) {
            assert_eq!(l, (w - 1) % 2, "window {w}");
        }
    }

    /// Replays a fixed sequence of picks, ignoring the features.
    struct Script(std::vec::IntoIter<usize>);

    impl MetaSelector for Script {
        fn select(&mut self, _f: &MetaFeatureVector, _best: usize) -> Result<usize> {
            Ok(self.0.next().unwrap_or(0))
        }
    }

    /// Echoes the completed window's winner.
    struct PreviousBest;

    impl MetaSelector for PreviousBest {
        fn select(&mut self, _f: &MetaFeatureVector, best: usize) -> Result<usize> {
            Ok(best)
        }
    }

    fn run(m: &mut MetaEnsemble, seed: u64) -> crate::eval::MetricTrace {
        let mut src = alternating(6000, 300, seed);
        run_prequential(&mut src, m, &EvalConfig::default()).unwrap()
    }

    #[test]
    fn meta_with_previous_best_lookup_equals_last_best() {
        let a = run(&mut rules_ensemble(MetaMode::LastBest, None), 2);
        let b = run(&mut rules_ensemble(MetaMode::Meta, Some(Box::new(PreviousBest))), 2);
        assert_eq!(a.records, b.records);
    }

    #[test]
    fn next_window_oracle_bounds_last_best() {
        // window w + 1 follows concept (w + 1) % 2
        let picks: Vec<usize> = (1..=20).map(|w| w % 2).collect();
        let oracle = run(&mut rules_ensemble(MetaMode::Meta, Some(Box::new(Script(picks.into_iter())))), 3);
        let last = run(&mut rules_ensemble(MetaMode::LastBest, None), 3);
        let o = oracle.last().unwrap().cum_accuracy;
        let l = last.last().unwrap().cum_accuracy;
        assert!(o >= l);
        assert!(o > 0.94, "{o}");
    }

    #[test]
    fn single_member_roster_matches_plain_run() {
        let p = GeneratorParams::default();
        let mut g1 = build_generator(Family::Agrawal, 1, 5, &p).unwrap();
        let schema = g1.schema().clone();
        let cfg = EvalConfig {
            max_samples: Some(3000),
            ..EvalConfig::default()
        };
        let roster = vec![("hoeffding_adaptive_tree".to_string(), Params::default())];
        let mut plain = build_learner(&roster[0].0, &Params::default(), &schema, sub_seed(7, "base-0")).unwrap();
        let a = run_prequential(&mut g1, &mut plain, &cfg).unwrap();
        for mode in [MetaMode::LastBest, MetaMode::Meta] {
            let mut g = build_generator(Family::Agrawal, 1, 5, &p).unwrap();
            let mut m = MetaEnsemble::from_roster(schema.clone(), &roster, mode, 300, 7, Execution::Sequential).unwrap();
            let b = run_prequential(&mut g, &mut m, &cfg).unwrap();
            assert_eq!(a.records, b.records);
        }
    }

    #[test]
    fn weighted_vote_follows_the_accurate_member() {
        let mut m = rules_ensemble(MetaMode::WeightedVote { alpha: 0.99 }, None);
        let mut src = alternating(299, 300, 4);
        while let Some(inst) = src.next_instance().unwrap() {
            m.partial_fit(&inst).unwrap();
        }
        let w = m.weights().unwrap();
        assert!(w[0] > w[1]);
        assert_eq!(m.active_member(), Some(0));
        assert_eq!(m.predict(&[0.9, 0.1]).unwrap(), 1);
    }

    #[test]
    fn execution_modes_agree_on_default_roster() {
        let p = GeneratorParams::default();
        let schema = build_generator(Family::Sea, 0, 1, &p).unwrap().schema().clone();
        let roster: Vec<(String, Params)> =
            DEFAULT_ROSTER.iter().map(|n| (n.to_string(), Params::default())).collect();
        let cfg = EvalConfig {
            max_samples: Some(2000),
            ..EvalConfig::default()
        };
        let run_with = |exec| {
            let mut g = build_generator(Family::Sea, 0, 1, &p).unwrap();
            let mut m = MetaEnsemble::from_roster(schema.clone(), &roster, MetaMode::Meta, 300, 1, exec).unwrap();
            run_prequential(&mut g, &mut m, &cfg).unwrap().records
        };
        assert_eq!(run_with(Execution::Sequential), run_with(Execution::Parallel));
    }
}
