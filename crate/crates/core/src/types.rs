//! Shared domain types: schemas, instances, stream sources and the
//! classification metrics every evaluator reports.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    /// Dense index into `values`; the arity is `values.len()`.
    Categorical { values: Vec<String> },
}

impl FeatureKind {
    pub fn categorical<S: Into<String>>(values: impl IntoIterator<Item = S>) -> Self {
        FeatureKind::Categorical {
            values: values.into_iter().map(Into::into).collect(),
        }
    }

    pub fn arity(&self) -> Option<usize> {
        match self {
            FeatureKind::Numeric => None,
            FeatureKind::Categorical { values } => Some(values.len()),
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, FeatureKind::Numeric)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
}

impl Feature {
    pub fn numeric(name: impl Into<String>) -> Self {
        Feature {
            name: name.into(),
            kind: FeatureKind::Numeric,
        }
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        values: impl IntoIterator<Item = S>,
    ) -> Self {
        Feature {
            name: name.into(),
            kind: FeatureKind::categorical(values),
        }
    }
}

/// Feature layout and target domain of a stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub features: Vec<Feature>,
    pub label: String,
    pub classes: Vec<String>,
}

impl FeatureSchema {
    /// Builds a schema, rejecting duplicate names, categorical features with
    /// fewer than two values and fewer than two classes.
    pub fn new(
        features: Vec<Feature>,
        label: impl Into<String>,
        classes: Vec<String>,
    ) -> Result<Self> {
        let schema = FeatureSchema {
            features,
            label: label.into(),
            classes,
        };
        schema.check()?;
        Ok(schema)
    }

    pub fn check(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for f in &self.features {
            if !seen.insert(f.name.as_str()) {
                return Err(Error::InvalidSchema(format!(
                    "duplicate feature name `{}`",
                    f.name
                )));
            }
            if let Some(arity) = f.kind.arity() {
                if arity < 2 {
                    return Err(Error::InvalidSchema(format!(
                        "categorical feature `{}` has arity {arity} (< 2)",
                        f.name
                    )));
                }
            }
        }
        if self.classes.len() < 2 {
            return Err(Error::InvalidSchema(format!(
                "{} classes declared, at least 2 required",
                self.classes.len()
            )));
        }
        Ok(())
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == label)
    }

    /// Width of the one-hot expansion used by linear learners: one column per
    /// numeric feature plus one per categorical value.
    pub fn one_hot_width(&self) -> usize {
        self.features
            .iter()
            .map(|f| f.kind.arity().unwrap_or(1))
            .sum()
    }

    /// Expands `x` into `out` (cleared first), numerics copied, categoricals
    /// as indicator blocks.
    pub fn one_hot_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for (f, &v) in self.features.iter().zip(x) {
            match f.kind.arity() {
                None => out.push(v),
                Some(arity) => {
                    let hot = v as usize;
                    out.extend((0..arity).map(|i| if i == hot { 1.0 } else { 0.0 }));
                }
            }
        }
    }
}

/// One stream sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    /// Numeric values as reals, categorical values as their dense index.
    pub x: Vec<f64>,
    pub y: Option<usize>,
    /// Assigned by the stream source, starting at 0.
    pub seq: u64,
}

impl Instance {
    pub fn new(x: Vec<f64>, y: Option<usize>, seq: u64) -> Self {
        Instance { x, y, seq }
    }

    pub fn labeled(x: Vec<f64>, y: usize, seq: u64) -> Self {
        Instance { x, y: Some(y), seq }
    }

    pub fn label(&self) -> Result<usize> {
        self.y.ok_or(Error::Unlabeled { seq: self.seq })
    }
}

/// Checks `instance` against `schema` and hands it back unchanged.
pub fn validate_instance(instance: Instance, schema: &FeatureSchema) -> Result<Instance> {
    if instance.x.len() != schema.n_features() {
        return Err(Error::DimensionMismatch {
            expected: schema.n_features(),
            actual: instance.x.len(),
        });
    }
    for (f, &v) in schema.features.iter().zip(&instance.x) {
        match f.kind.arity() {
            None if !v.is_finite() => {
                return Err(Error::NonFinite {
                    feature: f.name.clone(),
                })
            }
            None => {}
            Some(arity) => {
                if !(v >= 0.0 && v.fract() == 0.0 && (v as usize) < arity) {
                    return Err(Error::CategoricalOutOfRange {
                        feature: f.name.clone(),
                        value: v,
                        arity,
                    });
                }
            }
        }
    }
    if let Some(y) = instance.y {
        if y >= schema.n_classes() {
            return Err(Error::UnknownClass {
                class: y,
                n_classes: schema.n_classes(),
            });
        }
    }
    Ok(instance)
}

/// Three-level detector / predictor health, ordered by severity.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum PredictorStatus {
    #[default]
    Stable,
    Warning,
    Drift,
}

impl PredictorStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            PredictorStatus::Stable => "stable",
            PredictorStatus::Warning => "warning",
            PredictorStatus::Drift => "drift",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "stable" => Some(PredictorStatus::Stable),
            "warning" => Some(PredictorStatus::Warning),
            "drift" => Some(PredictorStatus::Drift),
            _ => None,
        }
    }
}

/// True class on rows, predicted class on columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    n: usize,
    counts: Vec<u64>,
    total: u64,
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize) -> Self {
        ConfusionMatrix {
            n: n_classes,
            counts: vec![0; n_classes * n_classes],
            total: 0,
        }
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Self {
        let n = rows.len();
        let counts: Vec<u64> = rows
            .iter()
            .flat_map(|r| {
                assert_eq!(r.len(), n, "confusion matrix must be square");
                r.iter().copied()
            })
            .collect();
        let total = counts.iter().sum();
        ConfusionMatrix { n, counts, total }
    }

    pub fn n_classes(&self) -> usize {
        self.n
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn get(&self, y_true: usize, y_pred: usize) -> u64 {
        self.counts[y_true * self.n + y_pred]
    }

    pub fn update(&mut self, y_true: usize, y_pred: usize) -> Result<()> {
        if y_true >= self.n || y_pred >= self.n {
            return Err(Error::IndexOutOfRange {
                row: y_true,
                col: y_pred,
                n: self.n,
            });
        }
        self.counts[y_true * self.n + y_pred] += 1;
        self.total += 1;
        Ok(())
    }

    pub fn trace(&self) -> u64 {
        (0..self.n).map(|c| self.get(c, c)).sum()
    }

    pub fn row_sum(&self, c: usize) -> u64 {
        self.counts[c * self.n..(c + 1) * self.n].iter().sum()
    }

    pub fn col_sum(&self, c: usize) -> u64 {
        (0..self.n).map(|r| self.get(r, c)).sum()
    }
}

/// Fraction of scored samples on the diagonal.
pub fn accuracy(m: &ConfusionMatrix) -> Result<f64> {
    if m.total() == 0 {
        return Err(Error::EmptyMatrix);
    }
    Ok(m.trace() as f64 / m.total() as f64)
}

/// Cohen's kappa; 0 when chance agreement is already perfect.
pub fn cohen_kappa(m: &ConfusionMatrix) -> Result<f64> {
    let p_o = accuracy(m)?;
    let total = m.total() as f64;
    let p_e = (0..m.n_classes())
        .map(|c| m.row_sum(c) as f64 * m.col_sum(c) as f64)
        .sum::<f64>()
        / (total * total);
    if (1.0 - p_e).abs() < f64::EPSILON {
        return Ok(0.0);
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Pull-based sequence of instances.
///
/// `Ok(None)` marks the end of a finite source; generators never return it.
pub trait StreamSource: Send {
    fn schema(&self) -> &FeatureSchema;

    fn next_instance(&mut self) -> Result<Option<Instance>>;
}

impl<S: StreamSource + ?Sized> StreamSource for Box<S> {
    fn schema(&self) -> &FeatureSchema {
        (**self).schema()
    }

    fn next_instance(&mut self) -> Result<Option<Instance>> {
        (**self).next_instance()
    }
}

/// A finite, in-memory source.
#[derive(Debug, Clone)]
pub struct VecSource {
    schema: FeatureSchema,
    items: std::vec::IntoIter<Instance>,
}

impl VecSource {
    /// Re-sequences `instances` from 0 in the given order.
    pub fn new(schema: FeatureSchema, instances: Vec<Instance>) -> Self {
        let items: Vec<Instance> = instances
            .into_iter()
            .enumerate()
            .map(|(i, mut inst)| {
                inst.seq = i as u64;
                inst
            })
            .collect();
        VecSource {
            schema,
            items: items.into_iter(),
        }
    }
}

impl StreamSource for VecSource {
    fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    fn next_instance(&mut self) -> Result<Option<Instance>> {
        Ok(self.items.next())
    }
}

/// Truncates a source after `limit` instances.
pub struct Take<S> {
    inner: S,
    remaining: u64,
}

impl<S: StreamSource> Take<S> {
    pub fn new(inner: S, limit: u64) -> Self {
        Take {
            inner,
            remaining: limit,
        }
    }
}

impl<S: StreamSource> StreamSource for Take<S> {
    fn schema(&self) -> &FeatureSchema {
        self.inner.schema()
    }

    fn next_instance(&mut self) -> Result<Option<Instance>> {
        if self.remaining == 0 {
            return Ok(None);
        }
        self.remaining -= 1;
        self.inner.next_instance()
    }
}

/// Pulls up to `n` instances into a vector.
pub fn collect_n<S: StreamSource + ?Sized>(src: &mut S, n: usize) -> Result<Vec<Instance>> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        match src.next_instance()? {
            Some(inst) => out.push(inst),
            None => break,
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn schema3() -> FeatureSchema {
        FeatureSchema::new(
            vec![
                Feature::numeric("a"),
                Feature::categorical("b", ["x", "y", "z"]),
                Feature::numeric("c"),
            ],
            "class",
            vec!["0".into(), "1".into()],
        )
        .unwrap()
    }

    #[test]
    fn conformant_instance_is_returned_unchanged() {
        let inst = Instance::labeled(vec![0.5, 2.0, -1.0], 1, 4);
        let out = validate_instance(inst.clone(), &schema3()).unwrap();
        assert_eq!(out, inst);
    }

    #[test]
    fn short_instance_is_a_dimension_mismatch() {
        let err = validate_instance(Instance::labeled(vec![0.5, 2.0], 0, 0), &schema3());
        assert!(matches!(
            err,
            Err(Error::DimensionMismatch {
                expected: 3,
                actual: 2
            })
        ));
    }

    #[test]
    fn categorical_out_of_range() {
        let err = validate_instance(Instance::labeled(vec![0.5, 5.0, 1.0], 0, 0), &schema3());
        assert!(matches!(
            err,
            Err(Error::CategoricalOutOfRange { arity: 3, .. })
        ));
    }

    #[test]
    fn unknown_class() {
        let err = validate_instance(Instance::labeled(vec![0.5, 1.0, 1.0], 2, 0), &schema3());
        assert!(matches!(err, Err(Error::UnknownClass { class: 2, .. })));
    }

    #[test]
    fn schema_rejects_degenerate_layouts() {
        let dup = FeatureSchema::new(
            vec![Feature::numeric("a"), Feature::numeric("a")],
            "y",
            vec!["0".into(), "1".into()],
        );
        assert!(dup.is_err());
        let unary = FeatureSchema::new(
            vec![Feature::categorical("a", ["only"])],
            "y",
            vec!["0".into(), "1".into()],
        );
        assert!(unary.is_err());
        let one_class = FeatureSchema::new(vec![Feature::numeric("a")], "y", vec!["0".into()]);
        assert!(one_class.is_err());
    }

    #[test]
    fn one_hot_expansion() {
        let s = schema3();
        let mut out = Vec::new();
        s.one_hot_into(&[0.5, 1.0, 3.0], &mut out);
        assert_eq!(out, vec![0.5, 0.0, 1.0, 0.0, 3.0]);
        assert_eq!(s.one_hot_width(), 5);
    }

    #[test]
    fn confusion_update_increments_one_cell() {
        let mut m = ConfusionMatrix::new(2);
        m.update(0, 0).unwrap();
        assert_eq!(m.get(0, 0), 1);
        let mut m = ConfusionMatrix::new(2);
        m.update(0, 1).unwrap();
        assert_eq!(m.get(0, 1), 1);
        assert_eq!(m.total(), 1);
        assert!(m.update(2, 0).is_err());
    }

    #[test]
    fn confusion_counts_hundred_updates() {
        let mut m = ConfusionMatrix::new(2);
        for (r, c, times) in [(0, 0, 40), (0, 1, 10), (1, 0, 5), (1, 1, 45)] {
            for _ in 0..times {
                m.update(r, c).unwrap();
            }
        }
        assert_eq!(m.total(), 100);
        assert_eq!(m, ConfusionMatrix::from_rows(&[vec![40, 10], vec![5, 45]]));
    }

    #[test]
    fn accuracy_cases() {
        let diag = ConfusionMatrix::from_rows(&[vec![7, 0], vec![0, 3]]);
        assert_eq!(accuracy(&diag).unwrap(), 1.0);
        let m = ConfusionMatrix::from_rows(&[vec![40, 10], vec![5, 45]]);
        assert!((accuracy(&m).unwrap() - 0.85).abs() < 1e-15);
        let off = ConfusionMatrix::from_rows(&[vec![0, 4], vec![6, 0]]);
        assert_eq!(accuracy(&off).unwrap(), 0.0);
        assert!(matches!(
            accuracy(&ConfusionMatrix::new(2)),
            Err(Error::EmptyMatrix)
        ));
    }

    #[test]
    fn kappa_cases() {
        let perfect = ConfusionMatrix::from_rows(&[vec![50, 0], vec![0, 50]]);
        assert!((cohen_kappa(&perfect).unwrap() - 1.0).abs() < 1e-15);
        let m = ConfusionMatrix::from_rows(&[vec![40, 10], vec![5, 45]]);
        assert!((cohen_kappa(&m).unwrap() - 0.7).abs() < 1e-12);
        let constant = ConfusionMatrix::from_rows(&[vec![50, 0], vec![50, 0]]);
        assert_eq!(cohen_kappa(&constant).unwrap(), 0.0);
        let degenerate = ConfusionMatrix::from_rows(&[vec![9, 0], vec![0, 0]]);
        assert_eq!(cohen_kappa(&degenerate).unwrap(), 0.0);
        assert!(cohen_kappa(&ConfusionMatrix::new(3)).is_err());
    }

    #[test]
    fn status_severity_order() {
        assert!(PredictorStatus::Stable < PredictorStatus::Warning);
        assert!(PredictorStatus::Warning < PredictorStatus::Drift);
    }

    fn pairs(c: usize) -> impl Strategy<Value = Vec<(usize, usize)>> {
        prop::collection::vec((0..c, 0..c), 1..200)
    }

    proptest! {
        #[test]
        fn accuracy_invariant_under_class_permutation(
            updates in pairs(4),
            perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle(),
        ) {
            let mut a = ConfusionMatrix::new(4);
            let mut b = ConfusionMatrix::new(4);
            for &(t, p) in &updates {
                a.update(t, p).unwrap();
                b.update(perm[t], perm[p]).unwrap();
            }
            prop_assert_eq!(accuracy(&a).unwrap(), accuracy(&b).unwrap());
        }

        #[test]
        fn kappa_never_exceeds_accuracy(updates in pairs(3)) {
            let mut m = ConfusionMatrix::new(3);
            for &(t, p) in &updates {
                m.update(t, p).unwrap();
            }
            let k = cohen_kappa(&m).unwrap();
            let a = accuracy(&m).unwrap();
            prop_assert!(k <= a + 1e-12);
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&k));
        }

        #[test]
        fn update_order_does_not_matter(
            updates in pairs(3).prop_shuffle(),
        ) {
            let mut fwd = ConfusionMatrix::new(3);
            let mut rev = ConfusionMatrix::new(3);
            for &(t, p) in &updates {
                fwd.update(t, p).unwrap();
            }
            for &(t, p) in updates.iter().rev() {
                rev.update(t, p).unwrap();
            }
            prop_assert_eq!(fwd, rev);
        }
    }
}
