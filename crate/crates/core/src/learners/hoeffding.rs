use std::str::FromStr;

use crate::drift::{Adwin, DriftDetector};
use crate::types::{FeatureSchema, Instance, PredictorStatus};
use crate::{Error, Result};

use super::params::Params;
use super::stats::{LeafStats, Observer};
use super::{Learner, LearnerEvent};

/// `sqrt(R² ln(1/δ) / 2n)`.
pub fn hoeffding_bound(range: f64, delta: f64, n: f64) -> Result<f64> {
    if !(range > 0.0 && range.is_finite()) {
        return Err(Error::param("range", "must be positive"));
    }
    if !(n >= 1.0 && n.is_finite()) {
        return Err(Error::param("n", "must be at least 1"));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::param("delta", "must lie in (0, 1]"));
    }
    Ok((range * range * (1.0 / delta).ln() / (2.0 * n)).sqrt())
}

/// How a leaf turns its statistics into a class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeafPrediction {
    /// Majority class.
    Mc,
    /// Naive Bayes over the leaf statistics.
    Nb,
    /// Whichever of the two has been more accurate at this leaf.
    Nba,
}

impl FromStr for LeafPrediction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mc" => Ok(LeafPrediction::Mc),
            "nb" => Ok(LeafPrediction::Nb),
            "nba" => Ok(LeafPrediction::Nba),
            other => Err(Error::param(
                "leaf_prediction",
                format!("`{other}` is not one of mc, nb, nba"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HtConfig {
    pub grace: usize,
    pub delta: f64,
    pub tau: f64,
    pub leaf_prediction: LeafPrediction,
    pub split_points: usize,
    /// Grow alternate subtrees where per-node ADWIN monitors flag drift.
    pub adaptive: bool,
    pub adwin_delta: f64,
}

impl Default for HtConfig {
    fn default() -> Self {
        HtConfig {
            grace: 200,
            delta: 1e-7,
            tau: 0.05,
            leaf_prediction: LeafPrediction::Nba,
            split_points: 10,
            adaptive: false,
            adwin_delta: 0.002,
        }
    }
}

impl HtConfig {
    pub fn from_params(params: &Params, adaptive: bool) -> Result<Self> {
        let d = HtConfig::default();
        let cfg = HtConfig {
            grace: params.usize_or("grace", d.grace)?,
            delta: params.f64_or("delta", d.delta)?,
            tau: params.f64_or("tau", d.tau)?,
            leaf_prediction: params.str_or("leaf_prediction", "nba")?.parse()?,
            split_points: params.usize_or("split_points", d.split_points)?,
            adaptive,
            adwin_delta: if adaptive {
                params.f64_or("adwin_delta", d.adwin_delta)?
            } else {
                d.adwin_delta
            },
        };
        if cfg.grace == 0 {
            return Err(Error::param("grace", "must be positive"));
        }
        if !(cfg.delta > 0.0 && cfg.delta < 1.0) {
            return Err(Error::param("delta", "must lie in (0, 1)"));
        }
        if !(cfg.adwin_delta > 0.0 && cfg.adwin_delta < 1.0) {
            return Err(Error::param("adwin_delta", "must lie in (0, 1)"));
        }
        if cfg.tau < 0.0 {
            return Err(Error::param("tau", "must be non-negative"));
        }
        if cfg.split_points == 0 {
            return Err(Error::param("split_points", "must be positive"));
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitTest {
    /// Branch 0 takes `x <= threshold`, branch 1 the rest.
    Numeric { feature: usize, threshold: f64 },
    /// One branch per category.
    Nominal { feature: usize },
}

impl SplitTest {
    pub fn feature(&self) -> usize {
        match *self {
            SplitTest::Numeric { feature, .. } | SplitTest::Nominal { feature } => feature,
        }
    }

    fn branch(&self, x: &[f64]) -> usize {
        match *self {
            SplitTest::Numeric { feature, threshold } => usize::from(x[feature] > threshold),
            SplitTest::Nominal { feature } => x[feature] as usize,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SplitDecision {
    NoSplit,
    Split {
        test: SplitTest,
        gain: f64,
        runner_up: f64,
        epsilon: f64,
        /// Estimated class distribution of each branch.
        branches: Vec<Vec<f64>>,
    },
}

fn entropy(dist: &[f64]) -> f64 {
    let n: f64 = dist.iter().sum();
    if n <= 0.0 {
        return 0.0;
    }
    -dist
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| (c / n) * (c / n).log2())
        .sum::<f64>()
}

fn info_gain(parent: &[f64], branches: &[Vec<f64>]) -> f64 {
    let n: f64 = parent.iter().sum();
    let after: f64 = branches
        .iter()
        .map(|b| b.iter().sum::<f64>() / n * entropy(b))
        .sum();
    entropy(parent) - after
}

/// Best candidate split on one feature: `(gain, test, branches)`.
fn best_for_feature(
    stats: &LeafStats,
    feature: usize,
    split_points: usize,
) -> Option<(f64, SplitTest, Vec<Vec<f64>>)> {
    let parent = stats.class_counts();
    match &stats.observers[feature] {
        Observer::Numeric(per_class) => {
            let seen = per_class.iter().filter(|g| g.weight() > 0.0);
            let lo = seen.clone().map(|g| g.min()).fold(f64::INFINITY, f64::min);
            let hi = seen.map(|g| g.max()).fold(f64::NEG_INFINITY, f64::max);
            if !(lo < hi) {
                return None;
            }
            let mut best: Option<(f64, SplitTest, Vec<Vec<f64>>)> = None;
            for i in 1..=split_points {
                let threshold = lo + (hi - lo) * i as f64 / (split_points + 1) as f64;
                let mut left = vec![0.0; parent.len()];
                let mut right = vec![0.0; parent.len()];
                for (c, g) in per_class.iter().enumerate() {
                    (left[c], right[c]) = g.split_weights(threshold);
                }
                let branches = vec![left, right];
                let gain = info_gain(parent, &branches);
                if best.as_ref().is_none_or(|b| gain > b.0) {
                    best = Some((gain, SplitTest::Numeric { feature, threshold }, branches));
                }
            }
            best
        }
        Observer::Nominal(counts) => {
            let nonempty = counts.iter().filter(|b| b.iter().sum::<f64>() > 0.0).count();
            if nonempty < 2 {
                return None;
            }
            Some((
                info_gain(parent, counts),
                SplitTest::Nominal { feature },
                counts.clone(),
            ))
        }
    }
}

/// Split check at a leaf using information gain and the Hoeffding bound
/// with range `log2(n_classes)`.
///
/// Splits iff the best gain is positive and either beats the runner-up by
/// more than ε or ε has fallen below `tau`. Equal gains go to the lowest
/// feature index.
pub fn evaluate_split(stats: &LeafStats, delta: f64, tau: f64, split_points: usize) -> SplitDecision {
    let n = stats.total();
    if n < 1.0 || stats.is_pure() {
        return SplitDecision::NoSplit;
    }
    let mut best: Option<(f64, SplitTest, Vec<Vec<f64>>)> = None;
    let mut runner_up = 0.0_f64;
    for f in 0..stats.observers.len() {
        let Some(cand) = best_for_feature(stats, f, split_points) else {
            continue;
        };
        match &best {
            Some(b) if cand.0 <= b.0 => runner_up = runner_up.max(cand.0),
            _ => {
                if let Some(b) = &best {
                    runner_up = runner_up.max(b.0);
                }
                best = Some(cand);
            }
        }
    }
    let Some((gain, test, branches)) = best else {
        return SplitDecision::NoSplit;
    };
    let range = (stats.class_counts().len().max(2) as f64).log2();
    let epsilon = hoeffding_bound(range, delta, n).expect("validated inputs");
    if gain > 0.0 && (gain - runner_up > epsilon || epsilon < tau) {
        SplitDecision::Split {
            test,
            gain,
            runner_up,
            epsilon,
            branches,
        }
    } else {
        SplitDecision::NoSplit
    }
}

#[derive(Debug, Clone)]
struct Leaf {
    stats: LeafStats,
    since_check: usize,
    mc_hits: f64,
    nb_hits: f64,
}

impl Leaf {
    fn new(stats: LeafStats) -> Self {
        Leaf {
            stats,
            since_check: 0,
            mc_hits: 0.0,
            nb_hits: 0.0,
        }
    }

    fn predict(&self, x: &[f64], mode: LeafPrediction) -> usize {
        let use_nb = match mode {
            LeafPrediction::Mc => false,
            LeafPrediction::Nb => true,
            LeafPrediction::Nba => self.nb_hits > self.mc_hits,
        };
        if use_nb && self.stats.total() > 0.0 {
            self.stats.nb_predict(x)
        } else {
            self.stats.majority()
        }
    }
}

#[derive(Debug, Clone)]
enum Body {
    Leaf(Leaf),
    Split { test: SplitTest, children: Vec<Node> },
}

#[derive(Debug, Clone)]
struct Node {
    body: Body,
    /// Error monitor, adaptive trees only.
    monitor: Option<Adwin>,
    alternate: Option<Box<Node>>,
}

/// Tallies shared across one learning step.
#[derive(Default)]
struct Effects {
    drifts: usize,
    swaps: u64,
    alternates_created: u64,
}

impl Node {
    fn leaf(stats: LeafStats, cfg: &HtConfig) -> Self {
        Node {
            body: Body::Leaf(Leaf::new(stats)),
            monitor: cfg.adaptive.then(|| Adwin::new(cfg.adwin_delta)),
            alternate: None,
        }
    }

    fn predict(&self, x: &[f64], mode: LeafPrediction) -> usize {
        match &self.body {
            Body::Leaf(l) => l.predict(x, mode),
            Body::Split { test, children } => children[test.branch(x)].predict(x, mode),
        }
    }

    fn learn(
        &mut self,
        x: &[f64],
        y: usize,
        cfg: &HtConfig,
        schema: &FeatureSchema,
        fx: &mut Effects,
    ) {
        let wrong = self.monitor.is_some() && self.predict(x, cfg.leaf_prediction) != y;
        if let Some(monitor) = &mut self.monitor {
            let before = monitor.mean();
            let status = monitor
                .update(f64::from(u8::from(wrong)))
                .expect("error bits are in range");
            if status == PredictorStatus::Drift {
                fx.drifts += 1;
                let increased = monitor.mean() > before;
                match (&self.alternate, &self.body) {
                    (None, Body::Split { .. }) if increased => {
                        let fresh = LeafStats::new(schema);
                        self.alternate = Some(Box::new(Node::leaf(fresh, cfg)));
                        fx.alternates_created += 1;
                    }
                    (Some(alt), _) => {
                        let alt_err = alt.monitor.as_ref().map_or(1.0, Adwin::mean);
                        let alt_width = alt.monitor.as_ref().map_or(0, Adwin::width);
                        if alt_width > 0 && alt_err < self.monitor.as_ref().unwrap().mean() {
                            self.swap_in_alternate(fx);
                        }
                    }
                    _ => {}
                }
            }
        }
        if self.alternate.is_some() {
            self.settle_alternate(fx);
        }
        if let Some(alt) = &mut self.alternate {
            alt.learn(x, y, cfg, schema, fx);
        }
        match &mut self.body {
            Body::Split { test, children } => {
                let b = test.branch(x);
                children[b].learn(x, y, cfg, schema, fx);
            }
            Body::Leaf(leaf) => {
                if cfg.leaf_prediction == LeafPrediction::Nba && leaf.stats.total() > 0.0 {
                    leaf.mc_hits += f64::from(u8::from(leaf.stats.majority() == y));
                    leaf.nb_hits += f64::from(u8::from(leaf.stats.nb_predict(x) == y));
                }
                leaf.stats.update(x, y);
                leaf.since_check += 1;
                if leaf.since_check >= cfg.grace {
                    leaf.since_check = 0;
                    if let SplitDecision::Split { test, branches, .. } =
                        evaluate_split(&leaf.stats, cfg.delta, cfg.tau, cfg.split_points)
                    {
                        let parent = leaf.stats.class_counts().to_vec();
                        let children = branches
                            .into_iter()
                            .map(|dist| {
                                let dist = if dist.iter().sum::<f64>() > 0.0 {
                                    dist
                                } else {
                                    parent.clone()
                                };
                                Node::leaf(LeafStats::with_counts(schema, dist), cfg)
                            })
                            .collect();
                        self.body = Body::Split { test, children };
                    }
                }
            }
        }
    }

    fn swap_in_alternate(&mut self, fx: &mut Effects) {
        if let Some(alt) = self.alternate.take() {
            *self = *alt;
            fx.swaps += 1;
        }
    }

    /// Significance test between this node and its alternate once both
    /// monitors hold enough evidence: swap if the alternate is clearly
    /// better, discard it if clearly worse.
    fn settle_alternate(&mut self, fx: &mut Effects) {
        let (Some(main), Some(alt)) = (
            self.monitor.as_ref(),
            self.alternate.as_ref().and_then(|a| a.monitor.as_ref()),
        ) else {
            return;
        };
        if main.width() <= 300 || alt.width() <= 300 {
            return;
        }
        let (old_err, alt_err) = (main.mean(), alt.mean());
        let f_n = 1.0 / alt.width() as f64 + 1.0 / main.width() as f64;
        let bound = (2.0 * old_err * (1.0 - old_err) * (2.0_f64 / 0.05).ln() * f_n).sqrt();
        if bound < old_err - alt_err {
            self.swap_in_alternate(fx);
        } else if bound < alt_err - old_err {
            self.alternate = None;
        }
    }

    fn count(&self, f: &mut impl FnMut(&Node)) {
        f(self);
        if let Body::Split { children, .. } = &self.body {
            for c in children {
                c.count(f);
            }
        }
    }

    fn depth(&self) -> usize {
        match &self.body {
            Body::Leaf(_) => 0,
            Body::Split { children, .. } => 1 + children.iter().map(Node::depth).max().unwrap_or(0),
        }
    }
}

/// Incremental decision tree that splits once the Hoeffding bound says the
/// best split is reliably better than the runner-up. With
/// [`HtConfig::adaptive`] it becomes a Hoeffding adaptive tree.
#[derive(Debug, Clone)]
pub struct HoeffdingTree {
    schema: FeatureSchema,
    cfg: HtConfig,
    root: Node,
    n_seen: u64,
    n_swaps: u64,
    n_alternates: u64,
    events: Vec<LearnerEvent>,
}

impl HoeffdingTree {
    pub fn new(schema: FeatureSchema, cfg: HtConfig) -> Self {
        HoeffdingTree {
            root: Node::leaf(LeafStats::new(&schema), &cfg),
            schema,
            cfg,
            n_seen: 0,
            n_swaps: 0,
            n_alternates: 0,
            events: Vec::new(),
        }
    }

    pub fn config(&self) -> &HtConfig {
        &self.cfg
    }

    pub fn n_nodes(&self) -> usize {
        let mut n = 0;
        self.root.count(&mut |_| n += 1);
        n
    }

    pub fn n_leaves(&self) -> usize {
        let mut n = 0;
        self.root.count(&mut |node| n += usize::from(matches!(node.body, Body::Leaf(_))));
        n
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    /// Alternate subtrees currently growing.
    pub fn n_active_alternates(&self) -> usize {
        let mut n = 0;
        self.root.count(&mut |node| n += usize::from(node.alternate.is_some()));
        n
    }

    pub fn n_alternates_created(&self) -> u64 {
        self.n_alternates
    }

    pub fn n_swaps(&self) -> u64 {
        self.n_swaps
    }

    /// Feature tested at the root, if it has split.
    pub fn root_feature(&self) -> Option<usize> {
        match &self.root.body {
            Body::Split { test, .. } => Some(test.feature()),
            Body::Leaf(_) => None,
        }
    }
}

impl Learner for HoeffdingTree {
    fn name(&self) -> &str {
        if self.cfg.adaptive {
            "hoeffding_adaptive_tree"
        } else {
            "hoeffding_tree"
        }
    }

    fn partial_fit(&mut self, inst: &Instance) -> Result<()> {
        let y = inst.label()?;
        if y >= self.schema.n_classes() {
            return Err(Error::UnknownClass {
                class: y,
                n_classes: self.schema.n_classes(),
            });
        }
        let mut fx = Effects::default();
        self.root.learn(&inst.x, y, &self.cfg, &self.schema, &mut fx);
        self.n_seen += 1;
        self.n_swaps += fx.swaps;
        self.n_alternates += fx.alternates_created;
        if fx.drifts > 0 {
            self.events.push(LearnerEvent::Drift {
                detector: "adwin".into(),
                status: PredictorStatus::Drift,
            });
        }
        Ok(())
    }

    fn predict(&self, x: &[f64]) -> Result<usize> {
        if self.n_seen == 0 {
            return Err(Error::Untrained);
        }
        Ok(self.root.predict(x, self.cfg.leaf_prediction))
    }

    fn take_events(&mut self) -> Vec<LearnerEvent> {
        std::mem::take(&mut self.events)
    }
}
