use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::par::{self, Execution};
use crate::types::{FeatureSchema, Instance};
use crate::{sub_seed, Error, Result};

use super::{argmax, Learner};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CartConfig {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
    /// Features tried per split; `None` tries all of them.
    pub max_features: Option<usize>,
}

impl Default for CartConfig {
    fn default() -> Self {
        CartConfig {
            max_depth: 20,
            min_samples_leaf: 1,
            min_samples_split: 2,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Test {
    /// `x <= threshold` goes left.
    Below(f64),
    /// `x == value` goes left.
    Is(f64),
}

impl Test {
    fn goes_left(self, v: f64) -> bool {
        match self {
            Test::Below(t) => v <= t,
            Test::Is(c) => v == c,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(usize),
    Split {
        feature: usize,
        test: Test,
        left: usize,
        right: usize,
    },
}

fn gini(counts: &[f64], n: f64) -> f64 {
    if n <= 0.0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|c| (c / n) * (c / n)).sum::<f64>()
}

struct Builder<'a> {
    schema: &'a FeatureSchema,
    cfg: CartConfig,
    xs: &'a [Vec<f64>],
    ys: &'a [usize],
    nodes: Vec<Node>,
    rng: ChaCha8Rng,
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<f64> {
        let mut c = vec![0.0; self.schema.n_classes()];
        for &i in idx {
            c[self.ys[i]] += 1.0;
        }
        c
    }

    fn features(&mut self) -> Vec<usize> {
        let d = self.schema.n_features();
        match self.cfg.max_features {
            Some(k) if k < d => {
                let mut f = sample(&mut self.rng, d, k.max(1)).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        }
    }

    /// Best (impurity, feature, test) over candidate features; lowest
    /// weighted Gini wins, earlier candidates win ties.
    fn best_split(&mut self, idx: &[usize]) -> Option<(f64, usize, Test)> {
        let n = idx.len() as f64;
        let total = self.counts(idx);
        let min_leaf = self.cfg.min_samples_leaf.max(1);
        let mut best: Option<(f64, usize, Test)> = None;
        let consider = |imp: f64, f: usize, t: Test, best: &mut Option<(f64, usize, Test)>| {
            if best.is_none_or(|b| imp < b.0 - 1e-12) {
                *best = Some((imp, f, t));
            }
        };
        for f in self.features() {
            match self.schema.features[f].kind.arity() {
                None => {
                    let mut order: Vec<usize> = idx.to_vec();
                    order.sort_by(|&a, &b| self.xs[a][f].total_cmp(&self.xs[b][f]));
                    let mut left = vec![0.0; total.len()];
                    for k in 0..order.len() - 1 {
                        left[self.ys[order[k]]] += 1.0;
                        let (v, next) = (self.xs[order[k]][f], self.xs[order[k + 1]][f]);
                        let nl = k + 1;
                        if v == next || nl < min_leaf || order.len() - nl < min_leaf {
                            continue;
                        }
                        let right: Vec<f64> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
                        let (nl, nr) = (nl as f64, n - nl as f64);
                        let imp = (nl * gini(&left, nl) + nr * gini(&right, nr)) / n;
                        consider(imp, f, Test::Below(v + (next - v) / 2.0), &mut best);
                    }
                }
                Some(arity) => {
                    let mut per_value = vec![vec![0.0; total.len()]; arity];
                    for &i in idx {
                        per_value[self.xs[i][f] as usize][self.ys[i]] += 1.0;
                    }
                    for (value, left) in per_value.iter().enumerate() {
                        let nl: f64 = left.iter().sum();
                        let nr = n - nl;
                        if (nl as usize) < min_leaf || (nr as usize) < min_leaf {
                            continue;
                        }
                        let right: Vec<f64> = total.iter().zip(left).map(|(t, l)| t - l).collect();
                        let imp = (nl * gini(left, nl) + nr * gini(&right, nr)) / n;
                        consider(imp, f, Test::Is(value as f64), &mut best);
                    }
                }
            }
        }
        best.filter(|b| b.0 < gini(&total, n) - 1e-12)
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let counts = self.counts(&idx);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf(argmax(&counts)));
        let pure = counts.iter().filter(|&&c| c > 0.0).count() < 2;
        if pure || depth >= self.cfg.max_depth || idx.len() < self.cfg.min_samples_split.max(2) {
            return id;
        }
        let Some((_, feature, test)) = self.best_split(&idx) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) =
            idx.into_iter().partition(|&i| test.goes_left(self.xs[i][feature]));
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            test,
            left,
            right,
        };
        id
    }
}

/// Gini-split classification tree fitted once on a buffer.
#[derive(Debug, Clone)]
pub struct Cart {
    schema: FeatureSchema,
    cfg: CartConfig,
    seed: u64,
    nodes: Vec<Node>,
}

impl Cart {
    pub fn new(schema: FeatureSchema, cfg: CartConfig, seed: u64) -> Self {
        Cart {
            schema,
            cfg,
            seed,
            nodes: Vec::new(),
        }
    }

    fn fit_rows(&mut self, xs: &[Vec<f64>], ys: &[usize], rows: Vec<usize>) {
        let mut b = Builder {
            schema: &self.schema,
            cfg: self.cfg,
            xs,
            ys,
            nodes: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(self.seed),
        };
        b.grow(rows, 0);
        self.nodes = b.nodes;
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match nodes[id] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        if self.nodes.is_empty() {
            0
        } else {
            walk(&self.nodes, 0)
        }
    }

    fn leaf_class(&self, x: &[f64]) -> usize {
        let mut id = 0;
        loop {
            match self.nodes[id] {
                Node::Leaf(c) => return c,
                Node::Split {
                    feature,
                    test,
                    left,
                    right,
                } => id = if test.goes_left(x[feature]) { left } else { right },
            }
        }
    }
}

fn unpack(buffer: &[Instance]) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    if buffer.is_empty() {
        return Err(Error::Empty("training buffer"));
    }
    let ys = buffer.iter().map(Instance::label).collect::<Result<_>>()?;
    Ok((buffer.iter().map(|i| i.x.clone()).collect(), ys))
}

impl Learner for Cart {
    fn name(&self) -> &str {
        "cart_batch"
    }

    fn partial_fit(&mut self, _inst: &Instance) -> Result<()> {
        if self.is_frozen() {
            Err(Error::FrozenLearner)
        } else {
            Err(Error::BatchOnly(self.name().into()))
        }
    }

    fn fit_batch(&mut self, buffer: &[Instance], _epochs: usize) -> Result<()> {
        if self.is_frozen() {
            return Err(Error::FrozenLearner);
        }
        let (xs, ys) = unpack(buffer)?;
        self.fit_rows(&xs, &ys, (0..xs.len()).collect());
        Ok(())
    }

    fn predict(&self, x: &[f64]) -> Result<usize> {
        if self.nodes.is_empty() {
            return Err(Error::Untrained);
        }
        Ok(self.leaf_class(x))
    }

    fn is_frozen(&self) -> bool {
        !self.nodes.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomForestConfig {
    pub n_trees: usize,
    /// `max_features: None` means `round(sqrt(d))`.
    pub tree: CartConfig,
    pub bootstrap: bool,
}

impl Default for RandomForestConfig {
    fn default() -> Self {
        RandomForestConfig {
            n_trees: 10,
            tree: CartConfig::default(),
            bootstrap: true,
        }
    }
}

/// Bagged CART trees with per-split feature subsampling; majority vote.
#[derive(Debug, Clone)]
pub struct RandomForest {
    schema: FeatureSchema,
    cfg: RandomForestConfig,
    seed: u64,
    exec: Execution,
    trees: Vec<Cart>,
}

impl RandomForest {
    pub fn new(
        schema: FeatureSchema,
        cfg: RandomForestConfig,
        seed: u64,
        exec: Execution,
    ) -> Result<Self> {
        if cfg.n_trees == 0 {
            return Err(Error::param("n_trees", "must be positive"));
        }
        Ok(RandomForest {
            schema,
            cfg,
            seed,
            exec,
            trees: Vec::new(),
        })
    }

    pub fn trees(&self) -> &[Cart] {
        &self.trees
    }
}

impl Learner for RandomForest {
    fn name(&self) -> &str {
        "random_forest_batch"
    }

    fn partial_fit(&mut self, _inst: &Instance) -> Result<()> {
        if self.is_frozen() {
            Err(Error::FrozenLearner)
        } else {
            Err(Error::BatchOnly(self.name().into()))
        }
    }

    fn fit_batch(&mut self, buffer: &[Instance], _epochs: usize) -> Result<()> {
        if self.is_frozen() {
            return Err(Error::FrozenLearner);
        }
        let (xs, ys) = unpack(buffer)?;
        let d = self.schema.n_features();
        let mut tree_cfg = self.cfg.tree;
        if tree_cfg.max_features.is_none() {
            tree_cfg.max_features = Some(((d as f64).sqrt().round() as usize).max(1));
        }
        let (schema, seed, bootstrap) = (&self.schema, self.seed, self.cfg.bootstrap);
        self.trees = par::map_range(self.exec, self.cfg.n_trees, |t| {
            let tree_seed = sub_seed(seed, &format!("tree-{t}"));
            let n = xs.len();
            let rows = if bootstrap {
                let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(tree_seed, "bootstrap"));
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut tree = Cart::new(schema.clone(), tree_cfg, tree_seed);
            tree.fit_rows(&xs, &ys, rows);
            tree
        });
        Ok(())
    }

    fn predict(&self, x: &[f64]) -> Result<usize> {
        if self.trees.is_empty() {
            return Err(Error::Untrained);
        }
        let mut votes = vec![0.0; self.schema.n_classes()];
        for t in &self.trees {
            votes[t.leaf_class(x)] += 1.0;
        }
        Ok(argmax(&votes))
    }

    fn is_frozen(&self) -> bool {
        !self.trees.is_empty()
    }
}
