//! Binary trees grown over presorted feature columns.
//!
//! Two growers share the column bookkeeping: a CART classifier splitting on
//! Gini impurity, and a second-order regression tree fitted to logistic-loss
//! gradients for boosting. Each node keeps, per feature, its sample indices
//! sorted by that feature; a split partitions every column stably, so no
//! node ever re-sorts.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        /// Class-1 fraction for classification trees, output value for
        /// regression trees.
        value: f64,
        samples: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_value(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value, .. } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Columns of sample indices, each sorted by its feature.
pub(crate) fn presort(data: &Dataset, indices: &[usize]) -> Vec<Vec<usize>> {
    (0..data.n_features())
        .map(|f| {
            let mut col = indices.to_vec();
            col.sort_by(|&a, &b| data.value(a, f).total_cmp(&data.value(b, f)).then(a.cmp(&b)));
            col
        })
        .collect()
}

fn partition(columns: Vec<Vec<usize>>, goes_left: &[bool]) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    let mut left = Vec::with_capacity(columns.len());
    let mut right = Vec::with_capacity(columns.len());
    for col in columns {
        let (l, r): (Vec<usize>, Vec<usize>) = col.into_iter().partition(|&i| goes_left[i]);
        left.push(l);
        right.push(r);
    }
    (left, right)
}

fn threshold_between(lo: f64, hi: f64) -> f64 {
    let mid = 0.5 * (lo + hi);
    if mid >= hi {
        lo
    } else {
        mid
    }
}

fn gini(pos: f64, total: f64) -> f64 {
    if total == 0.0 {
        return 0.0;
    }
    let p = pos / total;
    2.0 * p * (1.0 - p)
}

/// Candidate features for one node: all of them, or a sorted random subset.
fn candidates<R: Rng>(d: usize, per_split: Option<usize>, rng: &mut R) -> Vec<usize> {
    match per_split {
        Some(k) if k < d => {
            let mut f = sample(rng, d, k).into_vec();
            f.sort_unstable();
            f
        }
        _ => (0..d).collect(),
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct CartConfig {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub features_per_split: Option<usize>,
}

pub(crate) struct CartOutput {
    pub tree: Tree,
    /// Weighted Gini decrease per feature (unnormalized).
    pub importance: Vec<f64>,
}

/// Grows a Gini CART tree on `indices` (repeats allowed, as from a bootstrap).
pub(crate) fn grow_cart<R: Rng>(data: &Dataset, indices: &[usize], cfg: CartConfig, rng: &mut R) -> CartOutput {
    let mut grower = CartGrower {
        data,
        cfg,
        nodes: Vec::new(),
        importance: vec![0.0; data.n_features()],
        goes_left: vec![false; data.n_samples()],
    };
    grower.grow(presort(data, indices), 0, rng);
    CartOutput {
        tree: Tree { nodes: grower.nodes },
        importance: grower.importance,
    }
}

struct CartGrower<'a> {
    data: &'a Dataset,
    cfg: CartConfig,
    nodes: Vec<Node>,
    importance: Vec<f64>,
    goes_left: Vec<bool>,
}

impl CartGrower<'_> {
    fn grow<R: Rng>(&mut self, columns: Vec<Vec<usize>>, depth: usize, rng: &mut R) -> usize {
        let members = &columns[0];
        let n = members.len() as f64;
        let pos = members.iter().filter(|&&i| self.data.label(i) == 1).count() as f64;
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: pos / n,
            samples: members.len(),
        });

        let pure = pos == 0.0 || pos == n;
        let depth_ok = self.cfg.max_depth.is_none_or(|m| depth < m);
        if pure || !depth_ok || members.len() < 2 * self.cfg.min_leaf {
            return id;
        }

        let features = candidates(self.data.n_features(), self.cfg.features_per_split, rng);
        let Some((feature, split_at, threshold, cost)) = self.best_split(&columns, &features, pos) else {
            return id;
        };
        let parent_cost = n * gini(pos, n);
        self.importance[feature] += parent_cost - cost;

        let col = &columns[feature];
        for &i in &col[..split_at] {
            self.goes_left[i] = true;
        }
        for &i in &col[split_at..] {
            self.goes_left[i] = false;
        }
        let (left_cols, right_cols) = partition(columns, &self.goes_left);
        let left = self.grow(left_cols, depth + 1, rng);
        let right = self.grow(right_cols, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    /// Lowest weighted child impurity over candidate features; the first
    /// feature and lowest threshold win ties.
    fn best_split(&self, columns: &[Vec<usize>], features: &[usize], pos_total: f64) -> Option<(usize, usize, f64, f64)> {
        let min_leaf = self.cfg.min_leaf.max(1);
        let mut best: Option<(usize, usize, f64, f64)> = None;
        for &f in features {
            let col = &columns[f];
            let m = col.len();
            let total = m as f64;
            let mut pos_left = 0.0;
            for k in 1..m {
                if self.data.label(col[k - 1]) == 1 {
                    pos_left += 1.0;
                }
                if k < min_leaf || m - k < min_leaf {
                    continue;
                }
                let lo = self.data.value(col[k - 1], f);
                let hi = self.data.value(col[k], f);
                if lo >= hi {
                    continue;
                }
                let nl = k as f64;
                let nr = total - nl;
                let cost = nl * gini(pos_left, nl) + nr * gini(pos_total - pos_left, nr);
                if best.is_none_or(|b| cost < b.3) {
                    best = Some((f, k, threshold_between(lo, hi), cost));
                }
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct BoostTreeConfig {
    pub max_depth: usize,
    pub lambda: f64,
    pub min_child_weight: f64,
}

/// Grows a regression tree minimizing the second-order logistic-loss
/// approximation; leaves hold `-G / (H + lambda)`.
pub(crate) fn grow_boost_tree(
    data: &Dataset,
    root_columns: &[Vec<usize>],
    grad: &[f64],
    hess: &[f64],
    cfg: BoostTreeConfig,
    importance: &mut [f64],
) -> Tree {
    let mut g = BoostGrower {
        data,
        grad,
        hess,
        cfg,
        nodes: Vec::new(),
        importance,
        goes_left: vec![false; data.n_samples()],
    };
    g.grow(root_columns.to_vec(), 0);
    Tree { nodes: g.nodes }
}

struct BoostGrower<'a> {
    data: &'a Dataset,
    grad: &'a [f64],
    hess: &'a [f64],
    cfg: BoostTreeConfig,
    nodes: Vec<Node>,
    importance: &'a mut [f64],
    goes_left: Vec<bool>,
}

impl BoostGrower<'_> {
    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.cfg.lambda)
    }

    fn grow(&mut self, columns: Vec<Vec<usize>>, depth: usize) -> usize {
        let members = &columns[0];
        let g: f64 = members.iter().map(|&i| self.grad[i]).sum();
        let h: f64 = members.iter().map(|&i| self.hess[i]).sum();
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: -g / (h + self.cfg.lambda),
            samples: members.len(),
        });
        if depth >= self.cfg.max_depth || members.len() < 2 {
            return id;
        }

        let parent = self.score(g, h);
        let mut best: Option<(usize, usize, f64, f64)> = None;
        for (f, col) in columns.iter().enumerate() {
            let (mut gl, mut hl) = (0.0, 0.0);
            for k in 1..col.len() {
                gl += self.grad[col[k - 1]];
                hl += self.hess[col[k - 1]];
                let lo = self.data.value(col[k - 1], f);
                let hi = self.data.value(col[k], f);
                if lo >= hi || hl < self.cfg.min_child_weight || h - hl < self.cfg.min_child_weight {
                    continue;
                }
                let gain = self.score(gl, hl) + self.score(g - gl, h - hl) - parent;
                if gain > 1e-12 && best.is_none_or(|b| gain > b.3) {
                    best = Some((f, k, threshold_between(lo, hi), gain));
                }
            }
        }
        let Some((feature, split_at, threshold, gain)) = best else {
            return id;
        };
        self.importance[feature] += gain;

        let col = &columns[feature];
        for &i in &col[..split_at] {
            self.goes_left[i] = true;
        }
        for &i in &col[split_at..] {
            self.goes_left[i] = false;
        }
        let (lc, rc) = partition(columns, &self.goes_left);
        let left = self.grow(lc, depth + 1);
        let right = self.grow(rc, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}
