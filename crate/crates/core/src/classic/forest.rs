//! Random forest of CART trees split on Gini impurity.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{derive_seed, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Features considered per split; `None` means `floor(sqrt(n_features))`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_features: None,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        counts: [usize; 2],
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Nodes stored in an arena; the root is node 0. Rows with
/// `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
    pub seed: u64,
}

impl Tree {
    pub fn leaf_counts(&self, x: &[f64]) -> [usize; 2] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { counts } => return *counts,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Leaf majority; ties go to label 1.
    pub fn predict(&self, x: &[f64]) -> u8 {
        let c = self.leaf_counts(x);
        u8::from(c[1] >= c[0])
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub n_trees: usize,
    pub n_features: usize,
    pub trees: Vec<Tree>,
}

fn gini(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let (p0, p1) = (counts[0] as f64 / n, counts[1] as f64 / n);
    1.0 - p0 * p0 - p1 * p1
}

fn class_counts(y: &[u8], idx: &[usize]) -> [usize; 2] {
    let mut c = [0usize; 2];
    for &i in idx {
        c[usize::from(y[i])] += 1;
    }
    c
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [u8],
    max_features: usize,
    rng: SeededRng,
    nodes: Vec<Node>,
}

struct BestSplit {
    score: f64,
    feature: usize,
    threshold: f64,
}

impl Builder<'_> {
    fn best_split_on(&self, idx: &mut [usize], feature: usize, best: &mut Option<BestSplit>) {
        let x = self.x;
        idx.sort_by(|&a, &b| x.get(a, feature).total_cmp(&x.get(b, feature)).then(a.cmp(&b)));
        let total = class_counts(self.y, idx);
        let n = idx.len() as f64;
        let mut left = [0usize; 2];
        for pos in 1..idx.len() {
            left[usize::from(self.y[idx[pos - 1]])] += 1;
            let lo = x.get(idx[pos - 1], feature);
            let hi = x.get(idx[pos], feature);
            if lo >= hi {
                continue;
            }
            let right = [total[0] - left[0], total[1] - left[1]];
            let score = (pos as f64 * gini(left) + (n - pos as f64) * gini(right)) / n;
            if best.as_ref().is_none_or(|b| score < b.score) {
                let mid = lo + (hi - lo) / 2.0;
                let threshold = if mid < hi { mid } else { lo };
                *best = Some(BestSplit {
                    score,
                    feature,
                    threshold,
                });
            }
        }
    }

    fn grow(&mut self, mut idx: Vec<usize>) -> usize {
        let counts = class_counts(self.y, &idx);
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { counts });
        if idx.len() < 2 || counts[0] == 0 || counts[1] == 0 {
            return slot;
        }

        let p = self.x.cols();
        let mut features: Vec<usize> = (0..p).collect();
        let mut best = None;
        if self.max_features < p {
            // partial Fisher–Yates: the first max_features entries are the sample
            for i in 0..self.max_features {
                let j = i + self.rng.below(p - i);
                features.swap(i, j);
            }
            for &f in &features[..self.max_features] {
                self.best_split_on(&mut idx, f, &mut best);
            }
            if best.is_none() {
                // every sampled feature was constant on this node
                for &f in &features[self.max_features..] {
                    self.best_split_on(&mut idx, f, &mut best);
                }
            }
        } else {
            for f in 0..p {
                self.best_split_on(&mut idx, f, &mut best);
            }
        }

        let Some(split) = best else {
            return slot;
        };
        let (l_idx, r_idx): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| self.x.get(i, split.feature) <= split.threshold);
        let left = self.grow(l_idx);
        let right = self.grow(r_idx);
        self.nodes[slot] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        slot
    }
}

/// Grows one CART tree on the rows at `idx` until leaves are pure or hold
/// fewer than two rows.
pub fn grow_tree(x: &Matrix, y: &[u8], idx: Vec<usize>, max_features: usize, seed: u64) -> Tree {
    let mut b = Builder {
        x,
        y,
        max_features: max_features.clamp(1, x.cols().max(1)),
        rng: SeededRng::new(seed),
        nodes: Vec::new(),
    };
    b.grow(idx);
    Tree {
        nodes: b.nodes,
        seed,
    }
}

pub fn forest_fit(x: &Matrix, y: &[u8], config: &ForestConfig, seed: u64) -> Result<ForestModel> {
    if x.rows() == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    if x.rows() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.rows(),
            right: y.len(),
        });
    }
    if config.n_trees == 0 {
        return Err(Error::InvalidParameter("forest needs at least one tree".into()));
    }
    let p = x.cols();
    let max_features = config
        .max_features
        .unwrap_or_else(|| ((p as f64).sqrt().floor() as usize).max(1));
    let n = x.rows();
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let tree_seed = derive_seed(seed, t as u64);
            let idx = if config.bootstrap {
                let mut rng = SeededRng::new(derive_seed(tree_seed, u64::MAX));
                (0..n).map(|_| rng.below(n)).collect()
            } else {
                (0..n).collect()
            };
            grow_tree(x, y, idx, max_features, tree_seed)
        })
        .collect();
    Ok(ForestModel {
        n_trees: config.n_trees,
        n_features: p,
        trees,
    })
}

impl ForestModel {
    /// Majority vote over trees; ties go to label 1.
    pub fn predict(&self, x: &[f64]) -> Result<u8> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        let ones = self.trees.iter().filter(|t| t.predict(x) == 1).count();
        Ok(u8::from(2 * ones >= self.trees.len()))
    }
}
