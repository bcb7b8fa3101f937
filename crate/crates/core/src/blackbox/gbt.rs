//! Gradient boosted trees with logistic loss and shrinkage.
//!
//! Regression trees are grown on gradient/hessian statistics with the usual
//! second-order gain; leaves take the Newton step with L2 of 1. No row or
//! column subsampling, so training is fully deterministic.

use crate::matrix::Matrix;
use serde::{Deserialize, Serialize};

const LEAF_L2: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RegNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegTree {
    pub nodes: Vec<RegNode>,
}

impl RegTree {
    fn value(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                RegNode::Leaf { value } => return *value,
                RegNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtParams {
    pub base_score: f64,
    pub shrinkage: f64,
    pub trees: Vec<RegTree>,
}

impl GbtParams {
    /// Additive log-odds; prediction thresholds at 0.
    pub fn log_odds(&self, row: &[f64]) -> f64 {
        self.base_score + self.shrinkage * self.trees.iter().map(|t| t.value(row)).sum::<f64>()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

struct TreeBuilder<'a> {
    features: &'a Matrix,
    grad: &'a [f64],
    hess: &'a [f64],
    nodes: Vec<RegNode>,
}

impl TreeBuilder<'_> {
    fn leaf(&mut self, g: f64, h: f64) -> usize {
        self.nodes.push(RegNode::Leaf {
            value: -g / (h + LEAF_L2),
        });
        self.nodes.len() - 1
    }

    fn grow(&mut self, rows: &[usize], depth_left: usize) -> usize {
        let g_tot: f64 = rows.iter().map(|&i| self.grad[i]).sum();
        let h_tot: f64 = rows.iter().map(|&i| self.hess[i]).sum();
        if depth_left == 0 || rows.len() < 2 {
            return self.leaf(g_tot, h_tot);
        }

        let score = |g: f64, h: f64| g * g / (h + LEAF_L2);
        let parent = score(g_tot, h_tot);
        let mut best: Option<(usize, f64, f64)> = None; // (feature, threshold, gain)
        let mut vals: Vec<(f64, f64, f64)> = Vec::with_capacity(rows.len());
        for feature in 0..self.features.n_cols() {
            vals.clear();
            for &i in rows {
                vals.push((self.features.get(i, feature), self.grad[i], self.hess[i]));
            }
            vals.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));
            let mut gl = 0.0;
            let mut hl = 0.0;
            let mut k = 0;
            while k < vals.len() {
                let v = vals[k].0;
                while k < vals.len() && vals[k].0 == v {
                    gl += vals[k].1;
                    hl += vals[k].2;
                    k += 1;
                }
                if k == vals.len() {
                    break;
                }
                let threshold = (v + vals[k].0) / 2.0;
                let gain = score(gl, hl) + score(g_tot - gl, h_tot - hl) - parent;
                let better = match &best {
                    None => gain > 1e-12,
                    Some((_, _, bg)) => gain > bg + 1e-15,
                };
                if better {
                    best = Some((feature, threshold, gain));
                }
            }
        }
        let Some((feature, threshold, _)) = best else {
            return self.leaf(g_tot, h_tot);
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| self.features.get(i, feature) <= threshold);

        let at = self.nodes.len();
        self.nodes.push(RegNode::Leaf { value: 0.0 }); // placeholder
        let left = self.grow(&left_rows, depth_left - 1);
        let right = self.grow(&right_rows, depth_left - 1);
        self.nodes[at] = RegNode::Split {
            feature,
            threshold,
            left,
            right,
        };
        at
    }
}

pub fn train(
    features: &Matrix,
    labels: &[u8],
    rounds: u32,
    depth: usize,
    shrinkage: f64,
) -> GbtParams {
    let n = features.n_rows();
    let pos = labels.iter().filter(|&&y| y == 1).count() as f64;
    let prior = (pos / n as f64).clamp(1e-6, 1.0 - 1e-6);
    let base_score = (prior / (1.0 - prior)).ln();

    let mut margins = vec![base_score; n];
    let mut trees = Vec::with_capacity(rounds as usize);
    let rows: Vec<usize> = (0..n).collect();
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    for _ in 0..rounds {
        for i in 0..n {
            let p = sigmoid(margins[i]);
            grad[i] = p - labels[i] as f64;
            hess[i] = (p * (1.0 - p)).max(1e-12);
        }
        let mut builder = TreeBuilder {
            features,
            grad: &grad,
            hess: &hess,
            nodes: Vec::new(),
        };
        builder.grow(&rows, depth);
        let tree = RegTree {
            nodes: builder.nodes,
        };
        for i in 0..n {
            margins[i] += shrinkage * tree.value(features.row(i));
        }
        trees.push(tree);
    }
    GbtParams {
        base_score,
        shrinkage,
        trees,
    }
}
