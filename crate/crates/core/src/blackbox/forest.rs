//! Random forest: bagged Gini trees with per-node feature subsampling.

use crate::exec::mix_seed;
use crate::matrix::Matrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum VoteNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        class: u8,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteTree {
    pub nodes: Vec<VoteNode>,
}

impl VoteTree {
    fn class(&self, row: &[f64]) -> u8 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                VoteNode::Leaf { class } => return *class,
                VoteNode::Split {
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
pub struct ForestParams {
    pub trees: Vec<VoteTree>,
}

impl ForestParams {
    /// Fraction of trees voting 1; prediction thresholds at 0.5, so a tie
    /// votes 1.
    pub fn vote_fraction(&self, row: &[f64]) -> f64 {
        if self.trees.is_empty() {
            return 1.0;
        }
        let ones: usize = self.trees.iter().map(|t| t.class(row) as usize).sum();
        ones as f64 / self.trees.len() as f64
    }
}

struct TreeBuilder<'a> {
    features: &'a Matrix,
    labels: &'a [u8],
    mtry: usize,
    nodes: Vec<VoteNode>,
}

impl TreeBuilder<'_> {
    fn leaf(&mut self, rows: &[usize]) -> usize {
        let pos = rows.iter().filter(|&&i| self.labels[i] == 1).count();
        let class = (2 * pos >= rows.len()) as u8;
        self.nodes.push(VoteNode::Leaf { class });
        self.nodes.len() - 1
    }

    fn grow(&mut self, rows: &[usize], depth_left: usize, rng: &mut ChaCha8Rng) -> usize {
        let pos = rows.iter().filter(|&&i| self.labels[i] == 1).count();
        if depth_left == 0 || pos == 0 || pos == rows.len() {
            return self.leaf(rows);
        }

        // Feature subset for this node, in sorted order for a deterministic
        // tie rule given the RNG stream.
        let mut all: Vec<usize> = (0..self.features.n_cols()).collect();
        all.shuffle(rng);
        let mut subset: Vec<usize> = all.into_iter().take(self.mtry).collect();
        subset.sort_unstable();

        let gini = |p: usize, n: usize| {
            if n == 0 {
                0.0
            } else {
                let q = p as f64 / n as f64;
                2.0 * q * (1.0 - q)
            }
        };
        let mut best: Option<(usize, f64, f64)> = None; // (feature, threshold, impurity)
        let mut vals: Vec<(f64, u8)> = Vec::with_capacity(rows.len());
        for &feature in &subset {
            vals.clear();
            for &i in rows {
                vals.push((self.features.get(i, feature), self.labels[i]));
            }
            vals.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));
            let mut left_n = 0;
            let mut left_pos = 0;
            let mut k = 0;
            while k < vals.len() {
                let v = vals[k].0;
                while k < vals.len() && vals[k].0 == v {
                    left_n += 1;
                    left_pos += vals[k].1 as usize;
                    k += 1;
                }
                if k == vals.len() {
                    break;
                }
                let threshold = (v + vals[k].0) / 2.0;
                let right_n = rows.len() - left_n;
                let right_pos = pos - left_pos;
                let imp = left_n as f64 * gini(left_pos, left_n)
                    + right_n as f64 * gini(right_pos, right_n);
                let better = match &best {
                    None => true,
                    Some((_, _, bi)) => imp < bi - 1e-15,
                };
                if better {
                    best = Some((feature, threshold, imp));
                }
            }
        }
        let Some((feature, threshold, _)) = best else {
            return self.leaf(rows);
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| self.features.get(i, feature) <= threshold);

        let at = self.nodes.len();
        self.nodes.push(VoteNode::Leaf { class: 0 }); // placeholder
        let left = self.grow(&left_rows, depth_left - 1, rng);
        let right = self.grow(&right_rows, depth_left - 1, rng);
        self.nodes[at] = VoteNode::Split {
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
    n_trees: u32,
    max_depth: usize,
    seed: u64,
) -> ForestParams {
    let n = features.n_rows();
    let mtry = ((features.n_cols() as f64).sqrt().ceil() as usize).max(1);
    let trees = (0..n_trees)
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, t as u64));
            let rows: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let mut builder = TreeBuilder {
                features,
                labels,
                mtry,
                nodes: Vec::new(),
            };
            builder.grow(&rows, max_depth, &mut rng);
            VoteTree {
                nodes: builder.nodes,
            }
        })
        .collect();
    ForestParams { trees }
}
