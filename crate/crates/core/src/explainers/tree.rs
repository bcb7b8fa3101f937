//! Weighted CART induction with Gini impurity.
//!
//! Split thresholds are midpoints of consecutive observed values within the
//! node; ties between candidate splits go to the lower feature index, then
//! the lower threshold. Zero-gain splits of impure nodes are taken (so e.g.
//! XOR is solved at depth 2); pure nodes become leaves. Leaves predict the
//! weighted majority target, ties predicting 1.

use super::WeightedSet;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        prediction: u8,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub nodes: Vec<TreeNode>,
    pub max_depth: usize,
    pub n_features: usize,
}

impl TreeModel {
    pub fn predict_row(&self, row: &[f64]) -> u8 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { prediction } => return *prediction,
                TreeNode::Split {
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

    pub fn depth(&self) -> usize {
        fn depth_of(nodes: &[TreeNode], at: usize) -> usize {
            match &nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + depth_of(nodes, *left).max(depth_of(nodes, *right))
                }
            }
        }
        depth_of(&self.nodes, 0)
    }
}

fn gini(w_pos: f64, w_tot: f64) -> f64 {
    if w_tot <= 0.0 {
        return 0.0;
    }
    let p = w_pos / w_tot;
    2.0 * p * (1.0 - p)
}

struct Builder<'a> {
    set: &'a WeightedSet<'a>,
    nodes: Vec<TreeNode>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    weighted_child_impurity: f64,
}

impl<'a> Builder<'a> {
    fn leaf(&mut self, rows: &[usize]) -> usize {
        let mut w_pos = 0.0;
        let mut w_tot = 0.0;
        for &i in rows {
            w_tot += self.set.weights[i];
            if self.set.targets[i] == 1 {
                w_pos += self.set.weights[i];
            }
        }
        let prediction = (w_pos >= w_tot - w_pos) as u8;
        self.nodes.push(TreeNode::Leaf { prediction });
        self.nodes.len() - 1
    }

    fn best_split(&self, rows: &[usize]) -> Option<BestSplit> {
        let w_tot: f64 = rows.iter().map(|&i| self.set.weights[i]).sum();
        let w_pos: f64 = rows
            .iter()
            .filter(|&&i| self.set.targets[i] == 1)
            .map(|&i| self.set.weights[i])
            .sum();
        // Pure nodes are leaves; no split can reduce impurity below zero.
        if w_pos == 0.0 || w_pos == w_tot {
            return None;
        }

        let mut best: Option<BestSplit> = None;
        let mut vals: Vec<(f64, f64, f64)> = Vec::with_capacity(rows.len());
        for feature in 0..self.set.features.n_cols() {
            vals.clear();
            for &i in rows {
                vals.push((
                    self.set.features.get(i, feature),
                    self.set.weights[i],
                    if self.set.targets[i] == 1 {
                        self.set.weights[i]
                    } else {
                        0.0
                    },
                ));
            }
            vals.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite feature values"));

            let mut left_w = 0.0;
            let mut left_pos = 0.0;
            let mut k = 0;
            while k < vals.len() {
                // Advance over the block sharing one feature value.
                let v = vals[k].0;
                while k < vals.len() && vals[k].0 == v {
                    left_w += vals[k].1;
                    left_pos += vals[k].2;
                    k += 1;
                }
                if k == vals.len() {
                    break;
                }
                let threshold = (v + vals[k].0) / 2.0;
                let right_w = w_tot - left_w;
                let right_pos = w_pos - left_pos;
                let child_imp = left_w * gini(left_pos, left_w) + right_w * gini(right_pos, right_w);
                let better = match &best {
                    None => true,
                    // Strict improvement only: first (lowest feature, lowest
                    // threshold) candidate wins ties.
                    Some(b) => child_imp < b.weighted_child_impurity - 1e-15,
                };
                if better {
                    best = Some(BestSplit {
                        feature,
                        threshold,
                        weighted_child_impurity: child_imp,
                    });
                }
            }
        }
        best
    }

    fn grow(&mut self, rows: &[usize], depth_left: usize) -> usize {
        if depth_left == 0 {
            return self.leaf(rows);
        }
        let Some(split) = self.best_split(rows) else {
            return self.leaf(rows);
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| self.set.features.get(i, split.feature) <= split.threshold);
        debug_assert!(!left_rows.is_empty() && !right_rows.is_empty());

        let at = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { prediction: 0 }); // placeholder
        let left = self.grow(&left_rows, depth_left - 1);
        let right = self.grow(&right_rows, depth_left - 1);
        self.nodes[at] = TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        at
    }
}

/// Greedy weighted-Gini CART. Degenerate data yields a single leaf.
pub fn fit_tree(set: &WeightedSet, max_depth: usize) -> TreeModel {
    // Zero-weight rows are dropped so integer weights behave exactly like
    // duplicated rows (they must not contribute threshold candidates).
    let rows: Vec<usize> = (0..set.features.n_rows())
        .filter(|&i| set.weights[i] > 0.0)
        .collect();
    let mut builder = Builder {
        set,
        nodes: Vec::new(),
    };
    if rows.is_empty() {
        builder.nodes.push(TreeNode::Leaf { prediction: 1 });
    } else {
        builder.grow(&rows, max_depth);
    }
    TreeModel {
        nodes: builder.nodes,
        max_depth,
        n_features: set.features.n_cols(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    #[test]
    fn pure_targets_single_leaf() {
        let features = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]]);
        let targets = [1, 1, 1];
        let weights = [1.0; 3];
        let set = WeightedSet::new(&features, &targets, &weights).unwrap();
        let tree = fit_tree(&set, 4);
        assert_eq!(tree.nodes.len(), 1);
        assert!(matches!(tree.nodes[0], TreeNode::Leaf { prediction: 1 }));
    }

    #[test]
    fn xor_solved_at_depth_two() {
        let features = Matrix::from_rows(&[
            vec![0.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
        ]);
        let targets = [0, 1, 1, 0];
        let weights = [1.0; 4];
        let set = WeightedSet::new(&features, &targets, &weights).unwrap();
        let tree = fit_tree(&set, 2);
        for (i, row) in features.iter_rows().enumerate() {
            assert_eq!(tree.predict_row(row), targets[i], "row {i}");
        }
        assert!(tree.depth() <= 2);
    }

    #[test]
    fn depth_zero_is_majority_leaf() {
        let features = Matrix::from_rows(&[vec![0.0], vec![0.5], vec![1.0]]);
        let targets = [0, 1, 1];
        let weights = [1.0; 3];
        let set = WeightedSet::new(&features, &targets, &weights).unwrap();
        let tree = fit_tree(&set, 0);
        assert_eq!(tree.nodes.len(), 1);
        assert!(matches!(tree.nodes[0], TreeNode::Leaf { prediction: 1 }));
    }

    #[test]
    fn leaf_tie_predicts_one() {
        let features = Matrix::from_rows(&[vec![0.0], vec![0.0]]);
        let targets = [0, 1];
        let weights = [1.0, 1.0];
        let set = WeightedSet::new(&features, &targets, &weights).unwrap();
        // No valid split (single feature value): majority tie -> 1.
        let tree = fit_tree(&set, 3);
        assert_eq!(tree.predict_row(&[0.0]), 1);
    }

    #[test]
    fn duplicate_rows_equal_integer_weights() {
        let f_dup = Matrix::from_rows(&[vec![0.1, 0.0], vec![0.9, 1.0], vec![0.9, 1.0]]);
        let t_dup = [0, 1, 1];
        let w_dup = [1.0; 3];
        let f_w = Matrix::from_rows(&[vec![0.1, 0.0], vec![0.9, 1.0]]);
        let t_w = [0, 1];
        let w_w = [1.0, 2.0];
        let a = fit_tree(&WeightedSet::new(&f_dup, &t_dup, &w_dup).unwrap(), 3);
        let b = fit_tree(&WeightedSet::new(&f_w, &t_w, &w_w).unwrap(), 3);
        assert_eq!(a.nodes, b.nodes);
    }

    #[test]
    fn path_trace_on_enumerated_inputs() {
        // Two binary features, targets = feature 1 when f0=0, else !feature 1.
        let features = Matrix::from_rows(&[
            vec![0.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
        ]);
        let targets = [0, 1, 1, 0];
        let weights = [1.0; 4];
        let set = WeightedSet::new(&features, &targets, &weights).unwrap();
        let tree = fit_tree(&set, 2);
        // Manual path trace over the four enumerated inputs.
        let expected: Vec<u8> = features.iter_rows().map(|r| {
            let mut at = 0usize;
            loop {
                match &tree.nodes[at] {
                    TreeNode::Leaf { prediction } => break *prediction,
                    TreeNode::Split { feature, threshold, left, right } => {
                        at = if r[*feature] <= *threshold { *left } else { *right };
                    }
                }
            }
        }).collect();
        let got: Vec<u8> = features.iter_rows().map(|r| tree.predict_row(r)).collect();
        assert_eq!(got, expected);
    }
}
