//! Antecedent mining and rule-list learning.
//!
//! Antecedents are conjunctions of up to `max_len` positive literals over
//! one-hot (binary) columns, kept when their support clears `min_support`.
//! Rule lists are learned by branch-and-bound over ordered prefixes of the
//! mined antecedents: the objective is weighted misclassification plus a
//! per-rule penalty, and an optional unfairness constraint prunes prefixes
//! whose best-case completion cannot satisfy it.

use super::{ExplainerError, WeightedSet};
use crate::matrix::Matrix;
use crate::metrics::FairnessMetricId;
use serde::{Deserialize, Serialize};

/// Conjunction of feature-equals-1 literals (column indices, sorted).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Rule {
    pub literals: Vec<usize>,
}

impl Rule {
    pub fn matches(&self, row: &[f64]) -> bool {
        self.literals.iter().all(|&j| row[j] > 0.5)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSet {
    pub rules: Vec<Rule>,
    pub n_features: usize,
}

/// Ordered rules with predictions; the first matching rule fires, otherwise
/// the default prediction applies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleList {
    pub rules: Vec<(Rule, u8)>,
    pub default: u8,
    pub n_features: usize,
}

impl RuleList {
    pub fn predict_row(&self, row: &[f64]) -> u8 {
        for (rule, pred) in &self.rules {
            if rule.matches(row) {
                return *pred;
            }
        }
        self.default
    }
}

/// Mines all conjunctions of at most `max_len` positive literals whose
/// support is at least `min_support`, ordered lexicographically by their
/// literal vectors.
pub fn mine_rules(
    features: &Matrix,
    max_len: usize,
    min_support: f64,
) -> Result<RuleSet, ExplainerError> {
    let n = features.n_rows();
    let d = features.n_cols();
    let columns: Vec<BitRows> = (0..d)
        .map(|j| BitRows::from_pred(n, |i| features.get(i, j) > 0.5))
        .collect();

    fn extend(
        start: usize,
        current: &mut Vec<usize>,
        bits: Option<&BitRows>,
        columns: &[BitRows],
        n: usize,
        max_len: usize,
        min_support: f64,
        out: &mut Vec<Rule>,
    ) {
        for j in start..columns.len() {
            let combined = match bits {
                None => columns[j].clone(),
                Some(b) => b.and(&columns[j]),
            };
            let support = combined.count() as f64 / n as f64;
            if support < min_support {
                continue;
            }
            current.push(j);
            out.push(Rule {
                literals: current.clone(),
            });
            if current.len() < max_len {
                extend(
                    j + 1,
                    current,
                    Some(&combined),
                    columns,
                    n,
                    max_len,
                    min_support,
                    out,
                );
            }
            current.pop();
        }
    }

    let mut rules = Vec::new();
    let mut current = Vec::new();
    extend(0, &mut current, None, &columns, n, max_len, min_support, &mut rules);
    rules.sort();
    if rules.is_empty() {
        return Err(ExplainerError::EmptyRuleSet);
    }
    Ok(RuleSet {
        rules,
        n_features: d,
    })
}

/// Evaluation tuple for the native unfairness constraint. Labels are the
/// ground truth used for conditioning; the training targets stay in the
/// weighted set.
#[derive(Debug, Clone, Copy)]
pub struct RuleConstraint<'a> {
    pub metric: FairnessMetricId,
    pub epsilon: f64,
    pub labels: &'a [u8],
    pub groups: &'a [u8],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleListConfig {
    /// Maximum number of rules before the default.
    pub max_rules: usize,
    /// Per-rule regularization added to the misclassification fraction.
    pub lambda: f64,
    /// Safety valve on search size; the incumbent is returned if exhausted.
    pub node_budget: u64,
}

impl Default for RuleListConfig {
    fn default() -> Self {
        RuleListConfig {
            max_rules: 5,
            lambda: 0.005,
            node_budget: 5_000_000,
        }
    }
}

/// One conditioning cell of a rate gap: its row set and total count.
struct Cell {
    rows: BitRows,
    total: u64,
}

/// A |p0 − p1| ≤ ε constraint between the two groups' cells.
struct GapPair {
    cells: [Cell; 2],
}

impl GapPair {
    fn new(n: usize, member: impl Fn(usize) -> bool, groups: &[u8]) -> Self {
        let mk = |g: u8| {
            let rows = BitRows::from_pred(n, |i| member(i) && groups[i] == g);
            let total = rows.count();
            Cell { rows, total }
        };
        GapPair {
            cells: [mk(0), mk(1)],
        }
    }
}

fn gap_pairs(n: usize, constraint: &RuleConstraint) -> Vec<GapPair> {
    let labels = constraint.labels;
    let groups = constraint.groups;
    match constraint.metric {
        FairnessMetricId::Sp => vec![GapPair::new(n, |_| true, groups)],
        FairnessMetricId::Pe => vec![GapPair::new(n, |i| labels[i] == 0, groups)],
        FairnessMetricId::EOpp => vec![GapPair::new(n, |i| labels[i] == 1, groups)],
        // Both conditions must hold simultaneously; the two row sets are
        // disjoint, so they prune independently.
        FairnessMetricId::EOdds => vec![
            GapPair::new(n, |i| labels[i] == 0, groups),
            GapPair::new(n, |i| labels[i] == 1, groups),
        ],
    }
}

/// Search node: an ordered prefix of (rule, prediction) pairs.
#[derive(Clone)]
struct Node {
    prefix: Vec<(usize, u8)>,
    captured: BitRows,
    /// Weighted misclassification among captured rows, unnormalized.
    captured_err: f64,
    /// Per gap pair, per group: (captured rows, captured predicted positives).
    cell_state: Vec<[(u64, u64); 2]>,
}

struct Search<'a> {
    set: &'a WeightedSet<'a>,
    rules: &'a [Rule],
    rule_bits: Vec<BitRows>,
    pairs: Vec<GapPair>,
    epsilon: f64,
    config: RuleListConfig,
    total_weight: f64,
    n: usize,
    nodes: u64,
    best_obj: f64,
    best: Option<RuleList>,
}

impl Search<'_> {
    /// Least achievable |p0 − p1| over all assignments of the free rows.
    fn min_gap(pair: &GapPair, state: &[(u64, u64); 2]) -> f64 {
        let mut lo = [0.0f64; 2];
        let mut hi = [0.0f64; 2];
        for g in 0..2 {
            let total = pair.cells[g].total;
            if total == 0 {
                // Empty conditioning cell: the gap is undefined, reported as
                // 0, and never blocks a prefix.
                return 0.0;
            }
            let (captured, pos) = state[g];
            let free = total - captured;
            lo[g] = pos as f64 / total as f64;
            hi[g] = (pos + free) as f64 / total as f64;
        }
        if hi[0] >= lo[1] && hi[1] >= lo[0] {
            0.0
        } else if lo[0] > hi[1] {
            lo[0] - hi[1]
        } else {
            lo[1] - hi[0]
        }
    }

    /// Exact |p0 − p1| when every free row gets the default prediction.
    fn gap_with_default(pair: &GapPair, state: &[(u64, u64); 2], default: u8) -> f64 {
        let mut p = [0.0f64; 2];
        for g in 0..2 {
            let total = pair.cells[g].total;
            if total == 0 {
                return 0.0;
            }
            let (captured, pos) = state[g];
            let free = total - captured;
            let final_pos = pos + if default == 1 { free } else { 0 };
            p[g] = final_pos as f64 / total as f64;
        }
        (p[0] - p[1]).abs()
    }

    /// Tries both defaults for the current prefix and updates the incumbent.
    fn complete(&mut self, node: &Node) {
        for default in [0u8, 1u8] {
            let mut err = node.captured_err;
            for i in 0..self.n {
                if !node.captured.get(i) && self.set.targets[i] != default {
                    err += self.set.weights[i];
                }
            }
            let obj = err / self.total_weight + self.config.lambda * node.prefix.len() as f64;
            if obj >= self.best_obj - 1e-12 {
                continue;
            }
            let feasible = self
                .pairs
                .iter()
                .zip(&node.cell_state)
                .all(|(pair, state)| {
                    Self::gap_with_default(pair, state, default) <= self.epsilon + 1e-12
                });
            if !feasible {
                continue;
            }
            self.best_obj = obj;
            self.best = Some(RuleList {
                rules: node
                    .prefix
                    .iter()
                    .map(|&(r, p)| (self.rules[r].clone(), p))
                    .collect(),
                default,
                n_features: self.set.features.n_cols(),
            });
        }
    }

    /// Depth-first search over ordered prefixes. Rule order matters under
    /// first-match semantics, so any unused rule may extend the prefix.
    fn explore(&mut self, node: &Node, used: &mut Vec<bool>) {
        self.nodes += 1;
        if self.nodes > self.config.node_budget {
            return;
        }
        self.complete(node);
        if node.prefix.len() >= self.config.max_rules {
            return;
        }
        // Best case for any extension: free rows perfectly classified and
        // one more rule paid for.
        let ext_bound = node.captured_err / self.total_weight
            + self.config.lambda * (node.prefix.len() + 1) as f64;
        if ext_bound >= self.best_obj - 1e-12 {
            return;
        }
        for r in 0..self.rule_bits.len() {
            if used[r] {
                continue;
            }
            let new_rows = self.rule_bits[r].and_not(&node.captured);
            if new_rows.count() == 0 {
                continue;
            }
            for pred in [0u8, 1u8] {
                let mut child = node.clone();
                child.prefix.push((r, pred));
                child.captured = node.captured.or(&self.rule_bits[r]);
                for i in new_rows.iter_ones() {
                    if self.set.targets[i] != pred {
                        child.captured_err += self.set.weights[i];
                    }
                }
                for (k, pair) in self.pairs.iter().enumerate() {
                    for g in 0..2 {
                        let captured_new = new_rows.and(&pair.cells[g].rows).count();
                        child.cell_state[k][g].0 += captured_new;
                        if pred == 1 {
                            child.cell_state[k][g].1 += captured_new;
                        }
                    }
                }
                let child_bound = child.captured_err / self.total_weight
                    + self.config.lambda * child.prefix.len() as f64;
                if child_bound >= self.best_obj - 1e-12 {
                    continue;
                }
                let infeasible = self
                    .pairs
                    .iter()
                    .zip(&child.cell_state)
                    .any(|(pair, state)| Self::min_gap(pair, state) > self.epsilon + 1e-12);
                if infeasible {
                    continue;
                }
                used[r] = true;
                self.explore(&child, used);
                used[r] = false;
            }
        }
    }
}

/// Branch-and-bound search for the best feasible rule list.
///
/// Minimizes weighted misclassification + `lambda` per rule over ordered
/// rule lists of length ≤ `max_rules`, pruning prefixes whose best-case
/// completion cannot satisfy the unfairness constraint. Ties keep the first
/// list found in depth-first order.
pub fn fit_rulelist(
    set: &WeightedSet,
    rules: &RuleSet,
    config: &RuleListConfig,
    constraint: Option<&RuleConstraint>,
) -> Result<RuleList, ExplainerError> {
    if rules.rules.is_empty() {
        return Err(ExplainerError::EmptyRuleSet);
    }
    let n = set.features.n_rows();
    let rule_bits: Vec<BitRows> = rules
        .rules
        .iter()
        .map(|r| BitRows::from_pred(n, |i| r.matches(set.features.row(i))))
        .collect();
    let (pairs, epsilon) = match constraint {
        Some(c) => (gap_pairs(n, c), c.epsilon),
        None => (Vec::new(), f64::INFINITY),
    };

    let n_pairs = pairs.len();
    let mut search = Search {
        set,
        rules: &rules.rules,
        rule_bits,
        pairs,
        epsilon,
        config: *config,
        total_weight: set.total_weight(),
        n,
        nodes: 0,
        best_obj: f64::INFINITY,
        best: None,
    };
    let root = Node {
        prefix: Vec::new(),
        captured: BitRows::empty(n),
        captured_err: 0.0,
        cell_state: vec![[(0, 0); 2]; n_pairs],
    };
    let mut used = vec![false; rules.rules.len()];
    search.explore(&root, &mut used);
    search.best.ok_or(ExplainerError::Infeasible)
}

/// Human-readable rendering, e.g.
/// `if (race=A) then 1 else if (age=young and priors) then 0 else 1`.
pub fn render_rulelist(list: &RuleList, feature_names: &[String]) -> String {
    let mut out = String::new();
    for (k, (rule, pred)) in list.rules.iter().enumerate() {
        let cond = rule
            .literals
            .iter()
            .map(|&j| feature_names[j].as_str())
            .collect::<Vec<_>>()
            .join(" and ");
        if k == 0 {
            out.push_str(&format!("if ({cond}) then {pred}"));
        } else {
            out.push_str(&format!(" else if ({cond}) then {pred}"));
        }
    }
    if list.rules.is_empty() {
        out.push_str(&format!("{}", list.default));
    } else {
        out.push_str(&format!(" else {}", list.default));
    }
    out
}

/// Fixed-size bitset over row indices.
#[derive(Debug, Clone, PartialEq, Eq)]
struct BitRows {
    blocks: Vec<u64>,
    n: usize,
}

impl BitRows {
    fn empty(n: usize) -> Self {
        BitRows {
            blocks: vec![0; n.div_ceil(64)],
            n,
        }
    }

    fn from_pred(n: usize, pred: impl Fn(usize) -> bool) -> Self {
        let mut b = BitRows::empty(n);
        for i in 0..n {
            if pred(i) {
                b.blocks[i / 64] |= 1 << (i % 64);
            }
        }
        b
    }

    fn get(&self, i: usize) -> bool {
        self.blocks[i / 64] & (1 << (i % 64)) != 0
    }

    fn zip_blocks(&self, other: &BitRows, f: impl Fn(u64, u64) -> u64) -> BitRows {
        BitRows {
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| f(*a, *b))
                .collect(),
            n: self.n,
        }
    }

    fn and(&self, other: &BitRows) -> BitRows {
        self.zip_blocks(other, |a, b| a & b)
    }

    fn or(&self, other: &BitRows) -> BitRows {
        self.zip_blocks(other, |a, b| a | b)
    }

    fn and_not(&self, other: &BitRows) -> BitRows {
        self.zip_blocks(other, |a, b| a & !b)
    }

    fn count(&self) -> u64 {
        self.blocks.iter().map(|b| b.count_ones() as u64).sum()
    }

    fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&i| self.get(i))
    }
}
