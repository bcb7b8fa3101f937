//! Property tests for the surrogate families.

use fairwash_core::explainers::{
    explainer_predict, fit_logistic, fit_rulelist, fit_tree, mine_rules, Explainer,
    LogisticConfig, RuleListConfig, WeightedSet,
};
use fairwash_core::matrix::Matrix;
use proptest::prelude::*;

/// Binary matrix with targets and small integer weights.
fn weighted_instance() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<u8>, Vec<u64>)> {
    (3usize..10, 2usize..5).prop_flat_map(|(n, d)| {
        (
            proptest::collection::vec(proptest::collection::vec(0u8..2, d), n),
            proptest::collection::vec(0u8..2, n),
            proptest::collection::vec(1u64..4, n),
        )
            .prop_map(|(rows, targets, weights)| {
                (
                    rows.into_iter()
                        .map(|r| r.into_iter().map(f64::from).collect())
                        .collect(),
                    targets,
                    weights,
                )
            })
    })
}

/// Expands integer weights into duplicated rows.
fn duplicate(
    rows: &[Vec<f64>],
    targets: &[u8],
    weights: &[u64],
) -> (Vec<Vec<f64>>, Vec<u8>, Vec<f64>) {
    let mut drows = Vec::new();
    let mut dtargets = Vec::new();
    for ((row, &t), &w) in rows.iter().zip(targets).zip(weights) {
        for _ in 0..w {
            drows.push(row.clone());
            dtargets.push(t);
        }
    }
    let ones = vec![1.0; dtargets.len()];
    (drows, dtargets, ones)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weight_duplication_equivalence_tree((rows, targets, weights) in weighted_instance()) {
        let features = Matrix::from_rows(&rows);
        let wf: Vec<f64> = weights.iter().map(|&w| w as f64).collect();
        let weighted = WeightedSet::new(&features, &targets, &wf).unwrap();
        let (drows, dtargets, dones) = duplicate(&rows, &targets, &weights);
        let dfeatures = Matrix::from_rows(&drows);
        let dupset = WeightedSet::new(&dfeatures, &dtargets, &dones).unwrap();

        let a = fit_tree(&weighted, 3);
        let b = fit_tree(&dupset, 3);
        prop_assert_eq!(a.nodes, b.nodes);
    }

    #[test]
    fn weight_duplication_equivalence_logistic((rows, targets, weights) in weighted_instance()) {
        let features = Matrix::from_rows(&rows);
        let wf: Vec<f64> = weights.iter().map(|&w| w as f64).collect();
        let weighted = WeightedSet::new(&features, &targets, &wf).unwrap();
        let (drows, dtargets, dones) = duplicate(&rows, &targets, &weights);
        let dfeatures = Matrix::from_rows(&drows);
        let dupset = WeightedSet::new(&dfeatures, &dtargets, &dones).unwrap();

        let config = LogisticConfig { epochs: 50, ..LogisticConfig::default() };
        let a = fit_logistic(&weighted, &config).unwrap();
        let b = fit_logistic(&dupset, &config).unwrap();
        // Full-batch descent on the mean objective: parameter-identical up
        // to summation order (duplicated rows accumulate gradients in a
        // different association than one weighted multiply).
        prop_assert!((a.bias - b.bias).abs() <= 1e-9);
        for (wa, wb) in a.weights.iter().zip(&b.weights) {
            prop_assert!((wa - wb).abs() <= 1e-9, "{wa} vs {wb}");
        }
    }

    #[test]
    fn weight_duplication_equivalence_rulelist((rows, targets, weights) in weighted_instance()) {
        let features = Matrix::from_rows(&rows);
        let Ok(rules) = mine_rules(&features, 2, 0.05) else {
            return Ok(()); // all-zero matrix: nothing to mine
        };
        let wf: Vec<f64> = weights.iter().map(|&w| w as f64).collect();
        let weighted = WeightedSet::new(&features, &targets, &wf).unwrap();
        let (drows, dtargets, dones) = duplicate(&rows, &targets, &weights);
        let dfeatures = Matrix::from_rows(&drows);
        let dupset = WeightedSet::new(&dfeatures, &dtargets, &dones).unwrap();
        // Rules must be mined from identical supports; with duplicated rows
        // supports shift, so reuse the same rule set for both fits.
        let config = RuleListConfig { max_rules: 2, ..RuleListConfig::default() };
        let a = fit_rulelist(&weighted, &rules, &config, None).unwrap();
        let b = fit_rulelist(&dupset, &rules, &config, None).unwrap();
        prop_assert_eq!(a.rules, b.rules);
        prop_assert_eq!(a.default, b.default);
    }

    #[test]
    fn tree_depth_is_bounded((rows, targets, weights) in weighted_instance(), depth in 0usize..4) {
        let features = Matrix::from_rows(&rows);
        let wf: Vec<f64> = weights.iter().map(|&w| w as f64).collect();
        let set = WeightedSet::new(&features, &targets, &wf).unwrap();
        let tree = fit_tree(&set, depth);
        prop_assert!(tree.depth() <= depth);
    }

    #[test]
    fn rulelist_length_is_bounded((rows, targets, _w) in weighted_instance(), max_rules in 1usize..4) {
        let features = Matrix::from_rows(&rows);
        let Ok(rules) = mine_rules(&features, 2, 0.05) else {
            return Ok(());
        };
        let ones = vec![1.0; targets.len()];
        let set = WeightedSet::new(&features, &targets, &ones).unwrap();
        let config = RuleListConfig { max_rules, ..RuleListConfig::default() };
        let list = fit_rulelist(&set, &rules, &config, None).unwrap();
        prop_assert!(list.rules.len() <= max_rules);
    }

    #[test]
    fn mined_rules_match_support_oracle(rows in proptest::collection::vec(
        proptest::collection::vec(0u8..2, 4), 4..12)) {
        let float_rows: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().map(|&v| v as f64).collect())
            .collect();
        let features = Matrix::from_rows(&float_rows);
        let min_support = 0.3;
        let mined = mine_rules(&features, 2, min_support);

        let mut expected: Vec<Vec<usize>> = Vec::new();
        let support = |cols: &[usize]| {
            rows.iter().filter(|r| cols.iter().all(|&c| r[c] == 1)).count() as f64
                / rows.len() as f64
        };
        for a in 0..4 {
            if support(&[a]) >= min_support {
                expected.push(vec![a]);
            }
            for b in (a + 1)..4 {
                if support(&[a, b]) >= min_support {
                    expected.push(vec![a, b]);
                }
            }
        }
        expected.sort();
        match mined {
            Ok(set) => {
                let got: Vec<Vec<usize>> =
                    set.rules.iter().map(|r| r.literals.clone()).collect();
                prop_assert_eq!(got, expected);
            }
            Err(_) => prop_assert!(expected.is_empty()),
        }
    }

    #[test]
    fn predictions_are_binary((rows, targets, _w) in weighted_instance()) {
        let features = Matrix::from_rows(&rows);
        let ones = vec![1.0; targets.len()];
        let set = WeightedSet::new(&features, &targets, &ones).unwrap();
        let tree = Explainer::Tree(fit_tree(&set, 2));
        for p in explainer_predict(&tree, &features).unwrap() {
            prop_assert!(p <= 1);
        }
    }
}
