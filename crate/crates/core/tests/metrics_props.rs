//! Property tests for the fairness metrics against a brute-force oracle.

use fairwash_core::metrics::{
    accuracy, count_groups, fidelity, signed_disparity, unfairness, FairnessMetricId,
    FairnessReport,
};
use proptest::prelude::*;

/// Independent oracle: per-group conditional rates as plain f64 ratios.
/// Returns None when a conditioning cell is empty.
fn oracle_rate(preds: &[u8], keep: impl Fn(usize) -> bool, groups: &[u8], g: u8) -> Option<f64> {
    let idx: Vec<usize> = (0..preds.len())
        .filter(|&i| keep(i) && groups[i] == g)
        .collect();
    if idx.is_empty() {
        return None;
    }
    let pos = idx.iter().filter(|&&i| preds[i] == 1).count();
    Some(pos as f64 / idx.len() as f64)
}

fn oracle_signed(
    preds: &[u8],
    labels: &[u8],
    groups: &[u8],
    metric: FairnessMetricId,
) -> Option<f64> {
    let gap = |keep: &dyn Fn(usize) -> bool| -> Option<f64> {
        Some(oracle_rate(preds, keep, groups, 0)? - oracle_rate(preds, keep, groups, 1)?)
    };
    match metric {
        FairnessMetricId::Sp => gap(&|_| true),
        FairnessMetricId::Pe => gap(&|i| labels[i] == 0),
        FairnessMetricId::EOpp => gap(&|i| labels[i] == 1),
        FairnessMetricId::EOdds => {
            let pe = gap(&|i| labels[i] == 0);
            let eopp = gap(&|i| labels[i] == 1);
            match (pe, eopp) {
                (Some(a), Some(b)) => Some(if a.abs() >= b.abs() { a } else { b }),
                (Some(a), None) => Some(a),
                (None, Some(b)) => Some(b),
                (None, None) => None,
            }
        }
    }
}

/// Random binary triple with both groups guaranteed present.
fn triple(max_len: usize) -> impl Strategy<Value = (Vec<u8>, Vec<u8>, Vec<u8>)> {
    (2..=max_len).prop_flat_map(|n| {
        (
            proptest::collection::vec(0u8..2, n),
            proptest::collection::vec(0u8..2, n),
            proptest::collection::vec(0u8..2, n),
        )
            .prop_map(|(p, l, mut g)| {
                g[0] = 0;
                g[1] = 1;
                (p, l, g)
            })
    })
}

proptest! {
    #[test]
    fn metrics_match_bruteforce_oracle((preds, labels, groups) in triple(64)) {
        for metric in FairnessMetricId::ALL {
            let got = unfairness(&preds, &labels, &groups, metric).unwrap();
            match oracle_signed(&preds, &labels, &groups, metric) {
                Some(expected) => {
                    prop_assert!(!got.undefined || metric == FairnessMetricId::EOdds);
                    prop_assert!((got.value - expected.abs()).abs() <= 1e-12,
                        "{metric}: got {} expected {}", got.value, expected.abs());
                }
                None => {
                    prop_assert!(got.undefined);
                    prop_assert_eq!(got.value, 0.0);
                }
            }
            let signed = signed_disparity(&preds, &labels, &groups, metric).unwrap();
            if let Some(expected) = oracle_signed(&preds, &labels, &groups, metric) {
                prop_assert!((signed.value - expected).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn unfairness_is_abs_of_signed((preds, labels, groups) in triple(64)) {
        for metric in FairnessMetricId::ALL {
            let u = unfairness(&preds, &labels, &groups, metric).unwrap();
            let s = signed_disparity(&preds, &labels, &groups, metric).unwrap();
            prop_assert_eq!(u.value, s.value.abs());
            prop_assert_eq!(u.undefined, s.undefined);
        }
    }

    #[test]
    fn sp_invariant_to_row_permutation((preds, labels, groups) in triple(32)) {
        let base = unfairness(&preds, &labels, &groups, FairnessMetricId::Sp).unwrap();
        // Deterministic permutation: reverse.
        let rp: Vec<u8> = preds.iter().rev().copied().collect();
        let rl: Vec<u8> = labels.iter().rev().copied().collect();
        let rg: Vec<u8> = groups.iter().rev().copied().collect();
        let perm = unfairness(&rp, &rl, &rg, FairnessMetricId::Sp).unwrap();
        prop_assert_eq!(base.value, perm.value);
    }

    #[test]
    fn group_relabel_negates_signed((preds, labels, groups) in triple(32)) {
        let flipped: Vec<u8> = groups.iter().map(|&g| 1 - g).collect();
        for metric in [FairnessMetricId::Sp, FairnessMetricId::Pe, FairnessMetricId::EOpp] {
            let a = signed_disparity(&preds, &labels, &groups, metric).unwrap();
            let b = signed_disparity(&preds, &labels, &flipped, metric).unwrap();
            prop_assert!((a.value + b.value).abs() <= 1e-15);
            let ua = unfairness(&preds, &labels, &groups, metric).unwrap();
            let ub = unfairness(&preds, &labels, &flipped, metric).unwrap();
            prop_assert_eq!(ua.value, ub.value);
        }
    }

    #[test]
    fn fidelity_equals_accuracy_with_swapped_roles((preds, labels, _g) in triple(32)) {
        prop_assert_eq!(
            fidelity(&preds, &labels).unwrap(),
            accuracy(&preds, &labels).unwrap()
        );
    }

    #[test]
    fn report_is_consistent_with_individual_metrics((preds, labels, groups) in triple(32)) {
        let report = FairnessReport::compute(&preds, &labels, &groups).unwrap();
        prop_assert_eq!(report.sp, unfairness(&preds, &labels, &groups, FairnessMetricId::Sp).unwrap().value);
        prop_assert_eq!(report.eodds, report.pe.max(report.eopp));
    }

    #[test]
    fn tallies_are_exhaustive((preds, labels, groups) in triple(48)) {
        let c = count_groups(&preds, &labels, &groups).unwrap();
        let n: u64 = c.group.iter().map(|t| t.n).sum();
        prop_assert_eq!(n as usize, preds.len());
        for t in c.group {
            prop_assert_eq!(t.cond_pos + t.cond_neg, t.n);
            prop_assert!(t.true_pos <= t.cond_pos);
            prop_assert!(t.false_pos <= t.cond_neg);
            prop_assert_eq!(t.true_pos + t.false_pos, t.pred_pos);
        }
    }
}
