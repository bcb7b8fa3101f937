//! End-to-end library pipeline on the synthetic fixture: black-box training,
//! attack sweep, generalization, transfer and Rashomon range, with the
//! cross-module invariants that tie them together.

use fairwash_core::attack::{
    make_suing_instance, pareto_sweep, AttackParams, EpsilonGrid, SurrogateFamily,
};
use fairwash_core::blackbox::{search, BlackBoxFamily, BlackBoxModel, HyperparamSpace};
use fairwash_core::dataspace::{split, synth_generate, Dataset, SplitSpec};
use fairwash_core::eval::{generalization_report, transfer_experiment};
use fairwash_core::explainers::{explainer_predict, LogisticConfig, LogisticLearner};
use fairwash_core::fairtrain::EgParams;
use fairwash_core::metrics::{signed_disparity, FairnessMetricId};
use fairwash_core::rashomon::{unfairness_range, RangeGrid, RashomonParams};

struct Pipeline {
    blackbox: BlackBoxModel,
    train: Dataset,
    suing: Dataset,
    test: Dataset,
}

fn run_pipeline(bias: f64, seed: u64) -> Pipeline {
    let data = synth_generate(2400, 7, bias, seed);
    let (train, suing, test) = split(&data, &SplitSpec::default(), 0).unwrap();
    // Small validation carve-out from the training rows for the search.
    let (fit, val, _) = split(
        &train,
        &SplitSpec {
            ratios: (0.7, 0.15, 0.15),
            seed: seed ^ 1,
            n_resamples: 1,
        },
        0,
    )
    .unwrap();
    let blackbox = search(
        BlackBoxFamily::Gbt,
        &fit,
        &val,
        &HyperparamSpace::default(),
        4,
        seed,
    )
    .unwrap();
    Pipeline {
        blackbox,
        train,
        suing,
        test,
    }
}

#[test]
fn sweep_front_generalization_and_range_cohere() {
    let p = run_pipeline(0.35, 101);
    let instance = make_suing_instance(&p.blackbox, &p.suing).unwrap();
    let params = AttackParams::default();
    let family = SurrogateFamily::Logistic(LogisticConfig::default());
    let grid = EpsilonGrid::new(vec![0.02, 0.05, 0.1, 0.2, 0.4, 0.7, 1.0]).unwrap();
    let sweep = pareto_sweep(&instance, &family, FairnessMetricId::Sp, &grid, &params).unwrap();

    // Front points satisfy their own epsilon and are sorted/monotone.
    for point in &sweep.front.points {
        assert!(point.unfairness <= point.epsilon + 0.01);
    }
    for w in sweep.front.points.windows(2) {
        assert!(w[0].unfairness <= w[1].unfairness);
        assert!(w[0].fidelity <= w[1].fidelity);
    }

    // Generalization: suing vs test gaps stay small on the fixture.
    let report = generalization_report(
        &sweep,
        &p.blackbox,
        &p.suing,
        &p.test,
        FairnessMetricId::Sp,
        true,
    )
    .unwrap();
    assert!(
        report.summary.mean_fidelity_gap <= 0.05,
        "mean fidelity gap {}",
        report.summary.mean_fidelity_gap
    );

    // Manipulability verdict consistency: a feasible attack point at
    // (fidelity, unfairness) implies the range at loss bound 1 − fidelity
    // reaches an absolute disparity no larger than unfairness + 0.02.
    let point = sweep
        .front
        .points
        .iter()
        .find(|pt| pt.epsilon == 0.05)
        .or_else(|| sweep.front.points.first())
        .unwrap()
        .clone();
    let learner = LogisticLearner(LogisticConfig::default());
    let curve = unfairness_range(
        &learner,
        &instance,
        FairnessMetricId::Sp,
        &RangeGrid::LossBounds(vec![1.0 - point.fidelity]),
        &RashomonParams::default(),
    )
    .unwrap();
    let row = &curve.rows[0];
    assert!(row.feasible, "attack witness makes the bound feasible");
    let (lo, hi) = (row.min_disparity.unwrap(), row.max_disparity.unwrap());
    let min_abs = if lo <= 0.0 && 0.0 <= hi {
        0.0
    } else {
        lo.abs().min(hi.abs())
    };
    assert!(
        min_abs <= point.unfairness + 0.02,
        "range [{lo}, {hi}] misses the attack witness at unfairness {}",
        point.unfairness
    );

    // The attack evaluates on the suing rows only; the sweep's eval-set tag
    // names the suing partition.
    for e in &sweep.entries {
        if let Ok(o) = &e.outcome {
            assert!(o.point.eval_set.starts_with("suing"));
        }
    }
    let _ = p.train;
}

#[test]
fn transfer_report_shape_and_blanks() {
    let p = run_pipeline(0.35, 103);
    let space = HyperparamSpace::default();
    let (fit, val, _) = split(
        &p.train,
        &SplitSpec {
            ratios: (0.7, 0.15, 0.15),
            seed: 5,
            n_resamples: 1,
        },
        0,
    )
    .unwrap();
    let models: Vec<BlackBoxModel> = [
        BlackBoxFamily::Adaboost,
        BlackBoxFamily::Gbt,
        BlackBoxFamily::Mlp,
    ]
    .iter()
    .map(|&f| search(f, &fit, &val, &space, 2, 7).unwrap())
    .collect();

    let report = transfer_experiment(
        &models,
        &p.suing,
        &SurrogateFamily::RuleList {
            max_len: 2,
            min_support: 0.05,
            config: Default::default(),
        },
        FairnessMetricId::Sp,
        0.05,
        &AttackParams::default(),
    )
    .unwrap();
    assert_eq!(report.cells.len(), 9);
    for cell in &report.cells {
        // Blank cells appear exactly when the attack was infeasible, and
        // then carry no fidelity/unfairness.
        assert_eq!(cell.blank, cell.fidelity.is_none());
        assert_eq!(cell.blank, cell.unfairness.is_none());
        if cell.teacher == cell.student {
            assert_eq!(cell.label_agreement, 1.0);
        }
    }
}

#[test]
fn sweep_parallel_matches_reference_disparities() {
    // Signed disparity of the black-box on the suing set is the reference
    // value stored in the front; recompute independently.
    let p = run_pipeline(0.35, 105);
    let instance = make_suing_instance(&p.blackbox, &p.suing).unwrap();
    let grid = EpsilonGrid::new(vec![0.1, 0.5]).unwrap();
    let sweep = pareto_sweep(
        &instance,
        &SurrogateFamily::Tree { max_depth: 3 },
        FairnessMetricId::Sp,
        &grid,
        &AttackParams {
            eg: EgParams {
                iterations: 15,
                ..EgParams::default()
            },
            ..AttackParams::default()
        },
    )
    .unwrap();
    let bb_preds = p.blackbox.predict(&p.suing).unwrap();
    let expect = signed_disparity(
        &bb_preds,
        &p.suing.labels,
        &p.suing.groups,
        FairnessMetricId::Sp,
    )
    .unwrap()
    .value
    .abs();
    assert_eq!(sweep.front.blackbox_unfairness, expect);

    // Explainer predictions recomputed from the stored model agree with the
    // recorded fidelity.
    for e in &sweep.entries {
        if let Ok(o) = &e.outcome {
            let preds = explainer_predict(&o.explainer.model, &p.suing.features).unwrap();
            let fid = fairwash_core::metrics::fidelity(&preds, &instance.bb_labels).unwrap();
            assert_eq!(fid, o.point.fidelity);
        }
    }
}
