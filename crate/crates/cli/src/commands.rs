//! Subcommand implementations. Every command is a pure function of the
//! config and seeds: reruns produce byte-identical artifacts (manifests
//! aside from their timestamps) regardless of the worker pool size.

use crate::config::{ExperimentConfig, ExplainerConfig, SurrogateKind};
use crate::error::{CliError, CliResult};
use crate::manifest::write_manifest;
use crate::svg::{pareto_svg, range_svg, RangePoint, SweepPoint};
use fairwash_core::attack::{
    make_suing_instance, pareto_sweep, SuingInstance, SweepResult,
};
use fairwash_core::blackbox::{
    load_model, save_model, search, BlackBoxFamily, BlackBoxModel, HyperparamSpace,
    SchemaFingerprint,
};
use fairwash_core::dataspace::{
    encode, load_csv_opts, split, write_csv, Dataset, FeatureSchema, LoadOptions, SplitSpec,
};
use fairwash_core::eval::{generalization_report, transfer_experiment};
use fairwash_core::exec::mix_seed;
use fairwash_core::explainers::{
    mine_rules, BaseLearner, LogisticConfig, LogisticLearner, RuleListLearner, TreeLearner,
};
use fairwash_core::metrics::{accuracy, FairnessReport};
use fairwash_core::rashomon::{unfairness_range, RangeGrid};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};

pub struct Ctx {
    pub config: ExperimentConfig,
    pub out: PathBuf,
}

impl Ctx {
    fn split_spec(&self) -> SplitSpec {
        let [t, s, e] = self.config.split.ratios;
        SplitSpec {
            ratios: (t, s, e),
            seed: self.config.split.seed,
            n_resamples: self.config.split.n_resamples,
        }
    }

    fn load_encoded(&self) -> CliResult<Dataset> {
        let schema = FeatureSchema::from_json_file(&self.config.schema)?;
        let raw = load_csv_opts(
            &self.config.dataset,
            &schema,
            LoadOptions {
                drop_unknown_rows: self.config.drop_unknown_rows,
            },
        )?;
        let (data, warnings) = encode(&raw, &schema)?;
        for w in warnings {
            eprintln!("warning: {w}");
        }
        Ok(data)
    }

    fn partitions(&self, data: &Dataset) -> CliResult<(Dataset, Dataset, Dataset)> {
        Ok(split(data, &self.split_spec(), self.config.resample_index)?)
    }

    /// Deterministic carve of the training partition into fit/validation
    /// rows for the hyperparameter search.
    fn carve_validation(&self, train: &Dataset) -> (Dataset, Dataset) {
        let n = train.len();
        let n_val = ((n as f64 * self.config.blackbox.validation_fraction) as usize).max(1);
        let mut idx: Vec<usize> = (0..n).collect();
        let mut rng =
            ChaCha8Rng::seed_from_u64(mix_seed(self.config.blackbox.seed, 0x76a1));
        idx.shuffle(&mut rng);
        let val = train.take_rows(&idx[..n_val]);
        let fit = train.take_rows(&idx[n_val..]);
        // A degenerate carve (single-class validation) still scores
        // accuracy; only an empty one would break, and n_val >= 1.
        (fit, val)
    }

    fn train_family(
        &self,
        family: BlackBoxFamily,
        train: &Dataset,
    ) -> CliResult<BlackBoxModel> {
        let (fit, val) = self.carve_validation(train);
        Ok(search(
            family,
            &fit,
            &val,
            &HyperparamSpace::default(),
            self.config.blackbox.search_iterations,
            mix_seed(self.config.blackbox.seed, family as u64),
        )?)
    }

    /// Loads a previously trained model when its fingerprint matches;
    /// otherwise retrains (deterministically identical) and saves it.
    fn load_or_train(
        &self,
        family: BlackBoxFamily,
        train: &Dataset,
    ) -> CliResult<BlackBoxModel> {
        let path = self.out.join("models").join(format!("{family}.json"));
        if path.exists() {
            if let Ok(model) = load_model(&path) {
                if model.fingerprint == SchemaFingerprint::of(&train.feature_names) {
                    return Ok(model);
                }
            }
        }
        let model = self.train_family(family, train)?;
        std::fs::create_dir_all(path.parent().unwrap())?;
        save_model(&model, &path)?;
        Ok(model)
    }

    fn suing_instance(
        &self,
        model: &BlackBoxModel,
        suing: &Dataset,
    ) -> CliResult<SuingInstance> {
        Ok(make_suing_instance(model, suing)?)
    }

    fn run_sweep(&self, instance: &SuingInstance) -> CliResult<SweepResult> {
        let grid = self.config.epsilon.to_grid()?;
        let params = self
            .config
            .constrained
            .attack_params(self.config.explainer.seed);
        Ok(pareto_sweep(
            instance,
            &self.config.explainer.surrogate(),
            self.config.metric,
            &grid,
            &params,
        )?)
    }
}

fn build_learner(
    cfg: &ExplainerConfig,
    features: &fairwash_core::matrix::Matrix,
) -> CliResult<Box<dyn BaseLearner>> {
    Ok(match cfg.family {
        SurrogateKind::Logistic => Box::new(LogisticLearner(LogisticConfig {
            seed: cfg.seed,
            ..cfg.logistic
        })),
        SurrogateKind::Tree => Box::new(TreeLearner {
            max_depth: cfg.tree_max_depth,
        }),
        SurrogateKind::Rulelist => Box::new(RuleListLearner {
            rules: mine_rules(features, cfg.rule_max_len, cfg.rule_min_support)?,
            config: cfg.rules,
        }),
    })
}

fn ensure_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path)?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn cmd_split(ctx: &Ctx) -> CliResult<()> {
    let data = ctx.load_encoded()?;
    let spec = ctx.split_spec();
    let mut artifacts = Vec::new();
    for r in 0..spec.n_resamples {
        let (train, suing, test) = split(&data, &spec, r)?;
        let dir = ctx.out.join("splits").join(format!("r{r:02}"));
        ensure_dir(&dir)?;
        for (part, name) in [(&train, "train"), (&suing, "suing"), (&test, "test")] {
            let path = dir.join(format!("{name}.csv"));
            write_csv(part, &path)?;
            artifacts.push(format!("splits/r{r:02}/{name}.csv"));
        }
    }
    write_manifest(&ctx.out, "split", Some(&ctx.config), artifacts)?;
    println!(
        "split: {} resamples of {} rows into {:?} under {}",
        spec.n_resamples,
        data.len(),
        spec.ratios,
        ctx.out.join("splits").display()
    );
    Ok(())
}

pub fn cmd_train_blackbox(ctx: &Ctx) -> CliResult<()> {
    let data = ctx.load_encoded()?;
    let (train, suing, test) = ctx.partitions(&data)?;
    ensure_dir(&ctx.out.join("models"))?;

    let mut artifacts = Vec::new();
    let mut perf = csv::Writer::from_path(ctx.out.join("perf.csv"))
        .map_err(CliError::runtime)?;
    perf.write_record(["model", "partition", "accuracy", "sp", "pe", "eopp", "eodds"])
        .map_err(CliError::runtime)?;
    for &family in &ctx.config.blackbox.families {
        let model = ctx.train_family(family, &train)?;
        let path = ctx.out.join("models").join(format!("{family}.json"));
        save_model(&model, &path)?;
        artifacts.push(format!("models/{family}.json"));
        for (part, name) in [(&train, "train"), (&test, "test"), (&suing, "suing")] {
            let preds = model.predict(part)?;
            let acc = accuracy(&preds, &part.labels)?;
            let report = FairnessReport::compute(&preds, &part.labels, &part.groups)?;
            perf.write_record([
                family.to_string(),
                name.to_string(),
                acc.to_string(),
                report.sp.to_string(),
                report.pe.to_string(),
                report.eopp.to_string(),
                report.eodds.to_string(),
            ])
            .map_err(CliError::runtime)?;
        }
    }
    perf.flush()?;
    artifacts.push("perf.csv".into());
    write_manifest(&ctx.out, "train-blackbox", Some(&ctx.config), artifacts)?;
    println!(
        "train-blackbox: {} models and perf.csv under {}",
        ctx.config.blackbox.families.len(),
        ctx.out.display()
    );
    Ok(())
}

pub fn cmd_attack(ctx: &Ctx) -> CliResult<()> {
    let data = ctx.load_encoded()?;
    let (train, suing, _) = ctx.partitions(&data)?;
    let model = ctx.load_or_train(ctx.config.blackbox.target, &train)?;
    let instance = ctx.suing_instance(&model, &suing)?;
    let sweep = ctx.run_sweep(&instance)?;

    let attack_dir = ctx.out.join("attack");
    let explainer_dir = attack_dir.join("explainers");
    ensure_dir(&explainer_dir)?;
    let mut artifacts = Vec::new();

    let on_front: std::collections::HashSet<usize> =
        sweep.front_entries.iter().copied().collect();
    let mut sweep_csv = csv::Writer::from_path(attack_dir.join("sweep.csv"))
        .map_err(CliError::runtime)?;
    sweep_csv
        .write_record([
            "epsilon",
            "fidelity_sg",
            "unfairness_sg",
            "accuracy_sg",
            "explainer_path",
            "flags",
            "on_front",
        ])
        .map_err(CliError::runtime)?;
    let mut front_csv = csv::Writer::from_path(attack_dir.join("front.csv"))
        .map_err(CliError::runtime)?;
    front_csv
        .write_record([
            "epsilon",
            "fidelity_sg",
            "unfairness_sg",
            "accuracy_sg",
            "explainer_path",
            "flags",
        ])
        .map_err(CliError::runtime)?;

    for (i, entry) in sweep.entries.iter().enumerate() {
        match &entry.outcome {
            Ok(outcome) => {
                let rel = format!("explainers/eps_{i:04}.json");
                std::fs::write(attack_dir.join(&rel), outcome.explainer.to_json())?;
                artifacts.push(format!("attack/{rel}"));
                let record = [
                    entry.epsilon.to_string(),
                    outcome.point.fidelity.to_string(),
                    outcome.point.unfairness.to_string(),
                    outcome.point.accuracy.to_string(),
                    rel.clone(),
                    outcome.point.flags.render(),
                ];
                let mut row = record.to_vec();
                row.push(on_front.contains(&i).to_string());
                sweep_csv.write_record(&row).map_err(CliError::runtime)?;
                if on_front.contains(&i) {
                    front_csv.write_record(&record).map_err(CliError::runtime)?;
                }
            }
            Err(msg) => {
                // Failed ε leaves a gap in the sweep rather than aborting it.
                sweep_csv
                    .write_record([
                        entry.epsilon.to_string(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        format!("failed:{}", msg.replace(',', ";")),
                        "false".to_string(),
                    ])
                    .map_err(CliError::runtime)?;
            }
        }
    }
    sweep_csv.flush()?;
    front_csv.flush()?;
    artifacts.push("attack/sweep.csv".into());
    artifacts.push("attack/front.csv".into());

    let meta = serde_json::json!({
        "metric": ctx.config.metric,
        "family": sweep.family,
        "blackbox_id": instance.blackbox_id,
        "blackbox_family": ctx.config.blackbox.target,
        "blackbox_unfairness": sweep.front.blackbox_unfairness,
    });
    std::fs::write(
        attack_dir.join("meta.json"),
        serde_json::to_string_pretty(&meta)?,
    )?;
    artifacts.push("attack/meta.json".into());
    write_manifest(&ctx.out, "attack", Some(&ctx.config), artifacts)?;
    println!(
        "attack: swept {} epsilons, front has {} points (blackbox unfairness {:.4})",
        sweep.entries.len(),
        sweep.front.points.len(),
        sweep.front.blackbox_unfairness
    );
    Ok(())
}

pub fn cmd_generalize(ctx: &Ctx) -> CliResult<()> {
    let data = ctx.load_encoded()?;
    let (train, suing, test) = ctx.partitions(&data)?;
    let model = ctx.load_or_train(ctx.config.blackbox.target, &train)?;
    let instance = ctx.suing_instance(&model, &suing)?;
    let sweep = ctx.run_sweep(&instance)?;
    let report = generalization_report(&sweep, &model, &suing, &test, ctx.config.metric, true)?;

    let dir = ctx.out.join("generalize");
    ensure_dir(&dir)?;
    let mut csv = csv::Writer::from_path(dir.join("gap.csv")).map_err(CliError::runtime)?;
    csv.write_record([
        "epsilon",
        "fidelity_sg",
        "fidelity_test",
        "unfairness_sg",
        "unfairness_test",
    ])
    .map_err(CliError::runtime)?;
    for row in &report.rows {
        csv.write_record([
            row.epsilon.to_string(),
            row.fidelity_sg.to_string(),
            row.fidelity_test.to_string(),
            row.unfairness_sg.to_string(),
            row.unfairness_test.to_string(),
        ])
        .map_err(CliError::runtime)?;
    }
    csv.flush()?;
    std::fs::write(
        dir.join("gap_summary.json"),
        serde_json::to_string_pretty(&report.summary)?,
    )?;
    write_manifest(
        &ctx.out,
        "generalize",
        Some(&ctx.config),
        vec!["generalize/gap.csv".into(), "generalize/gap_summary.json".into()],
    )?;
    println!(
        "generalize: mean |fidelity gap| {:.4}, mean |unfairness gap| {:.4} over {} epsilons",
        report.summary.mean_fidelity_gap,
        report.summary.mean_unfairness_gap,
        report.rows.len()
    );
    Ok(())
}

pub fn cmd_transfer(ctx: &Ctx) -> CliResult<()> {
    let data = ctx.load_encoded()?;
    let (train, suing, _) = ctx.partitions(&data)?;
    // Teacher first so the matrix rows start with the configured target.
    let mut families = vec![ctx.config.blackbox.target];
    families.extend(
        ctx.config
            .blackbox
            .families
            .iter()
            .copied()
            .filter(|&f| f != ctx.config.blackbox.target),
    );
    let models = families
        .iter()
        .map(|&f| ctx.load_or_train(f, &train))
        .collect::<CliResult<Vec<_>>>()?;

    let dir = ctx.out.join("transfer");
    ensure_dir(&dir)?;
    let mut artifacts = Vec::new();
    let params = ctx
        .config
        .constrained
        .attack_params(ctx.config.explainer.seed);
    for &epsilon in &ctx.config.transfer.epsilons {
        let report = transfer_experiment(
            &models,
            &suing,
            &ctx.config.explainer.surrogate(),
            ctx.config.metric,
            epsilon,
            &params,
        )?;
        let rel = format!("transfer/transfer_eps_{epsilon}.csv");
        let mut csv =
            csv::Writer::from_path(ctx.out.join(&rel)).map_err(CliError::runtime)?;
        csv.write_record([
            "teacher",
            "student",
            "label_agreement",
            "fidelity",
            "unfairness",
            "blank",
        ])
        .map_err(CliError::runtime)?;
        for cell in &report.cells {
            csv.write_record([
                cell.teacher.clone(),
                cell.student.clone(),
                cell.label_agreement.to_string(),
                fmt_opt(cell.fidelity),
                fmt_opt(cell.unfairness),
                cell.blank.to_string(),
            ])
            .map_err(CliError::runtime)?;
        }
        csv.flush()?;
        artifacts.push(rel);
    }
    write_manifest(&ctx.out, "transfer", Some(&ctx.config), artifacts)?;
    println!(
        "transfer: {} models x {} epsilons under {}",
        models.len(),
        ctx.config.transfer.epsilons.len(),
        dir.display()
    );
    Ok(())
}

pub fn cmd_rashomon(ctx: &Ctx) -> CliResult<()> {
    let data = ctx.load_encoded()?;
    let (train, suing, _) = ctx.partitions(&data)?;
    let model = ctx.load_or_train(ctx.config.blackbox.target, &train)?;
    let instance = ctx.suing_instance(&model, &suing)?;
    let learner = build_learner(&ctx.config.explainer, &instance.features)?;
    let curve = unfairness_range(
        learner.as_ref(),
        &instance,
        ctx.config.metric,
        &RangeGrid::FidelityLevels(ctx.config.rashomon.fidelity_levels.clone()),
        &ctx.config.rashomon.params(),
    )?;

    let dir = ctx.out.join("rashomon");
    ensure_dir(&dir)?;
    let mut csv = csv::Writer::from_path(dir.join("range.csv")).map_err(CliError::runtime)?;
    csv.write_record(["fidelity", "v", "min_disparity", "max_disparity", "feasible"])
        .map_err(CliError::runtime)?;
    for row in &curve.rows {
        csv.write_record([
            row.fidelity.to_string(),
            row.v.to_string(),
            fmt_opt(row.min_disparity),
            fmt_opt(row.max_disparity),
            row.feasible.to_string(),
        ])
        .map_err(CliError::runtime)?;
    }
    csv.flush()?;
    let meta = serde_json::json!({
        "metric": ctx.config.metric,
        "blackbox_id": instance.blackbox_id,
        "blackbox_unfairness": curve.blackbox_unfairness,
        "reference_loss": curve.reference_loss,
    });
    std::fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
    write_manifest(
        &ctx.out,
        "rashomon",
        Some(&ctx.config),
        vec!["rashomon/range.csv".into(), "rashomon/meta.json".into()],
    )?;
    let feasible = curve.rows.iter().filter(|r| r.feasible).count();
    println!(
        "rashomon: {} of {} fidelity levels feasible (reference loss {:.4})",
        feasible,
        curve.rows.len(),
        curve.reference_loss
    );
    Ok(())
}

fn read_f64(field: &str) -> Option<f64> {
    if field.is_empty() {
        None
    } else {
        field.parse().ok()
    }
}

pub fn cmd_report(out: &Path) -> CliResult<()> {
    let report_dir = out.join("report");
    let mut artifacts = Vec::new();
    let mut summary = String::new();

    let sweep_path = out.join("attack").join("sweep.csv");
    if sweep_path.exists() {
        let meta: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(out.join("attack").join("meta.json"))?,
        )?;
        let bb_unf = meta["blackbox_unfairness"].as_f64();
        let mut reader = csv::Reader::from_path(&sweep_path).map_err(CliError::runtime)?;
        let mut points = Vec::new();
        for record in reader.records() {
            let record = record.map_err(CliError::runtime)?;
            let (Some(unf), Some(fid)) = (
                read_f64(record.get(2).unwrap_or_default()),
                read_f64(record.get(1).unwrap_or_default()),
            ) else {
                continue; // failed sweep row
            };
            points.push(SweepPoint {
                unfairness: unf,
                fidelity: fid,
                on_front: record.get(6).unwrap_or_default() == "true",
            });
        }
        let title = format!(
            "fidelity-unfairness sweep ({} / {})",
            meta["family"].as_str().unwrap_or("?"),
            meta["metric"].as_str().unwrap_or("?")
        );
        ensure_dir(&report_dir)?;
        std::fs::write(report_dir.join("pareto.svg"), pareto_svg(&points, bb_unf, &title))?;
        artifacts.push("report/pareto.svg".into());
        summary.push_str(&format!(
            "sweep: {} points, blackbox unfairness {}\n",
            points.len(),
            bb_unf.map(|v| v.to_string()).unwrap_or_default()
        ));
    }

    let range_path = out.join("rashomon").join("range.csv");
    if range_path.exists() {
        let meta: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(out.join("rashomon").join("meta.json"))?,
        )?;
        let bb_unf = meta["blackbox_unfairness"].as_f64();
        let mut reader = csv::Reader::from_path(&range_path).map_err(CliError::runtime)?;
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(CliError::runtime)?;
            if record.get(4) != Some("true") {
                continue; // infeasible level: no interval to draw
            }
            if let (Some(fidelity), Some(lo), Some(hi)) = (
                read_f64(record.get(0).unwrap_or_default()),
                read_f64(record.get(2).unwrap_or_default()),
                read_f64(record.get(3).unwrap_or_default()),
            ) {
                rows.push(RangePoint {
                    fidelity,
                    min_disparity: lo,
                    max_disparity: hi,
                });
            }
        }
        let title = format!(
            "disparity range ({})",
            meta["metric"].as_str().unwrap_or("?")
        );
        ensure_dir(&report_dir)?;
        std::fs::write(report_dir.join("range.svg"), range_svg(&rows, bb_unf, &title))?;
        artifacts.push("report/range.svg".into());
        summary.push_str(&format!("range: {} feasible levels\n", rows.len()));
    }

    if artifacts.is_empty() {
        return Err(CliError::Usage(format!(
            "nothing to report: no attack/sweep.csv or rashomon/range.csv under {}",
            out.display()
        )));
    }
    std::fs::write(report_dir.join("summary.txt"), &summary)?;
    artifacts.push("report/summary.txt".into());
    write_manifest(out, "report", None, artifacts)?;
    print!("{summary}");
    Ok(())
}
