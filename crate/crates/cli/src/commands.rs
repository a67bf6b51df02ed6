use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use freqprint::config::Config;
use freqprint::detect::open_set_csv;
use freqprint::domain::{ClassId, LabelMap};
use freqprint::features::{apply_pca, PcaModel};
use freqprint::ingest::{CorpusManifest, MANIFEST_FILE};
use freqprint::ml::{evaluate, Evaluation, ModelSpec, TrainedModel};
use freqprint::pipeline::{
    corpus_feature_sets, em_seed, latency_experiment, open_set_experiment, pick_holdout, project_split,
    simulate_feature_sets, train_and_evaluate, train_projected, FeatureSet, ModelKind, PipelineKind,
};
use freqprint::seed::derive_seed;
use freqprint::sim::{corpus_jobs, simulate_job, synthesize_em};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::output::Staged;

const TRAIN_SUMMARY: &str = "train.json";
const MODEL_FILE: &str = "model.json";
const PCA_FILE: &str = "pca.json";

fn feature_sets(config: &Config, corpus: Option<&Path>, pipelines: &[PipelineKind]) -> Result<Vec<FeatureSet>> {
    match corpus {
        Some(dir) => {
            let manifest = CorpusManifest::load(dir)?;
            if pipelines.iter().any(|p| p.needs_em()) && manifest.entries.iter().any(|e| e.em.is_none()) {
                bail!("{} has no EM captures; regenerate it with corpus.em = true", dir.display());
            }
            corpus_feature_sets(&manifest, config, pipelines)
                .with_context(|| format!("featurizing {}", dir.display()))
        }
        None => simulate_feature_sets(config, pipelines).context("simulating the configured corpus"),
    }
}

fn single_set(config: &Config, corpus: Option<&Path>, pipeline: PipelineKind) -> Result<FeatureSet> {
    Ok(feature_sets(config, corpus, &[pipeline])?.remove(0))
}

fn label(labels: &LabelMap, id: ClassId) -> &str {
    labels.name(id).unwrap_or("unknown")
}

fn confusion_csv(e: &Evaluation, labels: &LabelMap) -> String {
    let mut out = String::from("true\\predicted");
    for &c in &e.class_ids {
        let _ = write!(out, ",{}", label(labels, c));
    }
    out.push('\n');
    for (&c, row) in e.class_ids.iter().zip(&e.confusion) {
        out.push_str(label(labels, c));
        for n in row {
            let _ = write!(out, ",{n}");
        }
        out.push('\n');
    }
    out
}

fn predictions_csv(rows: &[usize], truth: &[ClassId], predicted: &[ClassId], labels: &LabelMap) -> String {
    let mut out = String::from("row,true,predicted\n");
    for ((r, &t), &p) in rows.iter().zip(truth).zip(predicted) {
        let _ = writeln!(out, "{r},{},{}", label(labels, t), label(labels, p));
    }
    out
}

fn print_confusion(e: &Evaluation, labels: &LabelMap) {
    let width = e
        .class_ids
        .iter()
        .map(|&c| label(labels, c).len())
        .max()
        .unwrap_or(0);
    for (&c, row) in e.class_ids.iter().zip(&e.confusion) {
        let counts: Vec<String> = row.iter().map(|n| format!("{n:>3}")).collect();
        say!("  {:<width$} {}", label(labels, c), counts.join(""));
    }
}

pub fn generate(config: &Config, out: &Path) -> Result<()> {
    let staged = Staged::new(out)?;
    let profiles = config.profiles();
    let sim = config.sim();
    let duration_us = (config.corpus.duration_s * 1e6).round() as u64;
    let mut manifest = CorpusManifest::new(staged.dir(), sim.tables.clone(), duration_us);
    let jobs = corpus_jobs(profiles.len(), config.corpus.traces_per_app, config.seed);
    // bounded batches keep at most a few raw captures in memory at once
    let batch = rayon::current_num_threads() * 2;
    for chunk in jobs.chunks(batch) {
        let traces = chunk
            .par_iter()
            .map(|job| {
                let dvfs = simulate_job(job, &profiles, &sim, config.corpus.duration_s)?;
                let em = if config.corpus.em {
                    Some(synthesize_em(&dvfs, &config.em, &sim.tables, em_seed(job.seed))?)
                } else {
                    None
                };
                Ok((job.trace_index, dvfs, em))
            })
            .collect::<freqprint::Result<Vec<_>>>()?;
        for (trace_id, dvfs, em) in &traces {
            manifest.write_trace(*trace_id, dvfs, em.as_ref())?;
        }
    }
    manifest.save()?;
    staged.write("config.toml", config.to_toml()?)?;
    let dir = staged.commit()?;

    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for e in &manifest.entries {
        *counts.entry(e.label.as_str()).or_default() += 1;
    }
    say!(
        "wrote {} traces for {} applications to {}",
        manifest.entries.len(),
        counts.len(),
        dir.display()
    );
    for (name, n) in counts {
        say!("  {name:<20} {n}");
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct TrainSummary {
    pipeline: PipelineKind,
    model: ModelKind,
    seed: u64,
    /// Label names indexed by class id.
    labels: Vec<String>,
    spec: ModelSpec,
    accuracy: f64,
    n_train: usize,
    n_test: usize,
    components: usize,
    components_per_window: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    knn_validation: Option<Vec<(usize, f64)>>,
}

pub fn train(config: &Config, corpus: Option<&Path>, pipeline: PipelineKind, model: ModelKind, out: &Path) -> Result<()> {
    let set = single_set(config, corpus, pipeline)?;
    let run = train_and_evaluate(&set, model, config, config.seed)?;
    let staged = Staged::new(out)?;
    run.model.save(&staged.path(MODEL_FILE))?;
    run.pca.save(&staged.path(PCA_FILE))?;
    let summary = TrainSummary {
        pipeline,
        model,
        seed: config.seed,
        labels: set.labels.names().to_vec(),
        spec: run.spec,
        accuracy: run.evaluation.accuracy,
        n_train: run.train_indices.len(),
        n_test: run.test_indices.len(),
        components: run.pca.total_components(),
        components_per_window: run.pca.components_per_window(),
        knn_validation: run.knn_scores.clone(),
    };
    staged.write_json(TRAIN_SUMMARY, &summary)?;
    staged.write("confusion.csv", confusion_csv(&run.evaluation, &set.labels))?;
    let truth: Vec<ClassId> = run.test_indices.iter().map(|&i| set.matrix.labels()[i]).collect();
    staged.write(
        "predictions.csv",
        predictions_csv(&run.test_indices, &truth, &run.evaluation.predictions, &set.labels),
    )?;
    let dir = staged.commit()?;

    say!(
        "{pipeline} {model}: accuracy {:.4} on {} test signatures ({} train, {} PCA components)",
        summary.accuracy, summary.n_test, summary.n_train, summary.components
    );
    print_confusion(&run.evaluation, &set.labels);
    say!("artifacts in {}", dir.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct EvaluationSummary {
    pipeline: PipelineKind,
    model: ModelKind,
    train_seed: u64,
    accuracy: f64,
    n_rows: usize,
}

pub fn evaluate_trained(config: &Config, corpus: Option<&Path>, trained: &Path, out: &Path) -> Result<()> {
    let summary_path = trained.join(TRAIN_SUMMARY);
    let text = fs::read_to_string(&summary_path).with_context(|| format!("reading {}", summary_path.display()))?;
    let summary: TrainSummary =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", summary_path.display()))?;
    let model = TrainedModel::load(&trained.join(MODEL_FILE))?;
    let pca = PcaModel::load(&trained.join(PCA_FILE))?;
    let train_labels = LabelMap::from_labels(summary.labels.iter().map(String::as_str));

    let set = single_set(config, corpus, summary.pipeline)?;
    let remapped = set
        .matrix
        .labels()
        .iter()
        .map(|&id| {
            let name = label(&set.labels, id);
            train_labels
                .id(name)
                .with_context(|| format!("label `{name}` was not part of training"))
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = apply_pca(&pca, &set.matrix.clone().with_labels(remapped)?)?;
    let evaluation = evaluate(&model, &rows)?;

    let staged = Staged::new(out)?;
    staged.write_json(
        "evaluation.json",
        &EvaluationSummary {
            pipeline: summary.pipeline,
            model: summary.model,
            train_seed: summary.seed,
            accuracy: evaluation.accuracy,
            n_rows: rows.n_rows(),
        },
    )?;
    staged.write("confusion.csv", confusion_csv(&evaluation, &train_labels))?;
    let indices: Vec<usize> = (0..rows.n_rows()).collect();
    staged.write(
        "predictions.csv",
        predictions_csv(&indices, rows.labels(), &evaluation.predictions, &train_labels),
    )?;
    let dir = staged.commit()?;

    say!(
        "{} {}: accuracy {:.4} on {} signatures",
        summary.pipeline,
        model.kind_name(),
        evaluation.accuracy,
        rows.n_rows()
    );
    print_confusion(&evaluation, &train_labels);
    say!("results in {}", dir.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct GridRow {
    pipeline: PipelineKind,
    model: ModelKind,
    runs: usize,
    mean_accuracy: f64,
    min_accuracy: f64,
    max_accuracy: f64,
}

fn has_em(config: &Config, corpus: Option<&Path>) -> Result<bool> {
    Ok(match corpus {
        Some(dir) => {
            let manifest = CorpusManifest::load(dir)?;
            !manifest.entries.is_empty() && manifest.entries.iter().all(|e| e.em.is_some())
        }
        None => config.corpus.em,
    })
}

/// Seed of repetition `run`; the first matches a plain `train`.
fn run_seed(seed: u64, run: usize) -> u64 {
    if run == 0 {
        seed
    } else {
        derive_seed(seed, &[run as u64])
    }
}

pub fn evaluate_grid(
    config: &Config,
    corpus: Option<&Path>,
    pipelines: &[PipelineKind],
    models: &[ModelKind],
    out: &Path,
) -> Result<()> {
    let pipelines = if pipelines.is_empty() {
        let mut p = vec![PipelineKind::DvfsTime, PipelineKind::DvfsFreq];
        if has_em(config, corpus)? {
            p.push(PipelineKind::EmFreq);
        }
        p
    } else {
        pipelines.to_vec()
    };
    let models = if models.is_empty() { ModelKind::ALL.to_vec() } else { models.to_vec() };
    let sets = feature_sets(config, corpus, &pipelines)?;
    let mut rows = Vec::new();
    for set in &sets {
        let split = project_split(set, config, config.seed)?;
        for &model in &models {
            let runs = if model == ModelKind::Rf { config.model.rf_runs } else { 1 };
            let accuracies = (0..runs)
                .map(|r| Ok(train_projected(&split, model, config, run_seed(config.seed, r))?.evaluation.accuracy))
                .collect::<Result<Vec<f64>>>()?;
            rows.push(GridRow {
                pipeline: set.pipeline,
                model,
                runs,
                mean_accuracy: accuracies.iter().sum::<f64>() / runs as f64,
                min_accuracy: accuracies.iter().cloned().fold(f64::INFINITY, f64::min),
                max_accuracy: accuracies.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            });
        }
    }

    let mut csv = String::from("pipeline,model,runs,mean_accuracy,min_accuracy,max_accuracy\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            r.pipeline, r.model, r.runs, r.mean_accuracy, r.min_accuracy, r.max_accuracy
        );
    }
    let staged = Staged::new(out)?;
    staged.write("accuracy.csv", csv)?;
    staged.write_json("summary.json", &serde_json::json!({ "seed": config.seed, "results": rows }))?;
    let dir = staged.commit()?;

    say!("{:<10} {:<5} {:>4} {:>8}", "pipeline", "model", "runs", "accuracy");
    for r in &rows {
        say!("{:<10} {:<5} {:>4} {:>8.4}", r.pipeline.name(), r.model.name(), r.runs, r.mean_accuracy);
    }
    say!("results in {}", dir.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct AppLatency<'a> {
    label: &'a str,
    detection_time_s: f64,
    detected: bool,
}

pub fn detect_latency(config: &Config, corpus: Option<&Path>, pipeline: PipelineKind, model: ModelKind, out: &Path) -> Result<()> {
    let set = single_set(config, corpus, pipeline)?;
    let report = latency_experiment(&set, model, config, config.seed)?;
    let apps: Vec<AppLatency> = report
        .class_ids
        .iter()
        .zip(&report.detection_time_s)
        .map(|(&c, &t)| AppLatency {
            label: label(&set.labels, c),
            detection_time_s: t,
            detected: t < report.max_time_s,
        })
        .collect();
    let overall_time_s = report
        .curve
        .iter()
        .find(|p| p.overall >= report.accuracy_threshold)
        .map(|p| p.windows as f64 * report.window_ms / 1000.0);

    let staged = Staged::new(out)?;
    staged.write("apps.csv", report.apps_csv(&set.labels))?;
    staged.write("curve.csv", report.curve_csv(&set.labels))?;
    staged.write_json(
        "summary.json",
        &serde_json::json!({
            "pipeline": pipeline,
            "model": model,
            "seed": config.seed,
            "window_ms": report.window_ms,
            "accuracy_threshold": report.accuracy_threshold,
            "max_time_s": report.max_time_s,
            "overall_reaches_threshold_s": overall_time_s,
            "apps": apps,
        }),
    )?;
    let dir = staged.commit()?;

    say!(
        "{pipeline} {model}: detection time per app (threshold {})",
        report.accuracy_threshold
    );
    for a in &apps {
        let mark = if a.detected { "" } else { "  (not detected)" };
        say!("  {:<20} {:>6.2} s{mark}", a.label, a.detection_time_s);
    }
    match overall_time_s {
        Some(t) => say!("overall accuracy reaches the threshold after {t:.2} s"),
        None => say!("overall accuracy never reaches the threshold"),
    }
    say!("results in {}", dir.display());
    Ok(())
}

pub fn openset(config: &Config, corpus: Option<&Path>, pipeline: PipelineKind, model: ModelKind, out: &Path) -> Result<()> {
    let set = single_set(config, corpus, pipeline)?;
    let holdout = pick_holdout(&set.labels, config, config.seed);
    let run = open_set_experiment(&set, &holdout, model, config, config.seed)?;

    let staged = Staged::new(out)?;
    staged.write("openset.csv", open_set_csv(&run.reports))?;
    staged.write_json(
        "summary.json",
        &serde_json::json!({
            "pipeline": pipeline,
            "model": model,
            "seed": config.seed,
            "holdout": run.holdout,
            "closed_set_accuracy": run.closed_set_accuracy,
            "reports": run.reports,
        }),
    )?;
    let dir = staged.commit()?;

    say!(
        "{pipeline} {model}: held out {}; closed-set accuracy {:.4}",
        run.holdout.join(", "),
        run.closed_set_accuracy
    );
    say!("{:>9} {:>7} {:>8} {:>9}", "threshold", "known", "unknown", "retained");
    for r in &run.reports {
        say!(
            "{:>9.3} {:>7.4} {:>8.4} {:>9.4}",
            r.threshold, r.known_accuracy, r.unknown_accuracy, r.known_retention
        );
    }
    say!("results in {}", dir.display());
    Ok(())
}

fn describe_model(model: &TrainedModel) {
    say!("{} classifier", model.kind_name());
    say!("  classes:  {}", model.class_ids().len());
    say!("  features: {}", model.n_features());
    match model {
        TrainedModel::Knn(m) => say!("  k = {}, {} stored rows", m.k, m.n_rows()),
        TrainedModel::Svm(_) => {}
        TrainedModel::Forest(m) => {
            let depth = m.trees.iter().map(|t| t.depth()).max().unwrap_or(0);
            say!("  {} trees, deepest {depth}", m.trees.len());
        }
    }
}

fn describe_pca(pca: &PcaModel) {
    let ks = pca.components_per_window();
    say!("windowed PCA");
    say!("  windows:    {}", ks.len());
    say!("  components: {}", pca.total_components());
    say!(
        "  per window: min {} max {}",
        ks.iter().min().unwrap_or(&0),
        ks.iter().max().unwrap_or(&0)
    );
}

pub fn inspect(path: &Path) -> Result<()> {
    if path.is_dir() {
        if path.join(MANIFEST_FILE).exists() {
            let manifest = CorpusManifest::load(path)?;
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for e in &manifest.entries {
                *counts.entry(e.label.as_str()).or_default() += 1;
            }
            let em = manifest.entries.iter().filter(|e| e.em.is_some()).count();
            say!("corpus {}", path.display());
            say!("  traces:   {} ({em} with EM)", manifest.entries.len());
            say!("  clusters: {}", manifest.tables.n_clusters());
            say!("  capture:  {} s", manifest.capture_duration_us as f64 / 1e6);
            for (name, n) in counts {
                say!("  {name:<20} {n}");
            }
            return Ok(());
        }
        if path.join(TRAIN_SUMMARY).exists() {
            let text = fs::read_to_string(path.join(TRAIN_SUMMARY))?;
            let summary: TrainSummary = serde_json::from_str(&text)?;
            say!(
                "trained {} {} (seed {}), accuracy {:.4}",
                summary.pipeline, summary.model, summary.seed, summary.accuracy
            );
            describe_model(&TrainedModel::load(&path.join(MODEL_FILE))?);
            describe_pca(&PcaModel::load(&path.join(PCA_FILE))?);
            return Ok(());
        }
        bail!("{} is neither a corpus nor a trained-model directory", path.display());
    }
    if path.extension().is_some_and(|e| e == "toml") {
        say!("{}", Config::load(path)?.to_toml()?.trim_end());
        return Ok(());
    }
    if let Ok(model) = TrainedModel::load(path) {
        describe_model(&model);
        return Ok(());
    }
    if let Ok(pca) = PcaModel::load(path) {
        describe_pca(&pca);
        return Ok(());
    }
    bail!("cannot tell what {} is", path.display())
}
