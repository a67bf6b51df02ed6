//! End-to-end experiments: captures to features, features to trained
//! models, latency curves and open-set sweeps.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::detect::{detection_latency, open_set_eval, DetectionReport, OpenSetReport};
use crate::domain::{
    ClassId, DvfsTrace, EmTrace, FeatureKind, FeatureLayout, FeatureMatrix, FrequencyTables, LabelMap,
    UNKNOWN_CLASS,
};
use crate::error::{Error, Result};
use crate::features::{
    apply_pca, fit_windowed_pca, spectral_layout, spectral_row, time_layout, PcaModel, WindowPlan,
    WindowedSpectrum,
};
use crate::ingest::CorpusManifest;
use crate::ml::{evaluate, select_k, Evaluation, ModelSpec, TrainedModel};
use crate::preprocess::{append_clusters, grid_len, interpolate_trace, resample_em, split_dataset};
use crate::seed::{derive_seed, rng};
use crate::sim::{corpus_jobs, simulate_job, synthesize_em, EmSynthConfig};

/// Seed streams derived from an experiment seed.
const SPLIT_STREAM: u64 = 1;
const MODEL_STREAM: u64 = 2;
const HOLDOUT_STREAM: u64 = 3;
const KNN_STREAM: u64 = 4;
const EM_STREAM: u64 = 0x454d;

/// Seed of the EM capture rendered alongside the DVFS trace simulated from `trace_seed`.
pub fn em_seed(trace_seed: u64) -> u64 {
    derive_seed(trace_seed, &[EM_STREAM])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PipelineKind {
    DvfsTime,
    DvfsFreq,
    EmFreq,
}

impl PipelineKind {
    pub const ALL: [PipelineKind; 3] = [PipelineKind::DvfsTime, PipelineKind::DvfsFreq, PipelineKind::EmFreq];

    pub fn name(self) -> &'static str {
        match self {
            PipelineKind::DvfsTime => "dvfs-time",
            PipelineKind::DvfsFreq => "dvfs-freq",
            PipelineKind::EmFreq => "em-freq",
        }
    }

    pub fn needs_em(self) -> bool {
        self == PipelineKind::EmFreq
    }
}

impl fmt::Display for PipelineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PipelineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown pipeline `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Knn,
    Svm,
    Rf,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Knn, ModelKind::Svm, ModelKind::Rf];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Knn => "knn",
            ModelKind::Svm => "svm",
            ModelKind::Rf => "rf",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model `{s}`")))
    }
}

/// Turns one capture into one feature row for a pipeline.
#[derive(Debug, Clone)]
pub struct Featurizer {
    pipeline: PipelineKind,
    tables: FrequencyTables,
    dt_us: u64,
    duration_us: u64,
    plan: WindowPlan,
    spectrum: Option<WindowedSpectrum>,
    layout: FeatureLayout,
    em_len: usize,
}

impl Featurizer {
    pub fn new(pipeline: PipelineKind, config: &Config, tables: &FrequencyTables) -> Result<Self> {
        let pre = config.preprocess;
        let duration_ms = pre.duration_us as f64 / 1000.0;
        let (plan, spectrum, layout, em_len) = match pipeline {
            PipelineKind::DvfsTime | PipelineKind::DvfsFreq => {
                let plan = config.features.dvfs_plan(pre.dt_us)?;
                plan.check_duration(duration_ms)?;
                let channels = tables.n_clusters();
                if pipeline == PipelineKind::DvfsTime {
                    let layout = time_layout(channels, grid_len(pre.dt_us, pre.duration_us), &plan)?;
                    (plan, None, layout, 0)
                } else {
                    let t = WindowedSpectrum::new(plan, config.features.dvfs_spectrum);
                    let layout = spectral_layout(channels, &t)?;
                    (plan, Some(t), layout, 0)
                }
            }
            PipelineKind::EmFreq => {
                let fs = config.em.sample_rate_hz;
                let plan = config.features.em_plan(fs)?;
                plan.check_duration(duration_ms)?;
                let t = WindowedSpectrum::new(plan, config.features.em_spectrum);
                let layout = spectral_layout(1, &t)?;
                let em_len = EmTrace::expected_len(fs, pre.duration_us as f64 / 1e6);
                (plan, Some(t), layout, em_len)
            }
        };
        Ok(Self {
            pipeline,
            tables: tables.clone(),
            dt_us: pre.dt_us,
            duration_us: pre.duration_us,
            plan,
            spectrum,
            layout,
            em_len,
        })
    }

    pub fn pipeline(&self) -> PipelineKind {
        self.pipeline
    }

    pub fn plan(&self) -> &WindowPlan {
        &self.plan
    }

    pub fn layout(&self) -> FeatureLayout {
        self.layout
    }

    pub fn feature_kind(&self) -> FeatureKind {
        match self.pipeline {
            PipelineKind::DvfsTime => FeatureKind::TimeDomain,
            _ => FeatureKind::FreqDomain,
        }
    }

    pub fn dvfs_row(&self, trace: &DvfsTrace) -> Result<Vec<f64>> {
        let series = interpolate_trace(trace, &self.tables, self.dt_us, self.duration_us)?;
        match &self.spectrum {
            None => append_clusters(&series),
            Some(t) => spectral_row(&series, t),
        }
    }

    pub fn em_row(&self, em: &EmTrace) -> Result<Vec<f64>> {
        let t = self
            .spectrum
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("EM captures need a spectral pipeline".into()))?;
        let series = resample_em(em, self.em_len)?;
        spectral_row(std::slice::from_ref(&series), t)
    }
}

/// Feature rows of a whole corpus for one pipeline, with the window layout
/// attached and label names alongside.
#[derive(Debug, Clone)]
pub struct FeatureSet {
    pub pipeline: PipelineKind,
    pub labels: LabelMap,
    pub matrix: FeatureMatrix,
    pub window_ms: f64,
}

fn assemble(featurizers: &[Featurizer], labels: LabelMap, rows: Vec<(ClassId, Vec<Vec<f64>>)>) -> Result<Vec<FeatureSet>> {
    let class_ids: Vec<ClassId> = rows.iter().map(|r| r.0).collect();
    let mut per_kind: Vec<Vec<f64>> = featurizers
        .iter()
        .map(|f| Vec::with_capacity(rows.len() * f.layout.n_cols()))
        .collect();
    for (_, row_set) in rows {
        for (acc, row) in per_kind.iter_mut().zip(row_set) {
            acc.extend(row);
        }
    }
    featurizers
        .iter()
        .zip(per_kind)
        .map(|(f, data)| {
            let matrix = FeatureMatrix::new(data, f.layout.n_cols(), class_ids.clone(), f.feature_kind(), Some(f.layout))?;
            Ok(FeatureSet {
                pipeline: f.pipeline,
                labels: labels.clone(),
                matrix,
                window_ms: f.plan.window_ms,
            })
        })
        .collect()
}

fn rows_for(
    featurizers: &[Featurizer],
    dvfs: &DvfsTrace,
    em: impl FnOnce() -> Result<EmTrace>,
) -> Result<Vec<Vec<f64>>> {
    let em = if featurizers.iter().any(|f| f.pipeline.needs_em()) {
        Some(em()?)
    } else {
        None
    };
    featurizers
        .iter()
        .map(|f| match (f.pipeline.needs_em(), &em) {
            (true, Some(em)) => f.em_row(em),
            _ => f.dvfs_row(dvfs),
        })
        .collect()
}

/// Simulates the configured corpus and featurizes it for each pipeline in
/// `pipelines`, one trace at a time so raw captures are never all in memory.
pub fn simulate_feature_sets(config: &Config, pipelines: &[PipelineKind]) -> Result<Vec<FeatureSet>> {
    let profiles = config.profiles();
    let sim = config.sim();
    crate::sim::validate_profiles(&profiles, sim.tables.n_clusters())?;
    let featurizers = pipelines
        .iter()
        .map(|&p| Featurizer::new(p, config, &sim.tables))
        .collect::<Result<Vec<_>>>()?;
    let labels = LabelMap::from_labels(profiles.iter().map(|p| p.label.as_str()));
    let jobs = corpus_jobs(profiles.len(), config.corpus.traces_per_app, config.seed);
    let rows = jobs
        .par_iter()
        .map(|job| {
            let trace = simulate_job(job, &profiles, &sim, config.corpus.duration_s)?;
            let id = labels.id_or_unknown(trace.label.as_deref());
            let em_config: &EmSynthConfig = &config.em;
            let rows = rows_for(&featurizers, &trace, || {
                synthesize_em(&trace, em_config, &sim.tables, em_seed(job.seed))
            })?;
            Ok((id, rows))
        })
        .collect::<Result<Vec<_>>>()?;
    assemble(&featurizers, labels, rows)
}

/// Featurizes a corpus directory for each pipeline in `pipelines`.
pub fn corpus_feature_sets(
    manifest: &CorpusManifest,
    config: &Config,
    pipelines: &[PipelineKind],
) -> Result<Vec<FeatureSet>> {
    if manifest.entries.is_empty() {
        return Err(Error::EmptyProfileList);
    }
    let featurizers = pipelines
        .iter()
        .map(|&p| Featurizer::new(p, config, &manifest.tables))
        .collect::<Result<Vec<_>>>()?;
    let labels = LabelMap::from_labels(manifest.entries.iter().map(|e| e.label.as_str()));
    let rows = manifest
        .entries
        .par_iter()
        .map(|entry| {
            let trace = manifest.read_dvfs(entry)?;
            let id = labels.id_or_unknown(Some(&entry.label));
            Ok((id, rows_for(&featurizers, &trace, || manifest.read_em(entry))?))
        })
        .collect::<Result<Vec<_>>>()?;
    assemble(&featurizers, labels, rows)
}

/// Validation accuracy for each candidate `k`.
pub type KnnScores = Vec<(usize, f64)>;

/// Classifier hyper-parameters for `model`. Without a fixed `k`, KNN picks
/// its neighbour count on a validation fold of `train`.
pub fn model_spec(model: ModelKind, train: &FeatureMatrix, config: &Config, seed: u64) -> Result<(ModelSpec, Option<KnnScores>)> {
    Ok(match model {
        ModelKind::Knn => match config.model.knn_k {
            Some(k) => (ModelSpec::Knn { k }, None),
            None => {
                let (k, scores) = select_k(train, &config.model.knn_sweep, config.split.ratio, derive_seed(seed, &[KNN_STREAM]))?;
                (ModelSpec::Knn { k }, Some(scores))
            }
        },
        ModelKind::Svm => (ModelSpec::Svm(config.model.svm), None),
        ModelKind::Rf => (ModelSpec::Forest(config.model.rf), None),
    })
}

/// Artifacts and scores of one train/test run.
#[derive(Debug, Clone)]
pub struct TrainRun {
    pub pca: PcaModel,
    pub spec: ModelSpec,
    pub model: TrainedModel,
    pub evaluation: Evaluation,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    /// Validation accuracy per candidate `k` when KNN swept it.
    pub knn_scores: Option<KnnScores>,
}

/// Split, windowed PCA on the training rows, classifier, test evaluation.
pub fn train_and_evaluate(set: &FeatureSet, model: ModelKind, config: &Config, seed: u64) -> Result<TrainRun> {
    train_projected(&project_split(set, config, seed)?, model, config, seed)
}

/// A stratified split with windowed PCA fitted on its training side.
#[derive(Debug, Clone)]
pub struct ProjectedSplit {
    pub pca: PcaModel,
    pub train: FeatureMatrix,
    pub test: FeatureMatrix,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

pub fn project_split(set: &FeatureSet, config: &Config, seed: u64) -> Result<ProjectedSplit> {
    let split = split_dataset(&set.matrix, config.split.ratio, derive_seed(seed, &[SPLIT_STREAM]))?;
    let pca = fit_windowed_pca(&split.train, &config.features.pca)?;
    Ok(ProjectedSplit {
        train: apply_pca(&pca, &split.train)?,
        test: apply_pca(&pca, &split.test)?,
        pca,
        train_indices: split.train_indices,
        test_indices: split.test_indices,
    })
}

/// Trains and scores one classifier on an already projected split, so
/// several classifiers can share one PCA fit.
pub fn train_projected(split: &ProjectedSplit, model: ModelKind, config: &Config, seed: u64) -> Result<TrainRun> {
    let model_seed = derive_seed(seed, &[MODEL_STREAM]);
    let (spec, knn_scores) = model_spec(model, &split.train, config, model_seed)?;
    let trained = spec.train(&split.train, model_seed)?;
    let evaluation = evaluate(&trained, &split.test)?;
    Ok(TrainRun {
        pca: split.pca.clone(),
        spec,
        model: trained,
        evaluation,
        train_indices: split.train_indices.clone(),
        test_indices: split.test_indices.clone(),
        knn_scores,
    })
}

/// Detection latency of `model` on a stratified split of `set`.
pub fn latency_experiment(set: &FeatureSet, model: ModelKind, config: &Config, seed: u64) -> Result<DetectionReport> {
    let split = split_dataset(&set.matrix, config.split.ratio, derive_seed(seed, &[SPLIT_STREAM]))?;
    let model_seed = derive_seed(seed, &[MODEL_STREAM]);
    let spec = match model {
        ModelKind::Knn if config.model.knn_k.is_none() => {
            let pca = fit_windowed_pca(&split.train, &config.features.pca)?;
            model_spec(model, &apply_pca(&pca, &split.train)?, config, model_seed)?.0
        }
        _ => model_spec(model, &split.train, config, model_seed)?.0,
    };
    detection_latency(
        &split.train,
        &split.test,
        &spec,
        &config.features.pca,
        set.window_ms,
        &config.detect,
        model_seed,
    )
}

/// Labels to withhold: the configured list, or `n_holdout` drawn at random.
pub fn pick_holdout(labels: &LabelMap, config: &Config, seed: u64) -> Vec<String> {
    if !config.openset.holdout.is_empty() {
        return config.openset.holdout.clone();
    }
    let mut names = labels.names().to_vec();
    names.shuffle(&mut rng(derive_seed(seed, &[HOLDOUT_STREAM])));
    names.truncate(config.openset.n_holdout.min(names.len()));
    names.sort();
    names
}

/// Open-set result plus the labels that were withheld.
#[derive(Debug, Clone)]
pub struct OpenSetRun {
    pub holdout: Vec<String>,
    pub reports: Vec<OpenSetReport>,
    pub closed_set_accuracy: f64,
}

/// Trains on the labels outside `holdout` and sweeps the rejection
/// threshold over the known test rows and every row of the withheld labels.
pub fn open_set_experiment(
    set: &FeatureSet,
    holdout: &[String],
    model: ModelKind,
    config: &Config,
    seed: u64,
) -> Result<OpenSetRun> {
    if holdout.is_empty() {
        return Err(Error::InvalidArgument("no applications are held out".into()));
    }
    let mut held = Vec::new();
    for name in holdout {
        held.push(labels_id(&set.labels, name)?);
    }
    if held.len() >= set.labels.len() {
        return Err(Error::InvalidArgument("every application is held out; nothing to train on".into()));
    }
    let (unknown_rows, known_rows): (Vec<usize>, Vec<usize>) =
        (0..set.matrix.n_rows()).partition(|&i| held.contains(&set.matrix.labels()[i]));
    if unknown_rows.is_empty() {
        return Err(Error::InvalidArgument("held-out applications have no rows".into()));
    }
    let known = set.matrix.select_rows(&known_rows);
    let unknown = set
        .matrix
        .select_rows(&unknown_rows)
        .with_labels(vec![UNKNOWN_CLASS; unknown_rows.len()])?;
    let split = split_dataset(&known, config.split.ratio, derive_seed(seed, &[SPLIT_STREAM]))?;
    let pca = fit_windowed_pca(&split.train, &config.features.pca)?;
    let train = apply_pca(&pca, &split.train)?;
    let known_test = apply_pca(&pca, &split.test)?;
    let unknown_test = apply_pca(&pca, &unknown)?;
    let model_seed = derive_seed(seed, &[MODEL_STREAM]);
    let (spec, _) = model_spec(model, &train, config, model_seed)?;
    let trained = spec.train(&train, model_seed)?;
    let closed_set_accuracy = evaluate(&trained, &known_test)?.accuracy;
    let reports = open_set_eval(&trained, &known_test, &unknown_test, &config.openset.thresholds)?;
    let mut holdout = holdout.to_vec();
    holdout.sort();
    Ok(OpenSetRun {
        holdout,
        reports,
        closed_set_accuracy,
    })
}

fn labels_id(labels: &LabelMap, name: &str) -> Result<ClassId> {
    labels.id(name).ok_or_else(|| Error::UnknownLabel(name.to_owned()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::WorkloadProfile;

    fn small_config() -> Config {
        let mut c = Config {
            profiles: vec![
                WorkloadProfile::constant("low", 0.1, 2),
                WorkloadProfile::constant("mid", 0.5, 2),
                WorkloadProfile::constant("high", 0.95, 2),
            ],
            ..Config::default()
        };
        c.corpus.traces_per_app = 4;
        c.corpus.duration_s = 1.0;
        c.preprocess.duration_us = 1_000_000;
        c.features.dvfs.n_windows = 10;
        c.features.pca.budget = 30;
        c
    }

    #[test]
    fn names_parse() {
        for p in PipelineKind::ALL {
            assert_eq!(p.name().parse::<PipelineKind>().unwrap(), p);
        }
        for m in ModelKind::ALL {
            assert_eq!(m.name().parse::<ModelKind>().unwrap(), m);
        }
        assert!("dvfs".parse::<PipelineKind>().is_err());
    }

    #[test]
    fn simulated_sets_have_expected_shapes() {
        let c = small_config();
        let sets = simulate_feature_sets(&c, &[PipelineKind::DvfsTime, PipelineKind::DvfsFreq]).unwrap();
        assert_eq!(sets[0].matrix.n_rows(), 12);
        assert_eq!(sets[0].matrix.n_cols(), 2 * 2000);
        assert_eq!(sets[1].matrix.n_cols(), 2 * 10 * 101);
        assert_eq!(sets[0].matrix.labels(), sets[1].matrix.labels());
        let again = simulate_feature_sets(&c, &[PipelineKind::DvfsFreq]).unwrap();
        assert_eq!(again[0].matrix, sets[1].matrix);
    }

    #[test]
    fn open_set_arguments() {
        let c = small_config();
        let set = simulate_feature_sets(&c, &[PipelineKind::DvfsFreq]).unwrap().remove(0);
        assert!(open_set_experiment(&set, &[], ModelKind::Rf, &c, 0).is_err());
        let all: Vec<String> = set.labels.names().to_vec();
        assert!(open_set_experiment(&set, &all, ModelKind::Rf, &c, 0).is_err());
        assert!(matches!(
            open_set_experiment(&set, &["nope".into()], ModelKind::Rf, &c, 0),
            Err(Error::UnknownLabel(_))
        ));
        let run = open_set_experiment(&set, &["mid".into()], ModelKind::Rf, &c, 0).unwrap();
        assert_eq!(run.reports.len(), c.openset.thresholds.len());
    }
}
