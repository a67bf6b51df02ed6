use freqprint::config::Config;
use freqprint::ingest::CorpusManifest;
use freqprint::pipeline::{corpus_feature_sets, em_seed, simulate_feature_sets, PipelineKind};
use freqprint::sim::{corpus_jobs, simulate_job, synthesize_em};
use freqprint::Error;

fn small_config() -> Config {
    Config::from_toml(
        r#"
seed = 11
[corpus]
traces_per_app = 2
duration_s = 1.0
[em]
sample_rate_hz = 20000.0
carrier_base_hz = 1000.0
carrier_step_hz = 200.0
[preprocess]
duration_us = 1000000
[features.dvfs]
window_ms = 100.0
n_windows = 10
[features.em]
window_ms = 100.0
n_windows = 10
"#,
    )
    .unwrap()
}

fn write_corpus(config: &Config, root: &std::path::Path) -> CorpusManifest {
    let profiles = config.profiles();
    let sim = config.sim();
    let duration_us = (config.corpus.duration_s * 1e6).round() as u64;
    let mut manifest = CorpusManifest::new(root, sim.tables.clone(), duration_us);
    for job in corpus_jobs(profiles.len(), config.corpus.traces_per_app, config.seed) {
        let dvfs = simulate_job(&job, &profiles, &sim, config.corpus.duration_s).unwrap();
        let em = synthesize_em(&dvfs, &config.em, &sim.tables, em_seed(job.seed)).unwrap();
        manifest.write_trace(job.trace_index, &dvfs, Some(&em)).unwrap();
    }
    manifest.save().unwrap();
    manifest
}

#[test]
fn disk_corpus_featurizes_like_the_simulation() {
    let config = small_config();
    let dir = tempfile::tempdir().unwrap();
    write_corpus(&config, dir.path());
    let manifest = CorpusManifest::load(dir.path()).unwrap();
    assert_eq!(manifest.entries.len(), 22 * 2);
    assert_eq!(manifest.labels().len(), 22);

    let pipelines = [PipelineKind::DvfsTime, PipelineKind::DvfsFreq, PipelineKind::EmFreq];
    let from_disk = corpus_feature_sets(&manifest, &config, &pipelines).unwrap();
    let in_memory = simulate_feature_sets(&config, &pipelines).unwrap();
    for (a, b) in from_disk.iter().zip(&in_memory) {
        assert_eq!(a.pipeline, b.pipeline);
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.matrix, b.matrix, "{} rows differ", a.pipeline.name());
    }
}

#[test]
fn corrupt_log_reports_its_line() {
    let mut config = small_config();
    config.corpus.traces_per_app = 1;
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_corpus(&config, dir.path());
    let entry = &manifest.entries[0];
    let path = dir.path().join(&entry.dvfs[0]);
    let mut text = std::fs::read_to_string(&path).unwrap();
    text = text.replacen('\n', "\nnot,a,record\n", 1);
    std::fs::write(&path, text).unwrap();
    match manifest.read_dvfs(entry) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn missing_em_capture_is_an_error() {
    let config = small_config();
    let dir = tempfile::tempdir().unwrap();
    let mut manifest = write_corpus(&config, dir.path());
    manifest.entries.iter_mut().for_each(|e| e.em = None);
    assert!(corpus_feature_sets(&manifest, &config, &[PipelineKind::EmFreq]).is_err());
    assert!(corpus_feature_sets(&manifest, &config, &[PipelineKind::DvfsFreq]).is_ok());
}
