//! Acceptance suite. Each test prints one `PASS`/`FAIL` line to stderr
//! (outside the test harness capture) and then asserts.
//!
//! The tests hold a shared lock so their wall-clock budgets are measured
//! without competing for the CPU.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use freqprint::config::Config;
use freqprint::detect::DetectionReport;
use freqprint::domain::{
    ClassId, DvfsSample, EmTrace, FeatureKind, FeatureLayout, FeatureMatrix, FrequencyTable, UniformSeries,
};
use freqprint::features::{fit_windowed_pca, windowed_spectrum, PcaConfig, SpectrumConfig, WindowPlan};
use freqprint::ingest::{read_dvfs_log, read_em_trace, write_dvfs_log, write_em_trace};
use freqprint::ml::{
    predict_proba, train_knn, train_rf, train_svm, ForestConfig, SvmConfig, SvmSolver, TrainedModel,
};
use freqprint::pipeline::{
    latency_experiment, open_set_experiment, pick_holdout, project_split, simulate_feature_sets, train_projected,
    ModelKind, PipelineKind,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(id: u32, name: &str, ok: bool, elapsed: Duration, detail: &str) {
    let status = if ok { "PASS" } else { "FAIL" };
    let _ = writeln!(
        std::io::stderr(),
        "[{status}] criterion {id} ({name}): {detail} [{:.1} s]",
        elapsed.as_secs_f64()
    );
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- criterion 1

/// O(N²) DFT with the phase reduced modulo N before scaling.
fn naive_dft(x: &[f64]) -> Vec<(f64, f64)> {
    let n = x.len();
    (0..n)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &v) in x.iter().enumerate() {
                let angle = TAU * ((k * t) % n) as f64 / n as f64;
                re += v * angle.cos();
                im -= v * angle.sin();
            }
            (re, im)
        })
        .collect()
}

#[test]
fn c1_spectral_oracle() {
    let _guard = serial();
    let start = Instant::now();
    let mut r = rng(1);
    let mut worst_rel = 0.0f64;
    let mut worst_parseval = 0.0f64;
    for _ in 0..1000 {
        let n = r.random_range(2..=256usize);
        let scale = 10f64.powf(r.random_range(-3.0..3.0));
        let offset = r.random_range(-1.0..1.0) * scale;
        let values: Vec<f64> = (0..n).map(|_| offset + scale * r.random_range(-1.0..1.0)).collect();
        let plan = WindowPlan::new(n as f64, 1, 1000.0).unwrap();
        assert_eq!(plan.samples_per_window, n);
        let series = UniformSeries::new(values.clone(), 1000.0, 0.0).unwrap();
        let mags = windowed_spectrum(&series, &plan, &SpectrumConfig::default()).unwrap();
        assert_eq!(mags.len(), n / 2 + 1);

        let oracle: Vec<f64> = naive_dft(&values)[..=n / 2]
            .iter()
            .map(|&(re, im)| re.hypot(im))
            .collect();
        let peak = oracle.iter().cloned().fold(0.0, f64::max);
        let diff = mags.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst_rel = worst_rel.max(diff / peak);

        let time_energy: f64 = values.iter().map(|v| v * v).sum::<f64>() * n as f64;
        let freq_energy: f64 = mags
            .iter()
            .enumerate()
            .map(|(k, m)| {
                let weight = if k == 0 || 2 * k == n { 1.0 } else { 2.0 };
                weight * m * m
            })
            .sum();
        worst_parseval = worst_parseval.max((freq_energy - time_energy).abs() / time_energy);
    }
    let elapsed = start.elapsed();
    let ok = worst_rel < 1e-9 && worst_parseval < 1e-6 && elapsed < Duration::from_secs(30);
    report(
        1,
        "spectral oracle",
        ok,
        elapsed,
        &format!("1000 windows, max relative error {worst_rel:.2e}, Parseval {worst_parseval:.2e}"),
    );
    assert!(ok);
}

// ---------------------------------------------------------------- criterion 2

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// eigenvalues in descending order with unit eigenvectors.
fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let d = a.len();
    let mut v: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..d)
            .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let diag: f64 = (0..d).map(|i| a[i][i] * a[i][i]).sum();
        if off <= 1e-30 * diag.max(1e-300) {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let (akp, akq) = (row[p], row[q]);
                    row[p] = c * akp - s * akq;
                    row[q] = s * akp + c * akq;
                }
                let (row_p, row_q) = (a[p].clone(), a[q].clone());
                for (k, (apk, aqk)) in row_p.into_iter().zip(row_q).enumerate() {
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = order.iter().map(|&i| (0..d).map(|k| v[k][i]).collect()).collect();
    (values, vectors)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn c2_pca_oracle() {
    let _guard = serial();
    let start = Instant::now();
    let mut r = rng(2);
    let (mut worst_value, mut worst_vector, mut compared, mut skipped) = (0.0f64, 0.0f64, 0usize, 0usize);
    let mut monotone = true;
    let mut rank_ok = true;
    for _ in 0..100 {
        let n = r.random_range(3..=20usize);
        let d = r.random_range(2..=12usize);
        let scales: Vec<f64> = (0..d).map(|_| r.random_range(0.2..3.0)).collect();
        let mix: Vec<Vec<f64>> = (0..d).map(|_| (0..d).map(|_| r.sample(StandardNormal)).collect()).collect();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let z: Vec<f64> = scales.iter().map(|s| s * r.sample::<f64, _>(StandardNormal)).collect();
                (0..d).map(|j| 5.0 + dot(&z, &mix[j])).collect()
            })
            .collect();

        let layout = FeatureLayout::packed(1, 1, d).unwrap();
        let matrix = FeatureMatrix::from_rows(rows.clone(), vec![0; n], FeatureKind::TimeDomain, Some(layout)).unwrap();
        let config = PcaConfig {
            budget: d,
            per_window_max: d,
            variance_threshold: 1.0,
        };
        let model = fit_windowed_pca(&matrix, &config).unwrap();
        let window = &model.windows()[0];

        let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|x| x[j]).sum::<f64>() / n as f64).collect();
        let centered: Vec<Vec<f64>> = rows.iter().map(|x| x.iter().zip(&mean).map(|(a, m)| a - m).collect()).collect();
        let cov: Vec<Vec<f64>> = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| centered.iter().map(|x| x[i] * x[j]).sum::<f64>() / (n - 1) as f64)
                    .collect()
            })
            .collect();
        let (values, vectors) = jacobi_eigen(cov);
        let top = values[0];
        let rank = values.iter().filter(|&&v| v > 1e-9 * top).count();
        rank_ok &= window.k() == rank && rank == d.min(n - 1);

        for i in 0..window.k() {
            worst_value = worst_value.max((window.eigenvalues[i] - values[i]).abs() / top);
            let gap_below = if i + 1 < d { values[i] - values[i + 1] } else { f64::INFINITY };
            let gap_above = if i > 0 { values[i - 1] - values[i] } else { f64::INFINITY };
            if gap_below.min(gap_above) < 1e-4 * top {
                skipped += 1;
                continue;
            }
            let mut oracle = vectors[i].clone();
            if dot(&oracle, &window.components[i]) < 0.0 {
                oracle.iter_mut().for_each(|x| *x = -*x);
            }
            let err = oracle
                .iter()
                .zip(&window.components[i])
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            worst_vector = worst_vector.max(err);
            compared += 1;
        }

        let errors: Vec<f64> = (0..=window.k())
            .map(|k| {
                centered
                    .iter()
                    .map(|x| {
                        let mut residual = x.clone();
                        for c in &window.components[..k] {
                            let p = dot(x, c);
                            residual.iter_mut().zip(c).for_each(|(r, v)| *r -= p * v);
                        }
                        residual.iter().map(|v| v * v).sum::<f64>()
                    })
                    .sum()
            })
            .collect();
        let total = errors[0];
        monotone &= errors.windows(2).all(|w| w[1] <= w[0] + 1e-12 * total);
    }
    let elapsed = start.elapsed();
    let ok = worst_value < 1e-6
        && worst_vector < 1e-6
        && monotone
        && rank_ok
        && compared > 10 * skipped
        && elapsed < Duration::from_secs(30);
    report(
        2,
        "PCA oracle",
        ok,
        elapsed,
        &format!(
            "100 matrices, eigenvalue error {worst_value:.2e}, component error {worst_vector:.2e} \
             ({compared} compared, {skipped} near-degenerate skipped), reconstruction monotone {monotone}"
        ),
    );
    assert!(ok);
}

// ---------------------------------------------------------------- criterion 3

fn brute_neighbours(rows: &[Vec<f64>], targets: &[usize], query: &[f64], k: usize) -> Vec<(f64, usize)> {
    let mut all: Vec<(f64, usize)> = rows
        .iter()
        .zip(targets)
        .map(|(row, &t)| (row.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum(), t))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    all.truncate(k);
    all
}

fn blobs(r: &mut ChaCha8Rng, n: usize, dim: usize) -> (Vec<Vec<f64>>, Vec<ClassId>) {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    while rows.len() < n {
        let class = (rows.len() % 2) as ClassId;
        let centre = if class == 0 { -3.0 } else { 3.0 };
        let x: Vec<f64> = (0..dim).map(|_| centre + 0.7 * r.sample::<f64, _>(StandardNormal)).collect();
        // keep a clear margin around the separating hyperplane
        if (x.iter().sum::<f64>() / dim as f64).abs() < 1.0 {
            continue;
        }
        rows.push(x);
        labels.push(class);
    }
    (rows, labels)
}

#[test]
fn c3_classifier_sanity() {
    let _guard = serial();
    let start = Instant::now();
    let mut r = rng(3);
    let mut details = Vec::new();

    // KNN on an integer grid, so exact distance ties are common
    let n = 200;
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..3).map(|_| f64::from(r.random_range(0..8u8))).collect())
        .collect();
    let labels: Vec<ClassId> = (0..n).map(|_| r.random_range(0..4)).collect();
    let train = FeatureMatrix::from_rows(rows.clone(), labels.clone(), FeatureKind::FreqDomain, None).unwrap();
    let class_ids = train.class_ids();
    let targets: Vec<usize> = labels.iter().map(|l| class_ids.binary_search(l).unwrap()).collect();
    let queries: Vec<Vec<f64>> = rows
        .iter()
        .cloned()
        .chain((0..100).map(|_| (0..3).map(|_| r.random_range(-1.0..9.0)).collect()))
        .collect();
    let query_matrix = FeatureMatrix::from_rows(queries.clone(), vec![0; queries.len()], FeatureKind::FreqDomain, None).unwrap();
    let mut knn_ok = true;
    for k in [1, 3, 5, 20] {
        let model = train_knn(&train, k).unwrap();
        let proba = predict_proba(&TrainedModel::Knn(model.clone()), &query_matrix).unwrap();
        for (i, q) in queries.iter().enumerate() {
            let expected = brute_neighbours(&rows, &targets, q, k);
            knn_ok &= model.neighbours(q) == expected;
            let mut votes = vec![0.0; class_ids.len()];
            for &(_, t) in &expected {
                votes[t] += 1.0;
            }
            knn_ok &= proba.row(i).iter().zip(&votes).all(|(p, v)| *p == v / k as f64);
        }
    }
    details.push(format!("knn exact {knn_ok}"));

    // linear SVM on separable blobs, both solvers
    let (rows, labels) = blobs(&mut r, 200, 5);
    let train = FeatureMatrix::from_rows(rows, labels, FeatureKind::FreqDomain, None).unwrap();
    let (rows, labels) = blobs(&mut r, 200, 5);
    let test = FeatureMatrix::from_rows(rows, labels, FeatureKind::FreqDomain, None).unwrap();
    let mut svm_ok = true;
    for solver in [SvmSolver::Pegasos, SvmSolver::DualCd] {
        let config = SvmConfig {
            solver,
            ..SvmConfig::default()
        };
        let model = TrainedModel::Svm(train_svm(&train, &config, 11).unwrap());
        let train_acc = accuracy(&model, &train);
        let test_acc = accuracy(&model, &test);
        svm_ok &= train_acc == 1.0 && test_acc == 1.0;
        details.push(format!("svm {solver:?} train {train_acc} test {test_acc}"));
    }

    // one unbagged tree considering every feature, on distinct points
    let rows: Vec<Vec<f64>> = (0..300).map(|_| (0..4).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
    let labels: Vec<ClassId> = rows
        .iter()
        .map(|x| {
            let quadrant = ClassId::from(x[0] > 0.0) ^ ClassId::from(x[1] > 0.0);
            quadrant + ClassId::from(x[2] * x[3] > 0.25)
        })
        .collect();
    let train = FeatureMatrix::from_rows(rows, labels, FeatureKind::FreqDomain, None).unwrap();
    let config = ForestConfig {
        n_trees: 1,
        bootstrap: false,
        max_features: Some(4),
    };
    let tree = TrainedModel::Forest(train_rf(&train, &config, 5).unwrap());
    let tree_acc = accuracy(&tree, &train);
    details.push(format!("single tree train {tree_acc}"));

    let elapsed = start.elapsed();
    let ok = knn_ok && svm_ok && tree_acc == 1.0 && elapsed < Duration::from_secs(60);
    report(3, "classifier sanity", ok, elapsed, &details.join(", "));
    assert!(ok);
}

fn accuracy(model: &TrainedModel, m: &FeatureMatrix) -> f64 {
    let pred = model.predict(m).unwrap();
    pred.iter().zip(m.labels()).filter(|(a, b)| a == b).count() as f64 / pred.len() as f64
}

// ---------------------------------------------------------------- criterion 4

#[test]
fn c4_pipeline_ordering() {
    let _guard = serial();
    let start = Instant::now();
    let mut passing = 0;
    let mut lines = Vec::new();
    for seed in 1..=10u64 {
        let config = Config {
            seed,
            ..Config::default()
        };
        let sets = simulate_feature_sets(&config, &[PipelineKind::DvfsTime, PipelineKind::DvfsFreq]).unwrap();
        let mut acc = BTreeMap::new();
        for set in &sets {
            let split = project_split(set, &config, seed).unwrap();
            for model in [ModelKind::Svm, ModelKind::Rf] {
                let run = train_projected(&split, model, &config, seed).unwrap();
                acc.insert((set.pipeline.name(), model.name()), run.evaluation.accuracy);
            }
        }
        let get = |p: PipelineKind, m: ModelKind| acc[&(p.name(), m.name())];
        let svm_order = get(PipelineKind::DvfsFreq, ModelKind::Svm) > get(PipelineKind::DvfsTime, ModelKind::Svm);
        let rf_order = get(PipelineKind::DvfsFreq, ModelKind::Rf) > get(PipelineKind::DvfsTime, ModelKind::Rf);
        let rf_level = get(PipelineKind::DvfsFreq, ModelKind::Rf) >= 0.80;
        passing += usize::from(svm_order && rf_order && rf_level);
        lines.push(format!(
            "seed {seed}: svm time {:.3} freq {:.3}, rf time {:.3} freq {:.3}",
            get(PipelineKind::DvfsTime, ModelKind::Svm),
            get(PipelineKind::DvfsFreq, ModelKind::Svm),
            get(PipelineKind::DvfsTime, ModelKind::Rf),
            get(PipelineKind::DvfsFreq, ModelKind::Rf),
        ));
    }
    let elapsed = start.elapsed();
    for line in &lines {
        let _ = writeln!(std::io::stderr(), "    {line}");
    }
    let ok = passing >= 8 && elapsed < Duration::from_secs(600);
    report(
        4,
        "pipeline ordering",
        ok,
        elapsed,
        &format!("freq > time for SVM and RF with RF(freq) >= 0.80 on {passing}/10 seeds"),
    );
    assert!(ok);
}

// ---------------------------------------------------------------- criterion 5

fn cli(dir: &Path, args: &[&str], threads: &str) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_freqprint"))
        .current_dir(dir)
        .env("FREQPRINT_THREADS", threads)
        .args(args)
        .output()
        .expect("running freqprint");
    assert!(
        out.status.success(),
        "freqprint {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn c5_corpus_shape() {
    let _guard = serial();
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    cli(dir.path(), &["train", "--model", "knn", "--out", "run"], "1");
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run/train.json")).unwrap()).unwrap();
    let n_train = summary["n_train"].as_u64().unwrap();
    let n_test = summary["n_test"].as_u64().unwrap();
    let predictions = fs::read_to_string(dir.path().join("run/predictions.csv")).unwrap();
    let prediction_rows = predictions.lines().count() - 1;
    let elapsed = start.elapsed();
    let ok = n_train == 660 && n_test == 220 && prediction_rows == 220;
    report(
        5,
        "corpus shape",
        ok,
        elapsed,
        &format!("default corpus splits into {n_train} train / {n_test} test signatures"),
    );
    assert!(ok);
}

// ---------------------------------------------------------------- criterion 6

#[test]
fn c6_detection_latency() {
    let _guard = serial();
    let start = Instant::now();
    let mut config = Config::default();
    config.corpus.noise_scale = 0.0;
    let sets = simulate_feature_sets(&config, &[PipelineKind::DvfsFreq]).unwrap();
    let report_: DetectionReport = latency_experiment(&sets[0], ModelKind::Rf, &config, config.seed).unwrap();
    let window_s = report_.window_ms / 1000.0;
    let detected = |i: usize| report_.curve.iter().any(|p| p.per_class[i] >= report_.accuracy_threshold);
    let all_detected = (0..report_.class_ids.len()).all(|i| detected(i) && report_.detection_time_s[i] < 10.0);
    let fastest = report_.detection_time_s.iter().cloned().fold(f64::INFINITY, f64::min);
    let slowest = report_.detection_time_s.iter().cloned().fold(0.0, f64::max);
    let early = fastest <= 3.0 * window_s + 1e-9;
    let reach_80 = report_
        .curve
        .iter()
        .find(|p| p.overall >= 0.8)
        .map(|p| p.windows as f64 * window_s);
    let curve_ok = report_.curve.len() == config.features.dvfs.n_windows && reach_80.is_some_and(|t| t < 10.0);
    let elapsed = start.elapsed();
    let ok = all_detected && early && curve_ok && elapsed < Duration::from_secs(600);
    report(
        6,
        "detection latency",
        ok,
        elapsed,
        &format!(
            "{} apps detected, fastest {fastest:.1} s, slowest {slowest:.1} s, overall accuracy reaches 0.8 at {:?} s",
            report_.detection_time_s.iter().filter(|&&t| t < 10.0).count(),
            reach_80
        ),
    );
    assert!(ok);
}

// ---------------------------------------------------------------- criterion 7

#[test]
fn c7_open_set() {
    let _guard = serial();
    let start = Instant::now();
    let config = Config::default();
    let sets = simulate_feature_sets(&config, &[PipelineKind::DvfsFreq]).unwrap();
    let set = &sets[0];
    let holdout = pick_holdout(&set.labels, &config, config.seed);
    let run = open_set_experiment(set, &holdout, ModelKind::Rf, &config, config.seed).unwrap();
    let sorted = run.reports.windows(2).all(|w| w[0].threshold < w[1].threshold);
    let unknown_monotone = run.reports.windows(2).all(|w| w[1].unknown_accuracy >= w[0].unknown_accuracy);
    let retention_monotone = run.reports.windows(2).all(|w| w[1].known_retention <= w[0].known_retention);
    let reachable = run
        .reports
        .iter()
        .find(|r| r.unknown_accuracy >= 0.85 && r.known_accuracy >= 0.60);
    let elapsed = start.elapsed();
    let ok = set.labels.len() == 22
        && holdout.len() == 4
        && sorted
        && unknown_monotone
        && retention_monotone
        && reachable.is_some()
        && elapsed < Duration::from_secs(600);
    let detail = match reachable {
        Some(r) => format!(
            "holdout {holdout:?}; threshold {} gives unknown {:.3}, known {:.3}; monotone {}",
            r.threshold,
            r.unknown_accuracy,
            r.known_accuracy,
            unknown_monotone && retention_monotone
        ),
        None => format!("holdout {holdout:?}; no threshold reaches unknown 0.85 with known 0.60"),
    };
    report(7, "open-set reachability", ok, elapsed, &detail);
    assert!(ok);
}

// ---------------------------------------------------------------- criterion 8

const SMALL_CONFIG: &str = r#"
seed = 5

[corpus]
traces_per_app = 6
duration_s = 2.0
em = true

[em]
sample_rate_hz = 20000.0
carrier_base_hz = 1000.0
carrier_step_hz = 200.0

[preprocess]
duration_us = 2000000

[features.dvfs]
window_ms = 100.0
n_windows = 20

[features.em]
window_ms = 100.0
n_windows = 20

[features.pca]
budget = 60

[model]
rf_runs = 2

[detect]
max_time_s = 2.0

[openset]
n_holdout = 3
"#;

fn run_all_commands(root: &Path, threads: &str) -> Vec<(String, String)> {
    fs::write(root.join("small.toml"), SMALL_CONFIG).unwrap();
    let c = ["--config", "small.toml"];
    let with = |rest: &[&str]| -> Vec<String> { c.iter().chain(rest).map(|s| s.to_string()).collect() };
    let commands: Vec<Vec<String>> = vec![
        with(&["generate", "--out", "corpus"]),
        with(&["train", "--corpus", "corpus", "--out", "trained"]),
        with(&["train", "--pipeline", "em-freq", "--model", "svm", "--out", "trained-sim"]),
        with(&["evaluate", "--corpus", "corpus", "--trained", "trained", "--out", "scored"]),
        with(&["evaluate", "--corpus", "corpus", "--out", "grid"]),
        with(&["detect-latency", "--corpus", "corpus", "--model", "knn", "--out", "latency"]),
        with(&["openset", "--corpus", "corpus", "--model", "svm", "--out", "openset"]),
        vec!["inspect".into(), "corpus".into()],
        vec!["inspect".into(), "trained".into()],
        vec!["inspect".into(), "small.toml".into()],
    ];
    commands
        .iter()
        .map(|args| {
            let refs: Vec<&str> = args.iter().map(String::as_str).collect();
            (args.join(" "), cli(root, &refs, threads))
        })
        .collect()
}

fn files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    out
}

#[test]
fn c8_determinism() {
    let _guard = serial();
    let start = Instant::now();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let out_a = run_all_commands(a.path(), "1");
    let out_b = run_all_commands(b.path(), "3");
    let files_a = files(a.path());
    let files_b = files(b.path());
    let mut differing: Vec<String> = files_a
        .iter()
        .filter(|(p, bytes)| files_b.get(*p) != Some(bytes))
        .map(|(p, _)| p.display().to_string())
        .collect();
    differing.extend(
        files_b
            .keys()
            .filter(|p| !files_a.contains_key(*p))
            .map(|p| p.display().to_string()),
    );
    differing.extend(
        out_a
            .iter()
            .zip(&out_b)
            .filter(|(x, y)| x.1 != y.1)
            .map(|(x, _)| format!("stdout of `{}`", x.0)),
    );
    let elapsed = start.elapsed();
    let ok = differing.is_empty() && files_a.len() > 20;
    report(
        8,
        "determinism",
        ok,
        elapsed,
        &format!(
            "{} commands run twice (1 and 3 worker threads), {} artifacts compared, {} differ {:?}",
            out_a.len(),
            files_a.len(),
            differing.len(),
            differing
        ),
    );
    assert!(ok);
}

// ---------------------------------------------------------------- criterion 9

#[test]
fn c9_format_round_trips() {
    let _guard = serial();
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng(9);
    let mut dvfs_ok = 0;
    let mut em_ok = 0;
    for i in 0..1000 {
        let n_levels = r.random_range(1..=24usize);
        let mut levels: Vec<u32> = (0..n_levels).map(|_| r.random_range(1..=4_000_000)).collect();
        levels.sort_unstable();
        levels.dedup();
        let table = FrequencyTable::new(r.random_range(0..4), levels.clone()).unwrap();
        let mut t = r.random_range(0..1_000_000u64);
        let samples: Vec<DvfsSample> = (0..r.random_range(1..400))
            .map(|_| {
                t += r.random_range(0..5_000);
                let end = t + r.random_range(0..200);
                DvfsSample::new(t, end, levels[r.random_range(0..levels.len())])
            })
            .collect();
        let path = dir.path().join(format!("dvfs{i}.csv"));
        write_dvfs_log(&samples, &path).unwrap();
        dvfs_ok += usize::from(read_dvfs_log(&path, &table).unwrap() == samples);

        let rate = r.random_range(10.0..1e5);
        let duration = r.random_range(0.001..0.05);
        let n = EmTrace::expected_len(rate, duration);
        let values: Vec<f32> = (0..n)
            .map(|_| match r.random_range(0..10) {
                0 => f32::from_bits(r.random_range(1..0x0080_0000)), // subnormal
                1 => -0.0,
                _ => r.sample::<f32, _>(StandardNormal) * 10f32.powi(r.random_range(-6..6)),
            })
            .collect();
        let label = match r.random_range(0..3) {
            0 => None,
            1 => Some(format!("app-{i}")),
            _ => Some(format!("näme = {i} ✓")),
        };
        let trace = EmTrace::new(label, values, rate, duration).unwrap();
        let path = dir.path().join(format!("em{i}.em"));
        write_em_trace(&trace, &path).unwrap();
        let back = read_em_trace(&path).unwrap();
        let bitwise = back.samples.iter().map(|v| v.to_bits()).eq(trace.samples.iter().map(|v| v.to_bits()));
        em_ok += usize::from(back == trace && bitwise);
    }
    let elapsed = start.elapsed();
    let ok = dvfs_ok == 1000 && em_ok == 1000 && elapsed < Duration::from_secs(60);
    report(
        9,
        "format round-trips",
        ok,
        elapsed,
        &format!("{dvfs_ok}/1000 DVFS logs and {em_ok}/1000 EM captures identical after write and read"),
    );
    assert!(ok);
}
