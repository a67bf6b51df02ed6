use freqprint::domain::{FeatureKind, FeatureLayout, FeatureMatrix};
use freqprint::features::{apply_pca, fit_windowed_pca, PcaConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(seed: u64, n: usize, layout: FeatureLayout) -> FeatureMatrix {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let d = layout.n_cols();
    let base: Vec<f64> = (0..d).map(|_| r.random_range(-3.0..3.0)).collect();
    let rows = (0..n)
        .map(|_| {
            let a: f64 = r.random_range(-2.0..2.0);
            let b: f64 = r.random_range(-0.5..0.5);
            (0..d)
                .map(|j| base[j] + a * (j as f64 * 0.7).sin() + b * (j as f64).cos() + 0.05 * r.random_range(-1.0..1.0))
                .collect()
        })
        .collect();
    FeatureMatrix::from_rows(rows, vec![0; n], FeatureKind::FreqDomain, Some(layout)).unwrap()
}

fn column_stats(m: &FeatureMatrix, j: usize, k: usize) -> (f64, f64) {
    let n = m.n_rows() as f64;
    let mean_j = m.rows().map(|r| r[j]).sum::<f64>() / n;
    let mean_k = m.rows().map(|r| r[k]).sum::<f64>() / n;
    let cov = m.rows().map(|r| (r[j] - mean_j) * (r[k] - mean_k)).sum::<f64>() / (n - 1.0);
    (mean_j, cov)
}

#[test]
fn training_projections_are_centered_and_decorrelated() {
    let layout = FeatureLayout::packed(2, 3, 5).unwrap();
    let train = random_matrix(1, 40, layout);
    let config = PcaConfig { budget: 9, per_window_max: 4, variance_threshold: 1.0 };
    let model = fit_windowed_pca(&train, &config).unwrap();
    let z = apply_pca(&model, &train).unwrap();
    let eigenvalues: Vec<f64> = model.windows().iter().flat_map(|w| w.eigenvalues.clone()).collect();
    assert_eq!(z.n_cols(), eigenvalues.len());

    let mut offset = 0;
    for w in model.windows() {
        for a in 0..w.k() {
            for b in 0..w.k() {
                let (mean, cov) = column_stats(&z, offset + a, offset + b);
                assert!(mean.abs() < 1e-9);
                let expected = if a == b { w.eigenvalues[a] } else { 0.0 };
                assert!((cov - expected).abs() < 1e-9 * (1.0 + w.eigenvalues[0]), "{cov} vs {expected}");
            }
        }
        offset += w.k();
    }
}

#[test]
fn projection_of_differences_is_linear() {
    let layout = FeatureLayout::packed(1, 4, 6).unwrap();
    let train = random_matrix(2, 30, layout);
    let model = fit_windowed_pca(&train, &PcaConfig { budget: 12, per_window_max: 3, variance_threshold: 1.0 }).unwrap();
    let probe = random_matrix(3, 3, layout);
    let (x, y) = (probe.row(0), probe.row(1));
    let combo: Vec<f64> = x.iter().zip(y).map(|(a, b)| 2.0 * a - 0.5 * b).collect();
    let m = FeatureMatrix::from_rows(vec![x.to_vec(), y.to_vec(), combo], vec![0; 3], FeatureKind::FreqDomain, Some(layout))
        .unwrap();
    let z = apply_pca(&model, &m).unwrap();
    // P(2x - y/2) = 2 P(x) - P(y)/2 + (1 - 2 + 1/2) P(0)
    let origin = FeatureMatrix::from_rows(vec![vec![0.0; layout.n_cols()]], vec![0], FeatureKind::FreqDomain, Some(layout)).unwrap();
    let z0 = apply_pca(&model, &origin).unwrap();
    for j in 0..z.n_cols() {
        let expected = 2.0 * z.row(0)[j] - 0.5 * z.row(1)[j] - 0.5 * z0.row(0)[j];
        assert!((z.row(2)[j] - expected).abs() < 1e-9);
    }
}

#[test]
fn windows_are_fitted_independently() {
    let layout = FeatureLayout::packed(1, 2, 4).unwrap();
    let train = random_matrix(4, 25, layout);
    let config = PcaConfig { budget: 8, per_window_max: 4, variance_threshold: 1.0 };
    let both = fit_windowed_pca(&train, &config).unwrap();

    let single = FeatureLayout::packed(1, 1, 4).unwrap();
    for w in 0..2 {
        let rows: Vec<Vec<f64>> = train.rows().map(|r| r[w * 4..(w + 1) * 4].to_vec()).collect();
        let slice = FeatureMatrix::from_rows(rows, vec![0; 25], FeatureKind::FreqDomain, Some(single)).unwrap();
        let alone = fit_windowed_pca(&slice, &PcaConfig { budget: 4, ..config }).unwrap();
        let (a, b) = (&both.windows()[w], &alone.windows()[0]);
        assert_eq!(a.k(), b.k());
        for (u, v) in a.components.iter().zip(&b.components) {
            assert!(u.iter().zip(v).all(|(x, y)| (x - y).abs() < 1e-12));
        }
    }
}
