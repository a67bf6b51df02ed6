use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{ClassId, FeatureMatrix, LabelMap};
use crate::error::{Error, Result};
use crate::features::{allocate_components, apply_pca, decompose_windows, PcaConfig, PcaModel, WindowFit};
use crate::ml::{class_index, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatencyConfig {
    /// Per-app test accuracy that counts as detected.
    pub accuracy_threshold: f64,
    /// Reported for apps that never reach the threshold.
    pub max_time_s: f64,
    /// Evaluate only the first this many prefixes.
    pub max_windows: Option<usize>,
}

impl Default for LatencyConfig {
    fn default() -> Self {
        Self {
            accuracy_threshold: 0.8,
            max_time_s: 10.0,
            max_windows: None,
        }
    }
}

/// Test accuracy after the first `windows` windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrefixAccuracy {
    pub windows: usize,
    /// Indexed like `DetectionReport::class_ids`.
    pub per_class: Vec<f64>,
    pub overall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub window_ms: f64,
    pub accuracy_threshold: f64,
    pub max_time_s: f64,
    pub class_ids: Vec<ClassId>,
    /// Seconds per class; `max_time_s` when never detected.
    pub detection_time_s: Vec<f64>,
    pub curve: Vec<PrefixAccuracy>,
}

/// First prefix (in windows) whose accuracy reaches `threshold` for each
/// class, as a time; classes that never reach it get `max_time_s`.
pub fn detection_times(curve: &[PrefixAccuracy], n_classes: usize, threshold: f64, window_ms: f64, max_time_s: f64) -> Vec<f64> {
    (0..n_classes)
        .map(|c| {
            curve
                .iter()
                .find(|p| p.per_class[c] >= threshold)
                .map_or(max_time_s, |p| (p.windows as f64 * window_ms / 1000.0).min(max_time_s))
        })
        .collect()
}

impl DetectionReport {
    /// Recomputes detection times from the stored curve.
    pub fn recompute(&self) -> Vec<f64> {
        detection_times(
            &self.curve,
            self.class_ids.len(),
            self.accuracy_threshold,
            self.window_ms,
            self.max_time_s,
        )
    }

    /// Fraction of classes detected by the end of each prefix.
    pub fn detected_fraction(&self) -> Vec<(f64, f64)> {
        let n = self.class_ids.len() as f64;
        self.curve
            .iter()
            .map(|p| {
                let t = p.windows as f64 * self.window_ms / 1000.0;
                let done = self
                    .detection_time_s
                    .iter()
                    .filter(|&&d| d <= t && d < self.max_time_s)
                    .count();
                (t, done as f64 / n)
            })
            .collect()
    }

    /// One row per app: `label,detection_time_s,detected`.
    pub fn apps_csv(&self, labels: &LabelMap) -> String {
        let mut out = String::from("label,detection_time_s,detected\n");
        for (i, (&c, &t)) in self.class_ids.iter().zip(&self.detection_time_s).enumerate() {
            let name = labels.name(c).unwrap_or("?");
            let detected = self
                .curve
                .iter()
                .any(|p| p.per_class[i] >= self.accuracy_threshold);
            let _ = writeln!(out, "{name},{t},{detected}");
        }
        out
    }

    /// One row per prefix: elapsed time, overall accuracy, fraction of
    /// apps detected, then every app's accuracy.
    pub fn curve_csv(&self, labels: &LabelMap) -> String {
        let mut out = String::from("windows,time_s,overall_accuracy,detected_fraction");
        for &c in &self.class_ids {
            let _ = write!(out, ",{}", labels.name(c).unwrap_or("?"));
        }
        out.push('\n');
        for (p, (t, f)) in self.curve.iter().zip(self.detected_fraction()) {
            let _ = write!(out, "{},{t},{},{f}", p.windows, p.overall);
            for a in &p.per_class {
                let _ = write!(out, ",{a}");
            }
            out.push('\n');
        }
        out
    }
}

struct Prefixes<'a> {
    fits: &'a [WindowFit],
    train: &'a FeatureMatrix,
    test: &'a FeatureMatrix,
    spec: &'a ModelSpec,
    pca: &'a PcaConfig,
    class_ids: &'a [ClassId],
    seed: u64,
}

fn prefix_accuracy(ctx: &Prefixes<'_>, w: usize) -> Result<PrefixAccuracy> {
    let Prefixes {
        fits,
        train,
        test,
        spec,
        pca,
        class_ids,
        seed,
    } = *ctx;
    let layout = train.layout().expect("checked by the caller");
    let ks = allocate_components(&fits[..w], pca)?;
    let model = PcaModel::from_fits(layout, &fits[..w], &ks)?;
    let tr = apply_pca(&model, train)?;
    let te = apply_pca(&model, test)?;
    let predictions = if tr.n_cols() == 0 {
        vec![class_ids[0]; te.n_rows()]
    } else {
        spec.train(&tr, seed)?.predict(&te)?
    };
    let mut hits = vec![0usize; class_ids.len()];
    let mut totals = vec![0usize; class_ids.len()];
    for (&truth, &pred) in te.labels().iter().zip(&predictions) {
        let i = class_index(class_ids, truth)?;
        totals[i] += 1;
        hits[i] += usize::from(truth == pred);
    }
    let per_class = hits
        .iter()
        .zip(&totals)
        .map(|(&h, &t)| if t == 0 { 0.0 } else { h as f64 / t as f64 })
        .collect();
    let overall = hits.iter().sum::<usize>() as f64 / te.n_rows().max(1) as f64;
    Ok(PrefixAccuracy {
        windows: w,
        per_class,
        overall,
    })
}

/// Detection latency by growing the observed prefix one window at a time.
///
/// For each prefix length `w`, the windowed PCA is refitted on the first `w`
/// windows of the training rows (the component budget is reallocated over
/// those windows), the classifier is retrained on the projection, and every
/// app's test rows are scored using only their first `w` windows.
pub fn detection_latency(
    train: &FeatureMatrix,
    test: &FeatureMatrix,
    spec: &ModelSpec,
    pca: &PcaConfig,
    window_ms: f64,
    config: &LatencyConfig,
    seed: u64,
) -> Result<DetectionReport> {
    if !(0.0..=1.0).contains(&config.accuracy_threshold) {
        return Err(Error::InvalidArgument(format!(
            "accuracy threshold {} is outside [0, 1]",
            config.accuracy_threshold
        )));
    }
    if !(window_ms > 0.0 && config.max_time_s > 0.0) {
        return Err(Error::InvalidArgument(
            "window length and maximum time must be positive".into(),
        ));
    }
    let layout = train
        .layout()
        .ok_or_else(|| Error::LayoutMismatch("training matrix has no window layout".into()))?;
    if test.layout() != Some(layout) {
        return Err(Error::LayoutMismatch("train and test layouts differ".into()));
    }
    let n = config
        .max_windows
        .map_or(layout.n_windows, |m| m.min(layout.n_windows));
    if n == 0 {
        return Err(Error::InvalidArgument("at least one window is needed".into()));
    }
    let class_ids = train.class_ids();
    let fits = decompose_windows(train, pca.per_window_max)?;
    let ctx = Prefixes {
        fits: &fits,
        train,
        test,
        spec,
        pca,
        class_ids: &class_ids,
        seed,
    };
    let curve = (1..=n)
        .into_par_iter()
        .map(|w| prefix_accuracy(&ctx, w))
        .collect::<Result<Vec<_>>>()?;
    let detection_time_s = detection_times(
        &curve,
        class_ids.len(),
        config.accuracy_threshold,
        window_ms,
        config.max_time_s,
    );
    Ok(DetectionReport {
        window_ms,
        accuracy_threshold: config.accuracy_threshold,
        max_time_s: config.max_time_s,
        class_ids,
        detection_time_s,
        curve,
    })
}
