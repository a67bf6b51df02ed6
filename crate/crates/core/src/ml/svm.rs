//! One-vs-rest linear SVM.
//!
//! Each binary problem minimises `|w|²/2 + C·Σ hinge(y·w·x)` on centred and
//! scaled features, with the bias folded in as an extra constant feature.
//! Two deterministic solvers are available, both sweeping the rows in a
//! seeded shuffled order for at most `epochs` passes:
//!
//! * `pegasos` (default): primal sub-gradient steps `η_t = 1/(λt)` with
//!   `λ = 1/(C·n)`, returning the average of the second half of the iterates.
//! * `dual-cd`: coordinate descent on the box-constrained dual, stopping
//!   early once the projected gradient spread drops below `tolerance`.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{class_index, Probabilities};
use crate::domain::{ClassId, FeatureMatrix};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SvmSolver {
    #[default]
    Pegasos,
    DualCd,
}

/// How centred features are scaled before solving.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SvmScaling {
    /// One divisor for every column, so rows have unit mean squared norm.
    #[default]
    Global,
    /// Each column to unit variance.
    PerFeature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmConfig {
    pub c: f64,
    pub epochs: usize,
    pub solver: SvmSolver,
    pub scaling: SvmScaling,
    /// Dual solver stops once the projected gradient spans less than this.
    pub tolerance: f64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            epochs: 40,
            solver: SvmSolver::default(),
            scaling: SvmScaling::default(),
            tolerance: 1e-3,
        }
    }
}

/// Per-class hyperplanes in the original feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub class_ids: Vec<ClassId>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

struct Standardized {
    /// Row-major, one trailing 1.0 per row for the bias.
    data: Vec<f64>,
    width: usize,
    mean: Vec<f64>,
    scale: Vec<f64>,
}

fn standardize(train: &FeatureMatrix, scaling: SvmScaling) -> Standardized {
    let n = train.n_rows() as f64;
    let d = train.n_cols();
    let mut mean = vec![0.0; d];
    for row in train.rows() {
        mean.iter_mut().zip(row).for_each(|(m, x)| *m += x);
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for row in train.rows() {
        for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    let scale: Vec<f64> = match scaling {
        SvmScaling::Global => {
            let total = (var.iter().sum::<f64>() / n).sqrt();
            vec![if total > 0.0 { total } else { 1.0 }; d]
        }
        SvmScaling::PerFeature => var
            .iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect(),
    };
    let width = d + 1;
    let mut data = Vec::with_capacity(train.n_rows() * width);
    for row in train.rows() {
        data.extend(row.iter().zip(&mean).zip(&scale).map(|((x, m), s)| (x - m) / s));
        data.push(1.0);
    }
    Standardized {
        data,
        width,
        mean,
        scale,
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn pegasos(z: &Standardized, y: &[f64], config: &SvmConfig, seed: u64) -> Vec<f64> {
    let n = y.len();
    let lambda = 1.0 / (config.c * n as f64);
    let radius = 1.0 / lambda.sqrt();
    let total = config.epochs * n;
    let mut w = vec![0.0; z.width];
    let mut avg = vec![0.0; z.width];
    let mut averaged = 0usize;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng(seed);
    let mut t = 0usize;
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let x = &z.data[i * z.width..(i + 1) * z.width];
            let margin = y[i] * dot(&w, x);
            let shrink = 1.0 - 1.0 / t as f64;
            w.iter_mut().for_each(|v| *v *= shrink);
            if margin < 1.0 {
                let eta = 1.0 / (lambda * t as f64);
                w.iter_mut().zip(x).for_each(|(v, xi)| *v += eta * y[i] * xi);
            }
            let norm = dot(&w, &w).sqrt();
            if norm > radius {
                let f = radius / norm;
                w.iter_mut().for_each(|v| *v *= f);
            }
            if 2 * t > total {
                avg.iter_mut().zip(&w).for_each(|(a, v)| *a += v);
                averaged += 1;
            }
        }
    }
    avg.iter_mut().for_each(|a| *a /= averaged.max(1) as f64);
    avg
}

fn dual_cd(z: &Standardized, y: &[f64], config: &SvmConfig, seed: u64) -> Vec<f64> {
    let n = y.len();
    let c = config.c;
    let rows: Vec<&[f64]> = z.data.chunks_exact(z.width).collect();
    let q: Vec<f64> = rows.iter().map(|x| dot(x, x)).collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; z.width];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng(seed);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut pg_max = f64::NEG_INFINITY;
        let mut pg_min = f64::INFINITY;
        for &i in &order {
            let g = y[i] * dot(&w, rows[i]) - 1.0;
            let pg = if alpha[i] <= 0.0 {
                g.min(0.0)
            } else if alpha[i] >= c {
                g.max(0.0)
            } else {
                g
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg != 0.0 {
                let old = alpha[i];
                alpha[i] = (old - g / q[i]).clamp(0.0, c);
                let step = (alpha[i] - old) * y[i];
                w.iter_mut().zip(rows[i]).for_each(|(v, x)| *v += step * x);
            }
        }
        if pg_max - pg_min < config.tolerance {
            break;
        }
    }
    w
}

pub fn train_svm(train: &FeatureMatrix, config: &SvmConfig, seed: u64) -> Result<SvmModel> {
    if !(config.c.is_finite() && config.c > 0.0) || config.epochs == 0 {
        return Err(Error::InvalidArgument(
            "SVM needs C > 0 and at least one epoch".into(),
        ));
    }
    let class_ids = train.class_ids();
    if class_ids.len() < 2 {
        return Err(Error::SingleClass);
    }
    let targets = train
        .labels()
        .iter()
        .map(|&l| class_index(&class_ids, l))
        .collect::<Result<Vec<_>>>()?;
    let z = standardize(train, config.scaling);
    let d = train.n_cols();
    let fitted: Vec<(Vec<f64>, f64)> = (0..class_ids.len())
        .into_par_iter()
        .map(|k| {
            let y: Vec<f64> = targets
                .iter()
                .map(|&t| if t == k { 1.0 } else { -1.0 })
                .collect();
            let class_seed = derive_seed(seed, &[k as u64]);
            let w = match config.solver {
                SvmSolver::DualCd => dual_cd(&z, &y, config, class_seed),
                SvmSolver::Pegasos => pegasos(&z, &y, config, class_seed),
            };
            let weights: Vec<f64> = (0..d).map(|j| w[j] / z.scale[j]).collect();
            let bias = w[d] - (0..d).map(|j| w[j] * z.mean[j] / z.scale[j]).sum::<f64>();
            (weights, bias)
        })
        .collect();
    let (weights, biases) = fitted.into_iter().unzip();
    Ok(SvmModel {
        class_ids,
        weights,
        biases,
    })
}

/// Softmax of a margin vector, shifted by its maximum.
pub fn softmax(margins: &[f64]) -> Vec<f64> {
    let top = margins.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = margins.iter().map(|m| (m - top).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

impl SvmModel {
    pub fn n_features(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn margins(&self, row: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| dot(w, row) + b)
            .collect()
    }

    pub(crate) fn predict_proba(&self, rows: &FeatureMatrix) -> Probabilities {
        let values = rows
            .rows()
            .flat_map(|r| softmax(&self.margins(r)))
            .collect();
        Probabilities::new(self.class_ids.clone(), values)
    }
}
