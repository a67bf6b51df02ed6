//! Windowed principal component analysis.
//!
//! Each time window of the feature layout gets its own PCA, fitted on that
//! window's slice of the training rows. A global component budget is then
//! shared across windows: every window that has any variance starts with
//! one component, and the rest of the budget goes one component at a time to
//! whichever window's next component explains the largest fraction of its
//! window's variance, skipping windows that already reach the variance
//! threshold or the per-window cap.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{FeatureLayout, FeatureMatrix};
use crate::error::{Error, Result};

const PCA_VERSION: u32 = 1;

/// Eigenvalues below this fraction of the largest one count as numerical zero.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcaConfig {
    pub budget: usize,
    pub per_window_max: usize,
    pub variance_threshold: f64,
}

impl Default for PcaConfig {
    fn default() -> Self {
        Self {
            budget: 660,
            per_window_max: 17,
            variance_threshold: 0.99,
        }
    }
}

/// Decomposition of one window's centered training slice, strongest
/// component first. Components have unit norm and their largest-magnitude
/// entry positive.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowFit {
    pub mean: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub components: Vec<Vec<f64>>,
    pub total_variance: f64,
}

impl WindowFit {
    /// Fraction of the window's variance carried by component `i`.
    pub fn explained(&self, i: usize) -> f64 {
        self.eigenvalues[i] / self.total_variance
    }

    pub fn is_degenerate(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Fits one window. `x` holds the raw (uncentered) rows; at most
/// `max_components` components are kept. Covariance uses the `n - 1`
/// denominator. When there are more columns than rows the smaller Gram
/// matrix is decomposed instead.
pub fn fit_window(mut x: DMatrix<f64>, max_components: usize) -> WindowFit {
    let n = x.nrows();
    let d = x.ncols();
    let mean: Vec<f64> = (0..d).map(|j| x.column(j).sum() / n as f64).collect();
    let constant = (0..d).all(|j| {
        let col = x.column(j);
        col.iter().all(|&v| v == col[0])
    });
    for (j, m) in mean.iter().enumerate() {
        x.column_mut(j).add_scalar_mut(-m);
    }
    let denom = (n - 1) as f64;
    let total_variance = x.iter().map(|v| v * v).sum::<f64>() / denom;
    let degenerate = WindowFit {
        mean: mean.clone(),
        eigenvalues: Vec::new(),
        components: Vec::new(),
        total_variance,
    };
    if constant || total_variance <= 0.0 || max_components == 0 {
        return degenerate;
    }

    let gram = d > n;
    let small = if gram {
        &x * x.transpose()
    } else {
        x.tr_mul(&x)
    } / denom;
    let eig = SymmetricEigen::new(small);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let largest = eig.eigenvalues[order[0]];
    if largest <= 0.0 {
        return degenerate;
    }

    let mut eigenvalues = Vec::new();
    let mut components = Vec::new();
    for &i in order.iter().take(max_components) {
        let lambda = eig.eigenvalues[i];
        if lambda <= largest * RANK_TOLERANCE {
            break;
        }
        let u = eig.eigenvectors.column(i);
        let mut v: Vec<f64> = if gram {
            let v = x.tr_mul(&u);
            let norm = v.norm();
            v.iter().map(|a| a / norm).collect()
        } else {
            u.iter().copied().collect()
        };
        fix_sign(&mut v);
        eigenvalues.push(lambda);
        components.push(v);
    }
    WindowFit {
        mean,
        eigenvalues,
        components,
        total_variance,
    }
}

fn gather(matrix: &FeatureMatrix, layout: &FeatureLayout, w: usize) -> DMatrix<f64> {
    let dim = layout.window_dim();
    let mut buf = Vec::with_capacity(dim);
    let mut x = DMatrix::zeros(matrix.n_rows(), dim);
    for (i, row) in matrix.rows().enumerate() {
        layout.gather_window(row, w, &mut buf);
        for (j, &v) in buf.iter().enumerate() {
            x[(i, j)] = v;
        }
    }
    x
}

fn require_layout(matrix: &FeatureMatrix) -> Result<FeatureLayout> {
    matrix
        .layout()
        .ok_or_else(|| Error::LayoutMismatch("matrix has no window layout".into()))
}

/// Fits every window of `train` independently, keeping up to
/// `max_components` per window.
pub fn decompose_windows(train: &FeatureMatrix, max_components: usize) -> Result<Vec<WindowFit>> {
    let layout = require_layout(train)?;
    if train.n_rows() < 2 {
        return Err(Error::TooFewRows {
            needed: 2,
            have: train.n_rows(),
        });
    }
    Ok((0..layout.n_windows)
        .into_par_iter()
        .map(|w| fit_window(gather(train, &layout, w), max_components))
        .collect())
}

/// Components to keep per window under `config`; see the module docs.
pub fn allocate_components(fits: &[WindowFit], config: &PcaConfig) -> Result<Vec<usize>> {
    if config.budget < fits.len() {
        return Err(Error::BudgetTooSmall {
            budget: config.budget,
            n_windows: fits.len(),
        });
    }
    let available: Vec<usize> = fits
        .iter()
        .map(|f| f.eigenvalues.len().min(config.per_window_max))
        .collect();
    let mut ks: Vec<usize> = available.iter().map(|&a| a.min(1)).collect();
    let mut covered: Vec<f64> = fits
        .iter()
        .zip(&ks)
        .map(|(f, &k)| if k > 0 { f.explained(0) } else { 0.0 })
        .collect();
    let mut used: usize = ks.iter().sum();
    while used < config.budget {
        let mut best: Option<(usize, f64)> = None;
        for w in 0..fits.len() {
            if ks[w] >= available[w] || covered[w] >= config.variance_threshold {
                continue;
            }
            let next = fits[w].explained(ks[w]);
            if best.is_none_or(|(_, b)| next > b) {
                best = Some((w, next));
            }
        }
        let Some((w, next)) = best else { break };
        ks[w] += 1;
        covered[w] += next;
        used += 1;
    }
    Ok(ks)
}

/// The retained projection of one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaWindow {
    pub mean: Vec<f64>,
    /// `k` unit vectors of the window's dimension, strongest first.
    pub components: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub explained: Vec<f64>,
}

impl PcaWindow {
    pub fn k(&self) -> usize {
        self.components.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    version: u32,
    layout: FeatureLayout,
    windows: Vec<PcaWindow>,
}

impl PcaModel {
    /// Keeps the first `ks[w]` components of each fit. The fits cover the
    /// first `fits.len()` windows of `layout`.
    pub fn from_fits(layout: FeatureLayout, fits: &[WindowFit], ks: &[usize]) -> Result<Self> {
        if fits.len() != ks.len() || fits.is_empty() || fits.len() > layout.n_windows {
            return Err(Error::LayoutMismatch(format!(
                "{} fits and {} allocations for a {}-window layout",
                fits.len(),
                ks.len(),
                layout.n_windows
            )));
        }
        let windows = fits
            .iter()
            .zip(ks)
            .map(|(f, &k)| PcaWindow {
                mean: f.mean.clone(),
                components: f.components[..k].to_vec(),
                eigenvalues: f.eigenvalues[..k].to_vec(),
                explained: (0..k).map(|i| f.explained(i)).collect(),
            })
            .collect();
        Ok(Self {
            version: PCA_VERSION,
            layout: FeatureLayout {
                n_windows: fits.len(),
                ..layout
            },
            windows,
        })
    }

    pub fn layout(&self) -> FeatureLayout {
        self.layout
    }

    pub fn windows(&self) -> &[PcaWindow] {
        &self.windows
    }

    pub fn components_per_window(&self) -> Vec<usize> {
        self.windows.iter().map(PcaWindow::k).collect()
    }

    pub fn total_components(&self) -> usize {
        self.windows.iter().map(PcaWindow::k).sum()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string(self)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: PcaModel = serde_json::from_str(&text)?;
        if model.version != PCA_VERSION {
            return Err(Error::UnsupportedVersion {
                expected: PCA_VERSION,
                found: model.version,
            });
        }
        Ok(model)
    }
}

/// Fits a windowed PCA on the training rows.
pub fn fit_windowed_pca(train: &FeatureMatrix, config: &PcaConfig) -> Result<PcaModel> {
    let layout = require_layout(train)?;
    if config.budget < layout.n_windows {
        return Err(Error::BudgetTooSmall {
            budget: config.budget,
            n_windows: layout.n_windows,
        });
    }
    let fits = decompose_windows(train, config.per_window_max)?;
    let ks = allocate_components(&fits, config)?;
    PcaModel::from_fits(layout, &fits, &ks)
}

/// Projects every row: per window, subtract the fitted mean and take dot
/// products with the retained components. Output columns run window by
/// window. The matrix may have more windows than the model; the extra
/// windows are ignored.
pub fn apply_pca(model: &PcaModel, matrix: &FeatureMatrix) -> Result<FeatureMatrix> {
    let layout = require_layout(matrix)?;
    let ml = model.layout;
    if layout.channels != ml.channels
        || layout.channel_stride != ml.channel_stride
        || layout.window_width != ml.window_width
        || layout.n_windows < ml.n_windows
    {
        return Err(Error::LayoutMismatch(format!(
            "model expects {ml:?}, matrix has {layout:?}"
        )));
    }
    let n = matrix.n_rows();
    let width = model.total_components();
    let mut out = vec![0.0; n * width];
    let mut col = 0;
    for (w, win) in model.windows.iter().enumerate() {
        let k = win.k();
        if k == 0 {
            continue;
        }
        let mut x = gather(matrix, &layout, w);
        for (j, m) in win.mean.iter().enumerate() {
            x.column_mut(j).add_scalar_mut(-m);
        }
        let basis = DMatrix::from_fn(layout.window_dim(), k, |r, c| win.components[c][r]);
        let proj = x * basis;
        for i in 0..n {
            for c in 0..k {
                out[i * width + col + c] = proj[(i, c)];
            }
        }
        col += k;
    }
    FeatureMatrix::new(out, width, matrix.labels().to_vec(), matrix.kind(), None)
}
