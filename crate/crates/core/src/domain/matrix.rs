use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense class id. Known classes are `0..n`; [`UNKNOWN_CLASS`] marks an
/// application the model was not trained on.
pub type ClassId = i32;

pub const UNKNOWN_CLASS: ClassId = -1;

/// Bidirectional map between application labels and dense class ids.
/// Ids follow the lexicographic order of the labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMap {
    names: Vec<String>,
}

impl LabelMap {
    pub fn from_labels<'a>(labels: impl IntoIterator<Item = &'a str>) -> Self {
        let set: BTreeSet<&str> = labels.into_iter().collect();
        Self {
            names: set.into_iter().map(str::to_owned).collect(),
        }
    }

    pub fn id(&self, label: &str) -> Option<ClassId> {
        self.names
            .binary_search_by(|n| n.as_str().cmp(label))
            .ok()
            .map(|i| i as ClassId)
    }

    /// Id for an optional label; `None` and labels outside the map are unknown.
    pub fn id_or_unknown(&self, label: Option<&str>) -> ClassId {
        label.and_then(|l| self.id(l)).unwrap_or(UNKNOWN_CLASS)
    }

    pub fn name(&self, id: ClassId) -> Option<&str> {
        usize::try_from(id)
            .ok()
            .and_then(|i| self.names.get(i))
            .map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// A real-valued series on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformSeries {
    pub values: Vec<f64>,
    pub dt_us: f64,
    pub origin_us: f64,
}

impl UniformSeries {
    pub fn new(values: Vec<f64>, dt_us: f64, origin_us: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyTrace);
        }
        if !(dt_us.is_finite() && dt_us > 0.0) {
            return Err(Error::InvalidArgument(format!("dt {dt_us} µs must be positive")));
        }
        Ok(Self {
            values,
            dt_us,
            origin_us,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureKind {
    TimeDomain,
    FreqDomain,
}

/// How the columns of a feature row divide into channels and time windows.
///
/// Column `(channel, window, j)` lives at
/// `channel * channel_stride + window * window_width + j`. A channel is one
/// cluster's series (or its spectrum); trailing columns past the last full
/// window of a channel are carried along but belong to no window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub channels: usize,
    pub channel_stride: usize,
    pub n_windows: usize,
    pub window_width: usize,
}

impl FeatureLayout {
    pub fn new(channels: usize, channel_stride: usize, n_windows: usize, window_width: usize) -> Result<Self> {
        if channels == 0 || n_windows == 0 || window_width == 0 {
            return Err(Error::LayoutMismatch(
                "channels, windows and window width must be positive".into(),
            ));
        }
        if n_windows * window_width > channel_stride {
            return Err(Error::LayoutMismatch(format!(
                "{n_windows} windows of {window_width} do not fit a channel of {channel_stride}"
            )));
        }
        Ok(Self {
            channels,
            channel_stride,
            n_windows,
            window_width,
        })
    }

    /// Packed layout: windows tile each channel exactly.
    pub fn packed(channels: usize, n_windows: usize, window_width: usize) -> Result<Self> {
        Self::new(channels, n_windows * window_width, n_windows, window_width)
    }

    pub fn n_cols(&self) -> usize {
        self.channels * self.channel_stride
    }

    /// Width of one window's slice across all channels.
    pub fn window_dim(&self) -> usize {
        self.channels * self.window_width
    }

    /// Copies window `w` of `row` into `out` (channel-major).
    pub fn gather_window(&self, row: &[f64], w: usize, out: &mut Vec<f64>) {
        out.clear();
        for c in 0..self.channels {
            let start = c * self.channel_stride + w * self.window_width;
            out.extend_from_slice(&row[start..start + self.window_width]);
        }
    }
}

/// Signatures as rows, features as columns, plus one class id per row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    n_rows: usize,
    n_cols: usize,
    labels: Vec<ClassId>,
    kind: FeatureKind,
    layout: Option<FeatureLayout>,
}

impl FeatureMatrix {
    pub fn new(
        data: Vec<f64>,
        n_cols: usize,
        labels: Vec<ClassId>,
        kind: FeatureKind,
        layout: Option<FeatureLayout>,
    ) -> Result<Self> {
        let n_rows = labels.len();
        if data.len() != n_rows * n_cols {
            return Err(Error::InvalidMatrix(format!(
                "{} values cannot form {n_rows} rows of {n_cols}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix(format!(
                "non-finite value at row {}, column {}",
                pos / n_cols.max(1),
                pos % n_cols.max(1)
            )));
        }
        if let Some(layout) = layout {
            if layout.n_cols() != n_cols {
                return Err(Error::LayoutMismatch(format!(
                    "layout spans {} columns, matrix has {n_cols}",
                    layout.n_cols()
                )));
            }
        }
        Ok(Self {
            data,
            n_rows,
            n_cols,
            labels,
            kind,
            layout,
        })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows(
        rows: Vec<Vec<f64>>,
        labels: Vec<ClassId>,
        kind: FeatureKind,
        layout: Option<FeatureLayout>,
    ) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::InvalidMatrix(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let n_cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != n_cols) {
            return Err(Error::LengthMismatch(format!(
                "row {bad} has {} features, row 0 has {n_cols}",
                rows[bad].len()
            )));
        }
        let data = rows.into_iter().flatten().collect();
        Self::new(data, n_cols, labels, kind, layout)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn layout(&self) -> Option<FeatureLayout> {
        self.layout
    }

    pub fn with_labels(mut self, labels: Vec<ClassId>) -> Result<Self> {
        if labels.len() != self.n_rows {
            return Err(Error::InvalidMatrix(format!(
                "{} labels for {} rows",
                labels.len(),
                self.n_rows
            )));
        }
        self.labels = labels;
        Ok(self)
    }

    /// Copies the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(indices.len() * self.n_cols);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        FeatureMatrix {
            data,
            n_rows: indices.len(),
            n_cols: self.n_cols,
            labels,
            kind: self.kind,
            layout: self.layout,
        }
    }

    /// Distinct class ids present, ascending.
    pub fn class_ids(&self) -> Vec<ClassId> {
        let set: BTreeSet<ClassId> = self.labels.iter().copied().collect();
        set.into_iter().collect()
    }
}

/// A stratified train/test partition of a feature matrix. The index vectors
/// refer to rows of the source matrix.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: FeatureMatrix,
    pub test: FeatureMatrix,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub split_ratio: f64,
    pub seed: u64,
}
