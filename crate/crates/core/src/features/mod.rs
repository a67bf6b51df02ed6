//! Feature extraction: time-domain passthrough, windowed magnitude spectra
//! and windowed PCA.

pub mod fft;
mod pca;
mod spectrum;

pub use pca::{
    allocate_components, apply_pca, decompose_windows, fit_window, fit_windowed_pca, PcaConfig,
    PcaModel, PcaWindow, WindowFit,
};
pub use spectrum::{windowed_spectrum, SpectrumConfig, Taper, WindowPlan, WindowedSpectrum};

use crate::domain::{ClassId, FeatureKind, FeatureLayout, FeatureMatrix, UniformSeries};
use crate::error::{Error, Result};
use crate::preprocess::append_clusters;

/// Window layout of appended channel series of `series_len` samples each.
pub fn time_layout(channels: usize, series_len: usize, plan: &WindowPlan) -> Result<FeatureLayout> {
    FeatureLayout::new(channels, series_len, plan.n_windows, plan.samples_per_window)
}

/// Window layout of concatenated per-channel spectra.
pub fn spectral_layout(channels: usize, transform: &WindowedSpectrum) -> Result<FeatureLayout> {
    FeatureLayout::packed(channels, transform.plan().n_windows, transform.bins())
}

/// One spectral row: each channel's windowed spectrum, channels in order.
pub fn spectral_row(series: &[UniformSeries], transform: &WindowedSpectrum) -> Result<Vec<f64>> {
    let mut row = Vec::with_capacity(series.len() * transform.output_len());
    for s in series {
        transform.transform_into(&s.values, &mut row)?;
    }
    Ok(row)
}

/// Rows are the appended channel series of each signature, unchanged. With a
/// window plan the matrix carries the matching window layout.
pub fn time_domain_features(
    signatures: &[Vec<UniformSeries>],
    labels: Vec<ClassId>,
    plan: Option<&WindowPlan>,
) -> Result<FeatureMatrix> {
    let rows = signatures
        .iter()
        .map(|s| append_clusters(s))
        .collect::<Result<Vec<_>>>()?;
    let layout = match (plan, signatures.first()) {
        (Some(plan), Some(first)) => Some(time_layout(first.len(), first[0].len(), plan)?),
        _ => None,
    };
    FeatureMatrix::from_rows(rows, labels, FeatureKind::TimeDomain, layout)
}

/// Rows are the per-channel windowed spectra of each signature.
pub fn frequency_domain_features(
    signatures: &[Vec<UniformSeries>],
    labels: Vec<ClassId>,
    plan: &WindowPlan,
    config: &SpectrumConfig,
) -> Result<FeatureMatrix> {
    let transform = WindowedSpectrum::new(*plan, *config);
    let channels = signatures.first().map_or(1, Vec::len);
    if let Some(bad) = signatures.iter().position(|s| s.len() != channels) {
        return Err(Error::LengthMismatch(format!(
            "signature {bad} has {} channels, signature 0 has {channels}",
            signatures[bad].len()
        )));
    }
    let rows = signatures
        .iter()
        .map(|s| spectral_row(s, &transform))
        .collect::<Result<Vec<_>>>()?;
    let layout = spectral_layout(channels, &transform)?;
    FeatureMatrix::from_rows(rows, labels, FeatureKind::FreqDomain, Some(layout))
}
