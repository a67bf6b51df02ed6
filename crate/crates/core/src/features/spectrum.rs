use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fft::FftPlan;
use crate::domain::UniformSeries;
use crate::error::{Error, Result};

/// Division of a series into consecutive, non-overlapping windows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowPlan {
    pub window_ms: f64,
    pub n_windows: usize,
    pub samples_per_window: usize,
}

impl WindowPlan {
    /// Plan for a series sampled every `dt_us` microseconds.
    pub fn new(window_ms: f64, n_windows: usize, dt_us: f64) -> Result<Self> {
        if !(window_ms.is_finite() && window_ms > 0.0) || n_windows == 0 {
            return Err(Error::InvalidWindowPlan(
                "window length and count must be positive".into(),
            ));
        }
        if !(dt_us.is_finite() && dt_us > 0.0) {
            return Err(Error::InvalidWindowPlan("dt must be positive".into()));
        }
        let samples_per_window = (window_ms * 1000.0 / dt_us).round() as usize;
        if samples_per_window < 2 {
            return Err(Error::InvalidWindowPlan(format!(
                "a {window_ms} ms window holds only {samples_per_window} sample(s) at {dt_us} µs"
            )));
        }
        Ok(Self {
            window_ms,
            n_windows,
            samples_per_window,
        })
    }

    /// Fails unless the windows fit inside a capture of `duration_ms`.
    pub fn check_duration(&self, duration_ms: f64) -> Result<()> {
        let span = self.window_ms * self.n_windows as f64;
        if span > duration_ms * (1.0 + 1e-12) {
            return Err(Error::InvalidWindowPlan(format!(
                "{} windows of {} ms span {span} ms, longer than the {duration_ms} ms capture",
                self.n_windows, self.window_ms
            )));
        }
        Ok(())
    }

    pub fn total_samples(&self) -> usize {
        self.n_windows * self.samples_per_window
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Taper {
    #[default]
    Rectangular,
    Hann,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub taper: Taper,
    /// Zero-pad each window to the next power of two before transforming.
    /// Off by default: every window gets an exact DFT of its own length.
    pub pad_to_pow2: bool,
    /// Average the one-sided magnitudes into this many equal-width bands.
    pub bands: Option<usize>,
}

impl SpectrumConfig {
    pub fn fft_len(&self, samples_per_window: usize) -> usize {
        if self.pad_to_pow2 {
            samples_per_window.next_power_of_two()
        } else {
            samples_per_window
        }
    }

    /// One-sided bins per window: DC through Nyquist.
    pub fn raw_bins(&self, samples_per_window: usize) -> usize {
        self.fft_len(samples_per_window) / 2 + 1
    }

    /// Values emitted per window, after optional band averaging.
    pub fn bins(&self, samples_per_window: usize) -> usize {
        let raw = self.raw_bins(samples_per_window);
        self.bands.map_or(raw, |b| b.clamp(1, raw))
    }
}

/// Reusable per-window magnitude spectrum transform.
#[derive(Debug, Clone)]
pub struct WindowedSpectrum {
    plan: WindowPlan,
    fft: FftPlan,
    taper: Vec<f64>,
    raw_bins: usize,
    bins: usize,
}

impl WindowedSpectrum {
    pub fn new(plan: WindowPlan, config: SpectrumConfig) -> Self {
        let n = plan.samples_per_window;
        let taper = match config.taper {
            Taper::Rectangular => vec![1.0; n],
            // periodic Hann
            Taper::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / n as f64).cos())
                .collect(),
        };
        Self {
            plan,
            fft: FftPlan::new(config.fft_len(n)),
            taper,
            raw_bins: config.raw_bins(n),
            bins: config.bins(n),
        }
    }

    pub fn plan(&self) -> &WindowPlan {
        &self.plan
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    /// Output length for one series.
    pub fn output_len(&self) -> usize {
        self.plan.n_windows * self.bins
    }

    /// Appends the magnitude spectra of every window of `values`, in time
    /// order, to `out`.
    pub fn transform_into(&self, values: &[f64], out: &mut Vec<f64>) -> Result<()> {
        let needed = self.plan.total_samples();
        if values.len() < needed {
            return Err(Error::TooShort {
                needed,
                have: values.len(),
            });
        }
        let spw = self.plan.samples_per_window;
        let zero = Complex64::new(0.0, 0.0);
        let mut buf = vec![zero; self.fft.len()];
        let mut scratch = Vec::new();
        out.reserve(self.output_len());
        for window in values[..needed].chunks_exact(spw) {
            buf.iter_mut().for_each(|z| *z = zero);
            for ((z, &x), &w) in buf.iter_mut().zip(window).zip(&self.taper) {
                *z = Complex64::new(x * w, 0.0);
            }
            self.fft.forward(&mut buf, &mut scratch);
            let mags = buf[..self.raw_bins].iter().map(|z| z.norm());
            if self.bins == self.raw_bins {
                out.extend(mags);
            } else {
                let mags: Vec<f64> = mags.collect();
                for b in 0..self.bins {
                    let lo = b * self.raw_bins / self.bins;
                    let hi = (b + 1) * self.raw_bins / self.bins;
                    out.push(mags[lo..hi].iter().sum::<f64>() / (hi - lo) as f64);
                }
            }
        }
        Ok(())
    }

    pub fn transform(&self, series: &UniformSeries) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.output_len());
        self.transform_into(&series.values, &mut out)?;
        Ok(out)
    }
}

/// Magnitude spectrum of each window of `series`, windows concatenated in
/// time order; each window contributes `bins` values from DC to Nyquist.
pub fn windowed_spectrum(
    series: &UniformSeries,
    plan: &WindowPlan,
    config: &SpectrumConfig,
) -> Result<Vec<f64>> {
    WindowedSpectrum::new(*plan, *config).transform(series)
}
