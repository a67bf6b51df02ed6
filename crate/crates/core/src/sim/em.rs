use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::{DvfsTrace, EmTrace, FrequencyTables};
use crate::error::{Error, Result};
use crate::seed::rng;

/// Parameters of the synthetic emission model: a sinusoidal carrier whose
/// frequency steps with one cluster's DVFS level and whose amplitude follows
/// the mean normalized level of all clusters, plus white noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmSynthConfig {
    pub sample_rate_hz: f64,
    pub noise_std: f64,
    pub amplitude: f64,
    pub carrier_base_hz: f64,
    pub carrier_step_hz: f64,
    pub carrier_cluster: usize,
    /// How strongly the overall DVFS level modulates the amplitude (0 = not at all).
    pub modulation_depth: f64,
}

impl Default for EmSynthConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: 2.0e6,
            noise_std: 0.1,
            amplitude: 1.0,
            carrier_base_hz: 50_000.0,
            carrier_step_hz: 10_000.0,
            carrier_cluster: 1,
            modulation_depth: 1.0,
        }
    }
}

impl EmSynthConfig {
    pub fn highest_carrier_hz(&self, tables: &FrequencyTables) -> Result<f64> {
        let table = tables.get(self.carrier_cluster)?;
        Ok(self.carrier_base_hz + self.carrier_step_hz * table.top_index() as f64)
    }
}

/// Renders an emission trace for the run recorded in `trace`.
pub fn synthesize_em(
    trace: &DvfsTrace,
    config: &EmSynthConfig,
    tables: &FrequencyTables,
    seed: u64,
) -> Result<EmTrace> {
    let fs = config.sample_rate_hz;
    if !(fs.is_finite() && fs > 0.0) {
        return Err(Error::InvalidEmTrace(format!("sample rate {fs} must be positive")));
    }
    if config.noise_std < 0.0 || !config.noise_std.is_finite() {
        return Err(Error::InvalidArgument("noise_std must be non-negative".into()));
    }
    let highest = config.highest_carrier_hz(tables)?;
    if fs < 2.0 * highest {
        return Err(Error::AliasedCarrier {
            carrier_hz: highest,
            sample_rate_hz: fs,
        });
    }
    trace.validate(tables)?;

    let duration_s = trace.capture_duration_us as f64 / 1e6;
    let n = EmTrace::expected_len(fs, duration_s);
    let n_clusters = tables.n_clusters();
    let mut cursors = vec![0usize; n_clusters];
    let mut levels = vec![0usize; n_clusters];
    let mut noise_rng = rng(seed);
    let noise = Normal::new(0.0, config.noise_std).expect("validated std");
    let two_pi = std::f64::consts::TAU;

    let mut phase = 0.0f64;
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let t_us = i as f64 * 1e6 / fs;
        for (c, table) in tables.iter().enumerate() {
            let cluster = &trace.clusters[c];
            let cur = &mut cursors[c];
            while *cur + 1 < cluster.len() && cluster[*cur + 1].start_us as f64 <= t_us {
                *cur += 1;
            }
            levels[c] = table.freq_to_index(cluster[*cur].freq_khz)?;
        }
        let carrier_level = levels[config.carrier_cluster];
        let freq = config.carrier_base_hz + config.carrier_step_hz * carrier_level as f64;
        let mean_frac = tables
            .iter()
            .zip(&levels)
            .map(|(t, &l)| if t.len() > 1 { l as f64 / t.top_index() as f64 } else { 0.0 })
            .sum::<f64>()
            / n_clusters as f64;
        let amp = config.amplitude * (1.0 + config.modulation_depth * mean_frac)
            / (1.0 + config.modulation_depth);
        let mut value = amp * phase.sin();
        if config.noise_std > 0.0 {
            value += noise.sample(&mut noise_rng);
        }
        samples.push(value as f32);
        phase = (phase + two_pi * freq / fs) % two_pi;
    }

    EmTrace::new(trace.label.clone(), samples, fs, duration_s)
}
