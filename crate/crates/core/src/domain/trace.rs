use serde::{Deserialize, Serialize};

use super::table::{FrequencyTable, FrequencyTables};
use crate::error::{Error, Result};

/// One poll of a cluster's current frequency: the time the read started, the
/// time it returned, and the value read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DvfsSample {
    pub start_us: u64,
    pub end_us: u64,
    pub freq_khz: u32,
}

impl DvfsSample {
    pub fn new(start_us: u64, end_us: u64, freq_khz: u32) -> Self {
        Self {
            start_us,
            end_us,
            freq_khz,
        }
    }
}

/// Checks one cluster's samples: non-empty, start times non-decreasing, each
/// end at or after its start, every frequency a level of `table`.
pub fn validate_cluster_samples(samples: &[DvfsSample], table: &FrequencyTable) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let mut prev_start = 0;
    for (i, s) in samples.iter().enumerate() {
        if s.end_us < s.start_us || (i > 0 && s.start_us < prev_start) {
            return Err(Error::NonMonotonicTime { index: i });
        }
        table.freq_to_index(s.freq_khz)?;
        prev_start = s.start_us;
    }
    Ok(())
}

/// A DVFS capture of one application run: polled frequency samples for every
/// cluster. `label` is `None` for unknown applications.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DvfsTrace {
    pub label: Option<String>,
    pub clusters: Vec<Vec<DvfsSample>>,
    pub capture_duration_us: u64,
}

impl DvfsTrace {
    pub fn new(
        label: Option<String>,
        clusters: Vec<Vec<DvfsSample>>,
        capture_duration_us: u64,
        tables: &FrequencyTables,
    ) -> Result<Self> {
        let trace = Self {
            label,
            clusters,
            capture_duration_us,
        };
        trace.validate(tables)?;
        Ok(trace)
    }

    pub fn validate(&self, tables: &FrequencyTables) -> Result<()> {
        if self.clusters.len() != tables.n_clusters() {
            return Err(Error::BadCluster {
                cluster_id: self.clusters.len().saturating_sub(1),
                n_clusters: tables.n_clusters(),
            });
        }
        if self.capture_duration_us == 0 {
            return Err(Error::BadDuration);
        }
        for (samples, table) in self.clusters.iter().zip(tables.iter()) {
            validate_cluster_samples(samples, table)?;
        }
        Ok(())
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }
}

/// A uniformly sampled emission capture. Samples are stored as `f32`, the
/// same precision as the on-disk payload.
#[derive(Debug, Clone, PartialEq)]
pub struct EmTrace {
    pub label: Option<String>,
    pub samples: Vec<f32>,
    pub sample_rate_hz: f64,
    pub capture_duration_s: f64,
}

impl EmTrace {
    pub fn new(
        label: Option<String>,
        samples: Vec<f32>,
        sample_rate_hz: f64,
        capture_duration_s: f64,
    ) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::InvalidEmTrace(format!(
                "sample rate {sample_rate_hz} must be positive"
            )));
        }
        if !(capture_duration_s.is_finite() && capture_duration_s > 0.0) {
            return Err(Error::BadDuration);
        }
        let expected = Self::expected_len(sample_rate_hz, capture_duration_s);
        if samples.len().abs_diff(expected) > 1 {
            return Err(Error::InvalidEmTrace(format!(
                "{} samples for {capture_duration_s} s at {sample_rate_hz} Hz (expected {expected})",
                samples.len()
            )));
        }
        Ok(Self {
            label,
            samples,
            sample_rate_hz,
            capture_duration_s,
        })
    }

    pub fn expected_len(sample_rate_hz: f64, capture_duration_s: f64) -> usize {
        (sample_rate_hz * capture_duration_s).round() as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tables() -> FrequencyTables {
        FrequencyTables::default()
    }

    #[test]
    fn accepts_valid_trace() {
        let t = tables();
        let c0 = vec![DvfsSample::new(0, 20, 307_200), DvfsSample::new(520, 540, 393_000)];
        let c1 = vec![DvfsSample::new(0, 20, 2_150_400)];
        // 393_000 is not a level, so this must fail
        assert!(matches!(
            DvfsTrace::new(None, vec![c0, c1.clone()], 1000, &t),
            Err(Error::UnknownFrequency { .. })
        ));
        let level = t.get(0).unwrap().level(1).unwrap();
        let c0 = vec![DvfsSample::new(0, 20, 307_200), DvfsSample::new(520, 540, level)];
        DvfsTrace::new(Some("a".into()), vec![c0, c1], 1000, &t).unwrap();
    }

    #[test]
    fn rejects_time_going_backwards() {
        let s = vec![DvfsSample::new(10, 20, 307_200), DvfsSample::new(5, 30, 307_200)];
        assert!(matches!(
            validate_cluster_samples(&s, tables().get(0).unwrap()),
            Err(Error::NonMonotonicTime { index: 1 })
        ));
        let s = vec![DvfsSample::new(10, 9, 307_200)];
        assert!(matches!(
            validate_cluster_samples(&s, tables().get(0).unwrap()),
            Err(Error::NonMonotonicTime { index: 0 })
        ));
    }

    #[test]
    fn rejects_empty_cluster() {
        assert!(matches!(
            validate_cluster_samples(&[], tables().get(0).unwrap()),
            Err(Error::EmptyTrace)
        ));
    }

    #[test]
    fn em_length_tolerance() {
        assert!(EmTrace::new(None, vec![0.0; 100], 10.0, 10.0).is_ok());
        assert!(EmTrace::new(None, vec![0.0; 101], 10.0, 10.0).is_ok());
        assert!(EmTrace::new(None, vec![0.0; 98], 10.0, 10.0).is_err());
        assert!(EmTrace::new(None, vec![0.0; 100], 0.0, 10.0).is_err());
    }

    #[test]
    fn two_megahertz_ten_second_length() {
        assert_eq!(EmTrace::expected_len(2.0e6, 10.0), 20_000_000);
    }
}
