use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A stretch of constant mean CPU load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub duration_ms: f64,
    /// Mean busy fraction in `[0, 1]`.
    pub utilization: f64,
    /// Standard deviation of the per-sample utilization noise.
    #[serde(default)]
    pub jitter_std: f64,
}

impl Segment {
    pub fn new(duration_ms: f64, utilization: f64, jitter_std: f64) -> Self {
        Self {
            duration_ms,
            utilization,
            jitter_std,
        }
    }
}

fn default_true() -> bool {
    true
}

/// The load an application puts on the CPU. Segments play in order and the
/// list repeats for as long as the capture runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadProfile {
    pub label: String,
    pub segments: Vec<Segment>,
    /// Share of the load landing on each cluster. An even split puts the
    /// segment utilization on every cluster unchanged.
    pub affinity: Vec<f64>,
    /// Start each capture at a random point of the segment cycle, the way a
    /// real launch never lines up exactly with the trigger.
    #[serde(default = "default_true")]
    pub random_phase: bool,
}

impl WorkloadProfile {
    pub fn new(label: impl Into<String>, segments: Vec<Segment>, affinity: Vec<f64>) -> Self {
        Self {
            label: label.into(),
            segments,
            affinity,
            random_phase: true,
        }
    }

    /// A single never-ending segment with an even cluster split.
    pub fn constant(label: impl Into<String>, utilization: f64, n_clusters: usize) -> Self {
        let mut p = Self::new(
            label,
            vec![Segment::new(1000.0, utilization, 0.0)],
            vec![1.0 / n_clusters as f64; n_clusters],
        );
        p.random_phase = false;
        p
    }

    fn invalid(&self, message: impl Into<String>) -> Error {
        Error::InvalidProfile {
            label: self.label.clone(),
            message: message.into(),
        }
    }

    pub fn validate(&self, n_clusters: usize) -> Result<()> {
        validate_label(&self.label)?;
        if self.segments.is_empty() {
            return Err(self.invalid("no segments"));
        }
        for (i, s) in self.segments.iter().enumerate() {
            if !(s.duration_ms.is_finite() && s.duration_ms > 0.0) {
                return Err(self.invalid(format!("segment {i} duration must be positive")));
            }
            if !(0.0..=1.0).contains(&s.utilization) {
                return Err(self.invalid(format!("segment {i} utilization outside [0, 1]")));
            }
            if !(s.jitter_std.is_finite() && s.jitter_std >= 0.0) {
                return Err(self.invalid(format!("segment {i} jitter must be non-negative")));
            }
        }
        if self.affinity.len() != n_clusters {
            return Err(self.invalid(format!(
                "{} affinity weights for {n_clusters} clusters",
                self.affinity.len()
            )));
        }
        if self.affinity.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(self.invalid("affinity weights must lie in [0, 1]"));
        }
        let total: f64 = self.affinity.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(self.invalid(format!("affinity weights sum to {total}, not 1")));
        }
        Ok(())
    }

    pub fn cycle_us(&self) -> f64 {
        self.segments.iter().map(|s| s.duration_ms * 1000.0).sum()
    }

    /// Mean scheduled utilization over `[from_us, to_us)` of the cyclic
    /// segment schedule, integrated exactly.
    pub(crate) fn mean_utilization(&self, from_us: f64, to_us: f64) -> f64 {
        if to_us <= from_us {
            return self.segment_at(from_us).utilization;
        }
        let cycle = self.cycle_us();
        let cycles = ((to_us - from_us) / cycle).floor();
        let full_mean: f64 = self
            .segments
            .iter()
            .map(|s| s.utilization * s.duration_ms * 1000.0)
            .sum::<f64>()
            / cycle;
        let mut area = cycles * cycle * full_mean;
        let mut t = from_us + cycles * cycle;
        while t < to_us {
            let (idx, seg_end) = self.locate(t);
            let end = seg_end.min(to_us);
            area += self.segments[idx].utilization * (end - t);
            t = end;
        }
        area / (to_us - from_us)
    }

    fn segment_at(&self, t_us: f64) -> &Segment {
        &self.segments[self.locate(t_us).0]
    }

    /// Segment index covering `t_us` and the absolute time that segment ends.
    fn locate(&self, t_us: f64) -> (usize, f64) {
        let cycle = self.cycle_us();
        let base = (t_us / cycle).floor() * cycle;
        let mut end = base;
        for (i, s) in self.segments.iter().enumerate() {
            end += s.duration_ms * 1000.0;
            if t_us < end {
                return (i, end);
            }
        }
        // rounding left t at the very end of the cycle
        (0, base + cycle + self.segments[0].duration_ms * 1000.0)
    }

    /// Noise level of the segment active at `t_us`.
    pub(crate) fn jitter_at(&self, t_us: f64) -> f64 {
        self.segment_at(t_us).jitter_std
    }
}

/// Labels become directory names, so they are restricted to a portable set.
pub fn validate_label(label: &str) -> Result<()> {
    let ok = !label.is_empty()
        && !label.starts_with('.')
        && label
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidProfile {
            label: label.to_owned(),
            message: "labels may only contain ASCII letters, digits, '-', '_' and '.'".into(),
        })
    }
}
