use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::profile::WorkloadProfile;
use crate::domain::{DvfsSample, DvfsTrace, FrequencyTable, FrequencyTables};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng};

/// Policy parameters of an ondemand-style governor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GovernorConfig {
    pub sampling_interval_ms: f64,
    /// Load above which the cluster jumps straight to its top level.
    pub up_threshold: f64,
    /// Below the up threshold the target capacity is `load / down_scale_factor`.
    pub down_scale_factor: f64,
    pub initial_level: usize,
}

impl Default for GovernorConfig {
    fn default() -> Self {
        Self {
            sampling_interval_ms: 5.0,
            up_threshold: 0.8,
            down_scale_factor: 0.8,
            initial_level: 0,
        }
    }
}

impl GovernorConfig {
    pub fn validate(&self, tables: &FrequencyTables) -> Result<()> {
        if !(self.sampling_interval_ms.is_finite() && self.sampling_interval_ms > 0.0) {
            return Err(Error::InvalidGovernor("sampling interval must be positive".into()));
        }
        if !(self.up_threshold > 0.0 && self.up_threshold < 1.0) {
            return Err(Error::InvalidGovernor("up_threshold must lie in (0, 1)".into()));
        }
        if !(self.down_scale_factor > 0.0 && self.down_scale_factor <= 1.0) {
            return Err(Error::InvalidGovernor(
                "down_scale_factor must lie in (0, 1]".into(),
            ));
        }
        if let Some(t) = tables.iter().find(|t| self.initial_level >= t.len()) {
            return Err(Error::InvalidGovernor(format!(
                "initial level {} exceeds cluster {} ({} levels)",
                self.initial_level,
                t.cluster_id(),
                t.len()
            )));
        }
        Ok(())
    }

    /// The level the governor picks for a sampled load.
    pub fn target_level(&self, table: &FrequencyTable, load: f64) -> usize {
        if load > self.up_threshold {
            return table.top_index();
        }
        let needed = load / self.down_scale_factor;
        (0..table.len())
            .find(|&i| table.capacity(i) >= needed)
            .unwrap_or(table.top_index())
    }
}

/// Timing of the user-space loop that reads `scaling_cur_freq`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PollingConfig {
    /// Fixed cost of one acquisition; consecutive reads start at least this far apart.
    pub delay_us: u64,
    /// Upper bound of the extra uniform delay added to each acquisition.
    pub jitter_us: u64,
    /// Time between the start and end stamp of a read.
    pub read_latency_us: u64,
}

impl Default for PollingConfig {
    fn default() -> Self {
        Self {
            delay_us: 500,
            jitter_us: 40,
            read_latency_us: 20,
        }
    }
}

impl PollingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.delay_us == 0 {
            return Err(Error::InvalidGovernor("polling delay must be positive".into()));
        }
        if self.read_latency_us + self.jitter_us / 2 >= self.delay_us {
            return Err(Error::InvalidGovernor(
                "read latency must be shorter than the polling delay".into(),
            ));
        }
        Ok(())
    }
}

/// Level changes of one cluster: `(time_us, level)` pairs, time ascending.
type Schedule = Vec<(f64, usize)>;

/// Runs the governor over `profile` for `duration_s` seconds and records what
/// a polling loop on each cluster would have logged.
///
/// Every `sampling_interval_ms` the governor measures each cluster's load as
/// the mean scheduled utilization since its previous tick, scaled by the
/// cluster's affinity, plus clipped Gaussian noise. Independent random
/// streams drive timing, load noise and polling, so changing utilizations
/// never perturbs the tick or poll times.
pub fn simulate_governor(
    profile: &WorkloadProfile,
    config: &GovernorConfig,
    polling: &PollingConfig,
    tables: &FrequencyTables,
    duration_s: f64,
    seed: u64,
) -> Result<DvfsTrace> {
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(Error::BadDuration);
    }
    let duration_us = (duration_s * 1e6).round() as u64;
    if duration_us == 0 {
        return Err(Error::BadDuration);
    }
    profile.validate(tables.n_clusters())?;
    config.validate(tables)?;
    polling.validate()?;

    let mut timing = rng(derive_seed(seed, &[0]));
    let interval_us = config.sampling_interval_ms * 1000.0;
    let phase_us = if profile.random_phase {
        timing.random::<f64>() * profile.cycle_us()
    } else {
        0.0
    };
    let first_tick_us = timing.random::<f64>() * interval_us;

    let schedules = governor_schedules(
        profile,
        config,
        tables,
        duration_us as f64,
        phase_us,
        first_tick_us,
        derive_seed(seed, &[1]),
    );

    let mut clusters = Vec::with_capacity(tables.n_clusters());
    for (c, (table, schedule)) in tables.iter().zip(&schedules).enumerate() {
        let mut poll_rng = rng(derive_seed(seed, &[2, c as u64]));
        clusters.push(poll_cluster(table, schedule, polling, duration_us, &mut poll_rng));
    }

    Ok(DvfsTrace {
        label: Some(profile.label.clone()),
        clusters,
        capture_duration_us: duration_us,
    })
}

fn governor_schedules(
    profile: &WorkloadProfile,
    config: &GovernorConfig,
    tables: &FrequencyTables,
    duration_us: f64,
    phase_us: f64,
    first_tick_us: f64,
    noise_seed: u64,
) -> Vec<Schedule> {
    let n_clusters = tables.n_clusters();
    let interval_us = config.sampling_interval_ms * 1000.0;
    let mut noise_rng = rng(noise_seed);
    let standard = Normal::new(0.0, 1.0).expect("unit normal");
    let mut schedules: Vec<Schedule> = tables
        .iter()
        .map(|_| vec![(0.0, config.initial_level)])
        .collect();

    let mut tick = first_tick_us;
    while tick < duration_us {
        let from = phase_us + tick - interval_us;
        let to = phase_us + tick;
        let mean = profile.mean_utilization(from, to);
        let jitter = profile.jitter_at(to);
        for (c, table) in tables.iter().enumerate() {
            // always draw, so the noise stream is independent of the jitter value
            let z: f64 = standard.sample(&mut noise_rng);
            let scaled = mean * profile.affinity[c] * n_clusters as f64;
            let load = (scaled + jitter * z).clamp(0.0, 1.0);
            let level = config.target_level(table, load);
            let schedule = &mut schedules[c];
            if schedule.last().map(|&(_, l)| l) != Some(level) {
                schedule.push((tick, level));
            }
        }
        tick += interval_us;
    }
    schedules
}

fn poll_cluster(
    table: &FrequencyTable,
    schedule: &Schedule,
    polling: &PollingConfig,
    duration_us: u64,
    rng: &mut impl Rng,
) -> Vec<DvfsSample> {
    let mut samples = Vec::with_capacity((duration_us / polling.delay_us) as usize + 1);
    let mut cursor = 0;
    let mut t = rng.random_range(0..=polling.jitter_us);
    while t < duration_us {
        while cursor + 1 < schedule.len() && schedule[cursor + 1].0 <= t as f64 {
            cursor += 1;
        }
        let level = schedule[cursor].1;
        let end = t + polling.read_latency_us + rng.random_range(0..=polling.jitter_us / 2);
        samples.push(DvfsSample::new(t, end, table.levels()[level]));
        t += polling.delay_us + rng.random_range(0..=polling.jitter_us);
    }
    samples
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::profile::Segment;

    fn sim(profile: &WorkloadProfile, seed: u64) -> DvfsTrace {
        simulate_governor(
            profile,
            &GovernorConfig::default(),
            &PollingConfig::default(),
            &FrequencyTables::default(),
            10.0,
            seed,
        )
        .unwrap()
    }

    #[test]
    fn idle_floors_frequency() {
        let trace = sim(&WorkloadProfile::constant("idle", 0.0, 2), 1);
        let tables = FrequencyTables::default();
        for (samples, table) in trace.clusters.iter().zip(tables.iter()) {
            assert!(samples.iter().all(|s| s.freq_khz == table.levels()[0]));
        }
    }

    #[test]
    fn saturation_pins_top_after_one_interval() {
        let trace = sim(&WorkloadProfile::constant("busy", 1.0, 2), 2);
        let tables = FrequencyTables::default();
        let interval_us = (GovernorConfig::default().sampling_interval_ms * 1000.0) as u64;
        for (samples, table) in trace.clusters.iter().zip(tables.iter()) {
            let top = table.levels()[table.top_index()];
            assert!(samples
                .iter()
                .filter(|s| s.start_us >= interval_us)
                .all(|s| s.freq_khz == top));
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let p = WorkloadProfile::new(
            "p",
            vec![Segment::new(30.0, 0.9, 0.1), Segment::new(70.0, 0.2, 0.1)],
            vec![0.4, 0.6],
        );
        assert_eq!(sim(&p, 9), sim(&p, 9));
        assert_ne!(sim(&p, 9), sim(&p, 10));
    }

    #[test]
    fn polling_timing_invariants() {
        let p = WorkloadProfile::new(
            "p",
            vec![Segment::new(30.0, 0.9, 0.1), Segment::new(70.0, 0.2, 0.1)],
            vec![0.4, 0.6],
        );
        let trace = sim(&p, 3);
        let tables = FrequencyTables::default();
        trace.validate(&tables).unwrap();
        for samples in &trace.clusters {
            for w in samples.windows(2) {
                assert!(w[1].start_us >= w[0].start_us + 500);
            }
            assert!(samples.last().unwrap().start_us < 10_000_000);
        }
    }

    #[test]
    fn target_level_rule() {
        let table = FrequencyTable::new(0, vec![100, 200, 300, 400]).unwrap();
        let cfg = GovernorConfig::default();
        assert_eq!(cfg.target_level(&table, 0.0), 0);
        assert_eq!(cfg.target_level(&table, 0.81), 3);
        // 0.3 / 0.8 = 0.375 -> smallest capacity >= 0.375 is 200/400
        assert_eq!(cfg.target_level(&table, 0.3), 1);
        // 0.5 / 0.8 = 0.625 -> 300/400
        assert_eq!(cfg.target_level(&table, 0.5), 2);
        // 0.7 / 0.8 = 0.875 -> 400/400
        assert_eq!(cfg.target_level(&table, 0.7), 3);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = WorkloadProfile::constant("x", 0.5, 2);
        let t = FrequencyTables::default();
        let g = GovernorConfig::default();
        let poll = PollingConfig::default();
        assert!(matches!(
            simulate_governor(&p, &g, &poll, &t, 0.0, 1),
            Err(Error::BadDuration)
        ));
        let bad = GovernorConfig {
            up_threshold: 1.0,
            ..g
        };
        assert!(simulate_governor(&p, &bad, &poll, &t, 1.0, 1).is_err());
        let bad = GovernorConfig {
            initial_level: 16,
            ..g
        };
        assert!(simulate_governor(&p, &bad, &poll, &t, 1.0, 1).is_err());
    }
}
