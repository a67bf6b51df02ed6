use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::governor::{simulate_governor, GovernorConfig, PollingConfig};
use super::profile::WorkloadProfile;
use crate::domain::{DvfsTrace, FrequencyTables};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// Everything the simulator needs besides the workload.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub tables: FrequencyTables,
    pub governor: GovernorConfig,
    pub polling: PollingConfig,
}

/// One trace to simulate: which profile, which repetition, and its own seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceJob {
    pub profile_index: usize,
    pub trace_index: usize,
    pub seed: u64,
}

/// The traces of a corpus in generation order (profile-major), each with a
/// seed derived from the corpus seed and its position.
pub fn corpus_jobs(n_profiles: usize, n_traces_per_app: usize, seed: u64) -> Vec<TraceJob> {
    (0..n_profiles)
        .flat_map(|p| {
            (0..n_traces_per_app).map(move |t| TraceJob {
                profile_index: p,
                trace_index: t,
                seed: derive_seed(seed, &[p as u64, t as u64]),
            })
        })
        .collect()
}

pub fn validate_profiles(profiles: &[WorkloadProfile], n_clusters: usize) -> Result<()> {
    if profiles.is_empty() {
        return Err(Error::EmptyProfileList);
    }
    let mut seen = BTreeSet::new();
    for p in profiles {
        p.validate(n_clusters)?;
        if !seen.insert(p.label.as_str()) {
            return Err(Error::InvalidProfile {
                label: p.label.clone(),
                message: "duplicate label".into(),
            });
        }
    }
    Ok(())
}

pub fn simulate_job(
    job: &TraceJob,
    profiles: &[WorkloadProfile],
    sim: &SimConfig,
    duration_s: f64,
) -> Result<DvfsTrace> {
    simulate_governor(
        &profiles[job.profile_index],
        &sim.governor,
        &sim.polling,
        &sim.tables,
        duration_s,
        job.seed,
    )
}

/// Simulates `n_traces_per_app` captures of every profile.
pub fn generate_corpus(
    profiles: &[WorkloadProfile],
    sim: &SimConfig,
    n_traces_per_app: usize,
    duration_s: f64,
    seed: u64,
) -> Result<Vec<DvfsTrace>> {
    validate_profiles(profiles, sim.tables.n_clusters())?;
    if n_traces_per_app == 0 {
        return Err(Error::InvalidArgument("n_traces_per_app must be at least 1".into()));
    }
    corpus_jobs(profiles.len(), n_traces_per_app, seed)
        .par_iter()
        .map(|job| simulate_job(job, profiles, sim, duration_s))
        .collect()
}
