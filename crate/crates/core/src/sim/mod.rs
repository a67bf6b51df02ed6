//! Synthetic DVFS and EM capture generation.

mod catalog;
mod corpus;
mod em;
mod governor;
mod profile;

pub use catalog::default_profiles;
pub use corpus::{
    corpus_jobs, generate_corpus, simulate_job, validate_profiles, SimConfig, TraceJob,
};
pub use em::{synthesize_em, EmSynthConfig};
pub use governor::{simulate_governor, GovernorConfig, PollingConfig};
pub use profile::{validate_label, Segment, WorkloadProfile};
