//! Application fingerprinting from DVFS frequency-level traces and EM
//! captures.
//!
//! | module | contents |
//! |---|---|
//! | [`domain`] | traces, frequency tables, feature matrices |
//! | [`sim`] | governor simulator, workload catalog, EM synthesis |
//! | [`ingest`] | DVFS log and EM capture files, corpus manifests |
//! | [`preprocess`] | zero-order-hold resampling, stratified splits |
//! | [`features`] | windowed magnitude spectra, windowed PCA |
//! | [`ml`] | KNN, linear SVM, random forest |
//! | [`detect`] | detection latency, open-set rejection |
//! | [`pipeline`] | the experiments the CLI runs |
//! | [`config`] | TOML configuration |
//!
//! ```
//! use freqprint::config::Config;
//! use freqprint::pipeline::{simulate_feature_sets, PipelineKind};
//!
//! let mut config = Config::default();
//! config.corpus.traces_per_app = 2;
//! config.corpus.duration_s = 1.0;
//! config.preprocess.duration_us = 1_000_000;
//! config.features.dvfs.n_windows = 10;
//! let sets = simulate_feature_sets(&config, &[PipelineKind::DvfsFreq]).unwrap();
//! assert_eq!(sets[0].matrix.n_rows(), 44);
//! ```

pub mod config;
pub mod detect;
pub mod domain;
pub mod error;
pub mod features;
pub mod ingest;
pub mod ml;
pub mod pipeline;
pub mod preprocess;
pub mod seed;
pub mod sim;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/configuration.md")]
    mod configuration {}
    #[doc = include_str!("../../../book/src/library.md")]
    mod library {}
    #[doc = include_str!("../../../book/src/simulator.md")]
    mod simulator {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
    #[doc = include_str!("../../../book/src/results.md")]
    mod results {}
}
