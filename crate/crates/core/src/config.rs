//! The TOML experiment configuration. Every section and field is optional;
//! missing values take the defaults shown by [`Config::default`].

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detect::LatencyConfig;
use crate::domain::FrequencyTables;
use crate::error::{Error, Result};
use crate::features::{PcaConfig, SpectrumConfig, WindowPlan};
use crate::ml::{ForestConfig, SvmConfig};
use crate::sim::{default_profiles, EmSynthConfig, GovernorConfig, PollingConfig, SimConfig, WorkloadProfile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub traces_per_app: usize,
    pub duration_s: f64,
    /// Also synthesize and store an EM capture per trace.
    pub em: bool,
    /// Multiplies every profile's load noise; 0 gives a noise-free corpus.
    pub noise_scale: f64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            traces_per_app: 40,
            duration_s: 10.0,
            em: false,
            noise_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    /// DVFS grid spacing.
    pub dt_us: u64,
    /// Length every capture is held or cut to.
    pub duration_us: u64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            dt_us: 500,
            duration_us: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    pub window_ms: f64,
    pub n_windows: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesConfig {
    /// Windows of both DVFS pipelines.
    pub dvfs: WindowConfig,
    pub em: WindowConfig,
    pub dvfs_spectrum: SpectrumConfig,
    pub em_spectrum: SpectrumConfig,
    pub pca: PcaConfig,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            window_ms: 100.0,
            n_windows: 100,
        }
    }
}

impl Default for FeaturesConfig {
    fn default() -> Self {
        Self {
            dvfs: WindowConfig::default(),
            em: WindowConfig {
                window_ms: 200.0,
                n_windows: 50,
            },
            dvfs_spectrum: SpectrumConfig::default(),
            em_spectrum: SpectrumConfig {
                bands: Some(256),
                ..SpectrumConfig::default()
            },
            pca: PcaConfig::default(),
        }
    }
}

impl FeaturesConfig {
    pub fn dvfs_plan(&self, dt_us: u64) -> Result<WindowPlan> {
        WindowPlan::new(self.dvfs.window_ms, self.dvfs.n_windows, dt_us as f64)
    }

    pub fn em_plan(&self, sample_rate_hz: f64) -> Result<WindowPlan> {
        WindowPlan::new(self.em.window_ms, self.em.n_windows, 1e6 / sample_rate_hz)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub ratio: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { ratio: 0.75 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Fixed neighbour count; when absent `k` is picked from `knn_sweep`.
    pub knn_k: Option<usize>,
    pub knn_sweep: Vec<usize>,
    pub svm: SvmConfig,
    pub rf: ForestConfig,
    /// Forest repetitions averaged by `evaluate`.
    pub rf_runs: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            knn_k: None,
            knn_sweep: (1..=20).collect(),
            svm: SvmConfig::default(),
            rf: ForestConfig::default(),
            rf_runs: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpenSetConfig {
    /// Labels withheld from training; empty picks `n_holdout` at random.
    pub holdout: Vec<String>,
    pub n_holdout: usize,
    pub thresholds: Vec<f64>,
}

impl Default for OpenSetConfig {
    fn default() -> Self {
        Self {
            holdout: Vec::new(),
            n_holdout: 4,
            thresholds: crate::detect::threshold_grid(20),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub tables: FrequencyTables,
    pub governor: GovernorConfig,
    pub polling: PollingConfig,
    pub corpus: CorpusConfig,
    pub em: EmSynthConfig,
    /// Workload catalog; empty means the built-in 22 applications.
    pub profiles: Vec<WorkloadProfile>,
    pub preprocess: PreprocessConfig,
    pub features: FeaturesConfig,
    pub split: SplitConfig,
    pub model: ModelConfig,
    pub detect: LatencyConfig,
    pub openset: OpenSetConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 42,
            tables: FrequencyTables::default(),
            governor: GovernorConfig::default(),
            polling: PollingConfig::default(),
            corpus: CorpusConfig::default(),
            em: EmSynthConfig::default(),
            profiles: Vec::new(),
            preprocess: PreprocessConfig::default(),
            features: FeaturesConfig::default(),
            split: SplitConfig::default(),
            model: ModelConfig::default(),
            detect: LatencyConfig::default(),
            openset: OpenSetConfig::default(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// The configured profiles, or the built-in catalog, with load noise
    /// scaled by `corpus.noise_scale`.
    pub fn profiles(&self) -> Vec<WorkloadProfile> {
        let mut profiles = if self.profiles.is_empty() {
            default_profiles()
        } else {
            self.profiles.clone()
        };
        for segment in profiles.iter_mut().flat_map(|p| &mut p.segments) {
            segment.jitter_std *= self.corpus.noise_scale;
        }
        profiles
    }

    pub fn sim(&self) -> SimConfig {
        SimConfig {
            tables: self.tables.clone(),
            governor: self.governor,
            polling: self.polling,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.governor.validate(&self.tables)?;
        self.polling.validate()?;
        crate::sim::validate_profiles(&self.profiles(), self.tables.n_clusters())?;
        if self.corpus.traces_per_app == 0 {
            return Err(Error::Config("corpus.traces_per_app must be at least 1".into()));
        }
        if !(self.corpus.noise_scale.is_finite() && self.corpus.noise_scale >= 0.0) {
            return Err(Error::Config("corpus.noise_scale must be non-negative".into()));
        }
        if !(self.corpus.duration_s.is_finite() && self.corpus.duration_s > 0.0) {
            return Err(Error::BadDuration);
        }
        if self.preprocess.dt_us == 0 || self.preprocess.duration_us == 0 {
            return Err(Error::Config("preprocess dt and duration must be positive".into()));
        }
        let plan = self.features.dvfs_plan(self.preprocess.dt_us)?;
        plan.check_duration(self.preprocess.duration_us as f64 / 1000.0)?;
        if self.features.pca.budget < plan.n_windows {
            return Err(Error::BudgetTooSmall {
                budget: self.features.pca.budget,
                n_windows: plan.n_windows,
            });
        }
        if !(self.split.ratio > 0.0 && self.split.ratio < 1.0) {
            return Err(Error::BadRatio(self.split.ratio));
        }
        if self.model.rf_runs == 0 {
            return Err(Error::Config("model.rf_runs must be at least 1".into()));
        }
        Ok(())
    }
}
