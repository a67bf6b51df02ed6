use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid frequency table: {0}")]
    InvalidTable(String),

    #[error("frequency {freq_khz} kHz is not a level of cluster {cluster_id}")]
    UnknownFrequency { cluster_id: usize, freq_khz: u32 },

    #[error("cluster {cluster_id} does not exist (have {n_clusters})")]
    BadCluster { cluster_id: usize, n_clusters: usize },

    #[error("level index {index} out of range for cluster {cluster_id} ({n_levels} levels)")]
    BadLevel {
        cluster_id: usize,
        index: usize,
        n_levels: usize,
    },

    #[error("trace has no samples")]
    EmptyTrace,

    #[error("timestamps go backwards at sample {index}")]
    NonMonotonicTime { index: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("EM header mismatch: {0}")]
    HeaderMismatch(String),

    #[error("invalid EM trace: {0}")]
    InvalidEmTrace(String),

    #[error("duration must be positive")]
    BadDuration,

    #[error("profile list is empty")]
    EmptyProfileList,

    #[error("invalid workload profile `{label}`: {message}")]
    InvalidProfile { label: String, message: String },

    #[error("invalid governor configuration: {0}")]
    InvalidGovernor(String),

    #[error("carrier at {carrier_hz} Hz aliases at sample rate {sample_rate_hz} Hz")]
    AliasedCarrier { carrier_hz: f64, sample_rate_hz: f64 },

    #[error("series lengths differ: {0}")]
    LengthMismatch(String),

    #[error("class {class_id} has only {count} signature(s); at least 2 are required")]
    ClassTooSmall { class_id: i32, count: usize },

    #[error("invalid split ratio {0}")]
    BadRatio(f64),

    #[error("series too short: need {needed} samples, have {have}")]
    TooShort { needed: usize, have: usize },

    #[error("invalid window plan: {0}")]
    InvalidWindowPlan(String),

    #[error("PCA budget {budget} is smaller than the window count {n_windows}")]
    BudgetTooSmall { budget: usize, n_windows: usize },

    #[error("feature layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("need at least {needed} rows, have {have}")]
    TooFewRows { needed: usize, have: usize },

    #[error("invalid feature matrix: {0}")]
    InvalidMatrix(String),

    #[error("k = {k} exceeds the {n_rows} training rows")]
    KTooLarge { k: usize, n_rows: usize },

    #[error("training data contains a single class")]
    SingleClass,

    #[error("row width {got} does not match model width {expected}")]
    WidthMismatch { expected: usize, got: usize },

    #[error("label {0} is not known to the model")]
    LabelNotInModel(i32),

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported artifact version {found} (expected {expected})")]
    UnsupportedVersion { expected: u32, found: u32 },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
