//! Detection latency and unknown-application rejection.

mod latency;
mod openset;

pub use latency::{
    detection_latency, detection_times, DetectionReport, LatencyConfig, PrefixAccuracy,
};
pub use openset::{
    classify_with_rejection, open_set_csv, open_set_eval, threshold_grid, OpenSetReport,
};
