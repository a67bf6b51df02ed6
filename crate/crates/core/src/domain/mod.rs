//! Types shared by every stage of the pipeline.

mod matrix;
mod table;
mod trace;

pub use matrix::{
    ClassId, DatasetSplit, FeatureKind, FeatureLayout, FeatureMatrix, LabelMap, UniformSeries,
    UNKNOWN_CLASS,
};
pub use table::{FrequencyTable, FrequencyTables};
pub use trace::{validate_cluster_samples, DvfsSample, DvfsTrace, EmTrace};
