//! Reading and writing captures and corpus directories.

mod dvfs_log;
mod em_file;
mod manifest;

pub use dvfs_log::{format_dvfs_log, parse_dvfs_log, read_dvfs_log, write_dvfs_log};
pub use em_file::{em_payload_path, read_em_trace, write_em_trace};
pub use manifest::{CorpusManifest, ManifestEntry, MANIFEST_FILE};
