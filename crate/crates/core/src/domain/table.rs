use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The discrete operating points of one frequency domain (a cluster of cores
/// that share a clock), in kHz, lowest first.
///
/// Classifiers never see kHz values; they see the position of a level in its
/// table, which keeps features small and free of unit scaling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTable", into = "RawTable")]
pub struct FrequencyTable {
    cluster_id: usize,
    levels: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
struct RawTable {
    cluster_id: usize,
    levels_khz: Vec<u32>,
}

impl TryFrom<RawTable> for FrequencyTable {
    type Error = Error;

    fn try_from(raw: RawTable) -> Result<Self> {
        FrequencyTable::new(raw.cluster_id, raw.levels_khz)
    }
}

impl From<FrequencyTable> for RawTable {
    fn from(t: FrequencyTable) -> Self {
        RawTable {
            cluster_id: t.cluster_id,
            levels_khz: t.levels,
        }
    }
}

impl FrequencyTable {
    pub fn new(cluster_id: usize, levels: Vec<u32>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidTable(format!(
                "cluster {cluster_id} has no levels"
            )));
        }
        if levels[0] == 0 {
            return Err(Error::InvalidTable(format!(
                "cluster {cluster_id} has a zero-frequency level"
            )));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidTable(format!(
                "cluster {cluster_id} levels are not strictly increasing"
            )));
        }
        Ok(Self { cluster_id, levels })
    }

    /// `n` levels spread evenly from `lowest` to `highest` inclusive, each
    /// rounded to the nearest kHz.
    pub fn evenly_spaced(cluster_id: usize, lowest: u32, highest: u32, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidTable("zero levels requested".into()));
        }
        if n == 1 {
            return Self::new(cluster_id, vec![lowest]);
        }
        let span = f64::from(highest) - f64::from(lowest);
        let levels = (0..n)
            .map(|i| (f64::from(lowest) + span * i as f64 / (n - 1) as f64).round() as u32)
            .collect();
        Self::new(cluster_id, levels)
    }

    pub fn cluster_id(&self) -> usize {
        self.cluster_id
    }

    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn top_index(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, index: usize) -> Result<u32> {
        self.levels.get(index).copied().ok_or(Error::BadLevel {
            cluster_id: self.cluster_id,
            index,
            n_levels: self.levels.len(),
        })
    }

    pub fn freq_to_index(&self, freq_khz: u32) -> Result<usize> {
        self.levels
            .binary_search(&freq_khz)
            .map_err(|_| Error::UnknownFrequency {
                cluster_id: self.cluster_id,
                freq_khz,
            })
    }

    pub fn contains(&self, freq_khz: u32) -> bool {
        self.levels.binary_search(&freq_khz).is_ok()
    }

    /// Level frequency as a fraction of the top level.
    pub fn capacity(&self, index: usize) -> f64 {
        f64::from(self.levels[index]) / f64::from(self.levels[self.top_index()])
    }
}

/// The per-cluster tables of one platform, indexed by cluster id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<FrequencyTable>", into = "Vec<FrequencyTable>")]
pub struct FrequencyTables {
    tables: Vec<FrequencyTable>,
}

impl TryFrom<Vec<FrequencyTable>> for FrequencyTables {
    type Error = Error;

    fn try_from(tables: Vec<FrequencyTable>) -> Result<Self> {
        FrequencyTables::new(tables)
    }
}

impl From<FrequencyTables> for Vec<FrequencyTable> {
    fn from(t: FrequencyTables) -> Self {
        t.tables
    }
}

impl Default for FrequencyTables {
    /// A two-cluster stand-in for a big.LITTLE phone SoC: a 16-level low
    /// cluster spanning 307.2 MHz to 1.5936 GHz and an 18-level high cluster
    /// spanning 307.2 MHz to 2.1504 GHz, evenly spaced. The real operating
    /// point tables differ, but the pipeline only depends on level indexes.
    fn default() -> Self {
        let low = FrequencyTable::evenly_spaced(0, 307_200, 1_593_600, 16).expect("static table");
        let high = FrequencyTable::evenly_spaced(1, 307_200, 2_150_400, 18).expect("static table");
        Self {
            tables: vec![low, high],
        }
    }
}

impl FrequencyTables {
    pub fn new(tables: Vec<FrequencyTable>) -> Result<Self> {
        if tables.is_empty() {
            return Err(Error::InvalidTable("at least one cluster is required".into()));
        }
        for (i, t) in tables.iter().enumerate() {
            if t.cluster_id != i {
                return Err(Error::InvalidTable(format!(
                    "table at position {i} is labelled cluster {}",
                    t.cluster_id
                )));
            }
        }
        Ok(Self { tables })
    }

    pub fn n_clusters(&self) -> usize {
        self.tables.len()
    }

    pub fn get(&self, cluster_id: usize) -> Result<&FrequencyTable> {
        self.tables.get(cluster_id).ok_or(Error::BadCluster {
            cluster_id,
            n_clusters: self.tables.len(),
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = &FrequencyTable> {
        self.tables.iter()
    }

    /// Number of levels across all clusters; the size of the combined index space.
    pub fn total_levels(&self) -> usize {
        self.tables.iter().map(FrequencyTable::len).sum()
    }

    /// Maps a per-cluster level index into the combined index space, where
    /// cluster `c` occupies the range after all lower-numbered clusters.
    pub fn global_index(&self, cluster_id: usize, local_index: usize) -> Result<usize> {
        let table = self.get(cluster_id)?;
        if local_index >= table.len() {
            return Err(Error::BadLevel {
                cluster_id,
                index: local_index,
                n_levels: table.len(),
            });
        }
        let offset: usize = self.tables[..cluster_id].iter().map(FrequencyTable::len).sum();
        Ok(offset + local_index)
    }
}
