//! Raw traces to fixed-length uniform series, and train/test splitting.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use crate::domain::{
    ClassId, DatasetSplit, DvfsSample, DvfsTrace, EmTrace, FeatureMatrix, FrequencyTable,
    FrequencyTables, UniformSeries,
};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng};

/// Number of grid points covering `duration_us` at spacing `dt_us`.
pub fn grid_len(dt_us: u64, duration_us: u64) -> usize {
    ((duration_us as f64 / dt_us as f64).round() as usize).max(1)
}

/// Resamples one cluster's polls onto a uniform grid by zero-order hold.
///
/// Each poll holds from its start stamp until the next poll starts. Grid
/// points before the first poll take the first value and points after the
/// last poll keep the last value, so short captures are extended at their
/// final state and long ones are cut at `duration_us`. Values are level
/// indexes local to `table`.
pub fn interpolate_dvfs(
    samples: &[DvfsSample],
    table: &FrequencyTable,
    dt_us: u64,
    duration_us: u64,
) -> Result<UniformSeries> {
    if samples.is_empty() {
        return Err(Error::EmptyTrace);
    }
    if dt_us == 0 {
        return Err(Error::InvalidArgument("dt must be positive".into()));
    }
    let indexes = samples
        .iter()
        .map(|s| table.freq_to_index(s.freq_khz).map(|i| i as f64))
        .collect::<Result<Vec<_>>>()?;
    let n = grid_len(dt_us, duration_us);
    let mut values = Vec::with_capacity(n);
    let mut cursor = 0;
    for i in 0..n {
        let t = i as u64 * dt_us;
        while cursor + 1 < samples.len() && samples[cursor + 1].start_us <= t {
            cursor += 1;
        }
        values.push(indexes[cursor]);
    }
    UniformSeries::new(values, dt_us as f64, 0.0)
}

/// Interpolates every cluster of a trace into the combined index space, so
/// cluster `c` takes values offset by the level counts of the clusters before it.
pub fn interpolate_trace(
    trace: &DvfsTrace,
    tables: &FrequencyTables,
    dt_us: u64,
    duration_us: u64,
) -> Result<Vec<UniformSeries>> {
    if trace.clusters.len() != tables.n_clusters() {
        return Err(Error::BadCluster {
            cluster_id: trace.clusters.len(),
            n_clusters: tables.n_clusters(),
        });
    }
    trace
        .clusters
        .iter()
        .zip(tables.iter())
        .map(|(samples, table)| {
            let mut series = interpolate_dvfs(samples, table, dt_us, duration_us)?;
            let offset = tables.global_index(table.cluster_id(), 0)? as f64;
            if offset != 0.0 {
                series.values.iter_mut().for_each(|v| *v += offset);
            }
            Ok(series)
        })
        .collect()
}

/// Concatenates per-cluster series in cluster order.
pub fn append_clusters(series: &[UniformSeries]) -> Result<Vec<f64>> {
    let first = series
        .first()
        .ok_or_else(|| Error::LengthMismatch("no series to append".into()))?;
    for (i, s) in series.iter().enumerate().skip(1) {
        if s.len() != first.len() || s.dt_us != first.dt_us {
            return Err(Error::LengthMismatch(format!(
                "series {i} has {} samples at {} µs, series 0 has {} at {} µs",
                s.len(),
                s.dt_us,
                first.len(),
                first.dt_us
            )));
        }
    }
    Ok(series.iter().flat_map(|s| s.values.iter().copied()).collect())
}

/// Truncates or zero-pads an EM capture to `target_len` samples.
pub fn resample_em(trace: &EmTrace, target_len: usize) -> Result<UniformSeries> {
    if target_len == 0 {
        return Err(Error::InvalidArgument("target length must be positive".into()));
    }
    let mut values: Vec<f64> = trace
        .samples
        .iter()
        .take(target_len)
        .map(|&s| f64::from(s))
        .collect();
    values.resize(target_len, 0.0);
    UniformSeries::new(values, 1e6 / trace.sample_rate_hz, 0.0)
}

/// Number of training rows each class contributes. Starts from
/// `floor(ratio * count)` (at least one row on each side of the split) and
/// hands out the remaining rows one at a time to the class furthest below its
/// ideal share, lowest class first on ties, until the total reaches
/// `round(ratio * total)`.
fn stratum_sizes(counts: &[usize], ratio: f64) -> Vec<usize> {
    let total: usize = counts.iter().sum();
    let ideal: Vec<f64> = counts.iter().map(|&n| ratio * n as f64).collect();
    let mut sizes: Vec<usize> = counts
        .iter()
        .zip(&ideal)
        .map(|(&n, x)| (x.floor() as usize).clamp(1, n - 1))
        .collect();
    let lo = counts.len();
    let hi = total - counts.len();
    let target = ((ratio * total as f64).round() as usize).clamp(lo, hi);

    let mut assigned: usize = sizes.iter().sum();
    while assigned < target {
        let i = (0..sizes.len())
            .filter(|&i| sizes[i] < counts[i] - 1)
            .max_by(|&a, &b| {
                (ideal[a] - sizes[a] as f64)
                    .total_cmp(&(ideal[b] - sizes[b] as f64))
                    .then(b.cmp(&a))
            })
            .expect("target is reachable");
        sizes[i] += 1;
        assigned += 1;
    }
    while assigned > target {
        let i = (0..sizes.len())
            .filter(|&i| sizes[i] > 1)
            .max_by(|&a, &b| {
                (sizes[a] as f64 - ideal[a])
                    .total_cmp(&(sizes[b] as f64 - ideal[b]))
                    .then(b.cmp(&a))
            })
            .expect("target is reachable");
        sizes[i] -= 1;
        assigned -= 1;
    }
    sizes
}

/// Stratified shuffle split. Each class is shuffled with its own seed derived
/// from `seed` and split at its stratum size; index lists come back sorted.
pub fn split_dataset(matrix: &FeatureMatrix, ratio: f64, seed: u64) -> Result<DatasetSplit> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::BadRatio(ratio));
    }
    let mut by_class: BTreeMap<ClassId, Vec<usize>> = BTreeMap::new();
    for (i, &label) in matrix.labels().iter().enumerate() {
        by_class.entry(label).or_default().push(i);
    }
    if by_class.is_empty() {
        return Err(Error::TooFewRows { needed: 2, have: 0 });
    }
    if let Some((&class_id, rows)) = by_class.iter().find(|(_, rows)| rows.len() < 2) {
        return Err(Error::ClassTooSmall {
            class_id,
            count: rows.len(),
        });
    }
    let counts: Vec<usize> = by_class.values().map(Vec::len).collect();
    let sizes = stratum_sizes(&counts, ratio);

    let mut train_indices = Vec::new();
    let mut test_indices = Vec::new();
    for ((&class_id, rows), &n_train) in by_class.iter().zip(&sizes) {
        let mut rows = rows.clone();
        let mut r = rng(derive_seed(seed, &[class_id as u64]));
        rows.shuffle(&mut r);
        train_indices.extend_from_slice(&rows[..n_train]);
        test_indices.extend_from_slice(&rows[n_train..]);
    }
    train_indices.sort_unstable();
    test_indices.sort_unstable();

    Ok(DatasetSplit {
        train: matrix.select_rows(&train_indices),
        test: matrix.select_rows(&test_indices),
        train_indices,
        test_indices,
        split_ratio: ratio,
        seed,
    })
}
