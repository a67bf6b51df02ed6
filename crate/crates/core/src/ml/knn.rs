use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{class_index, Probabilities};
use crate::domain::{ClassId, FeatureMatrix};
use crate::error::{Error, Result};

/// Stored training rows with Euclidean k-nearest-neighbour voting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub class_ids: Vec<ClassId>,
    n_features: usize,
    rows: Vec<f64>,
    /// Position of each stored row's class in `class_ids`.
    targets: Vec<usize>,
}

pub fn train_knn(train: &FeatureMatrix, k: usize) -> Result<KnnModel> {
    if k == 0 || k > train.n_rows() {
        return Err(Error::KTooLarge {
            k,
            n_rows: train.n_rows(),
        });
    }
    let class_ids = train.class_ids();
    let targets = train
        .labels()
        .iter()
        .map(|&l| class_index(&class_ids, l))
        .collect::<Result<_>>()?;
    Ok(KnnModel {
        k,
        class_ids,
        n_features: train.n_cols(),
        rows: train.data().to_vec(),
        targets,
    })
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl KnnModel {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Number of stored training rows.
    pub fn n_rows(&self) -> usize {
        self.targets.len()
    }

    /// The `k` nearest stored rows as `(squared distance, class position)`,
    /// ordered by distance then class. Rows at equal distance from the query
    /// are interchangeable only within a class, so the vote does not depend
    /// on the storage order.
    pub fn neighbours(&self, query: &[f64]) -> Vec<(f64, usize)> {
        let mut all: Vec<(f64, usize)> = self
            .rows
            .chunks_exact(self.n_features.max(1))
            .zip(&self.targets)
            .map(|(row, &t)| (squared_distance(row, query), t))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < all.len() {
            all.select_nth_unstable_by(self.k - 1, cmp);
            all.truncate(self.k);
        }
        all.sort_by(cmp);
        all
    }

    pub(crate) fn predict_proba(&self, rows: &FeatureMatrix) -> Probabilities {
        let n_classes = self.class_ids.len();
        let values: Vec<f64> = (0..rows.n_rows())
            .into_par_iter()
            .flat_map_iter(|i| {
                let mut votes = vec![0.0; n_classes];
                for (_, t) in self.neighbours(rows.row(i)) {
                    votes[t] += 1.0;
                }
                votes.into_iter().map(|v| v / self.k as f64)
            })
            .collect();
        Probabilities::new(self.class_ids.clone(), values)
    }
}
