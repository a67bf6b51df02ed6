//! Random forest of Gini decision trees grown to purity.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{class_index, Probabilities};
use crate::domain::{ClassId, FeatureMatrix};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Train each tree on a bootstrap resample of the rows.
    pub bootstrap: bool,
    /// Candidate features per split; `None` means `floor(sqrt(d))`.
    pub max_features: Option<usize>,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 40,
            bootstrap: true,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Class distribution of the training rows that reached the leaf.
    Leaf { distribution: Vec<f64> },
}

/// Nodes in an arena; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn leaf_distribution(&self, row: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { distribution } => return distribution,
            }
        }
    }

    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(0usize, 1usize)];
        while let Some((i, d)) = stack.pop() {
            best = best.max(d);
            if let Node::Split { left, right, .. } = self.nodes[i] {
                stack.push((left, d + 1));
                stack.push((right, d + 1));
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub class_ids: Vec<ClassId>,
    pub n_features: usize,
    pub trees: Vec<DecisionTree>,
}

struct Best {
    impurity: f64,
    feature: usize,
    threshold: f64,
}

/// Weighted Gini of a split, scaled by the node size: `Σ_side n_side · gini_side`.
fn split_impurity(left: &[usize], n_left: usize, right: &[usize], n_right: usize) -> f64 {
    let side = |counts: &[usize], n: usize| {
        let n = n as f64;
        n - counts.iter().map(|&c| (c * c) as f64).sum::<f64>() / n
    };
    side(left, n_left) + side(right, n_right)
}

struct Builder<'a> {
    x: &'a FeatureMatrix,
    y: &'a [usize],
    n_classes: usize,
    max_features: usize,
}

impl Builder<'_> {
    fn leaf(&self, rows: &[usize]) -> Node {
        let mut distribution = vec![0.0; self.n_classes];
        for &r in rows {
            distribution[self.y[r]] += 1.0;
        }
        distribution.iter_mut().for_each(|v| *v /= rows.len() as f64);
        Node::Leaf { distribution }
    }

    /// Best midpoint split on one feature, or `None` if it is constant on `rows`.
    fn best_on_feature(&self, rows: &[usize], feature: usize, pairs: &mut Vec<(f64, usize)>) -> Option<Best> {
        pairs.clear();
        pairs.extend(rows.iter().map(|&r| (self.x.row(r)[feature], self.y[r])));
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pairs[0].0 == pairs[pairs.len() - 1].0 {
            return None;
        }
        let mut right = vec![0usize; self.n_classes];
        for &(_, c) in pairs.iter() {
            right[c] += 1;
        }
        let mut left = vec![0usize; self.n_classes];
        let n = pairs.len();
        let mut best: Option<Best> = None;
        for i in 0..n - 1 {
            let c = pairs[i].1;
            left[c] += 1;
            right[c] -= 1;
            let (a, b) = (pairs[i].0, pairs[i + 1].0);
            if a == b {
                continue;
            }
            let impurity = split_impurity(&left, i + 1, &right, n - i - 1);
            if best.as_ref().is_none_or(|bst| impurity < bst.impurity) {
                let mut threshold = a + (b - a) / 2.0;
                if threshold >= b {
                    threshold = a;
                }
                best = Some(Best {
                    impurity,
                    feature,
                    threshold,
                });
            }
        }
        best
    }

    fn grow(&self, rows: Vec<usize>, rng: &mut impl Rng) -> DecisionTree {
        let d = self.x.n_cols();
        let mut nodes = vec![Node::Leaf {
            distribution: Vec::new(),
        }];
        let mut stack = vec![(0usize, rows)];
        let mut pairs = Vec::new();
        let mut features: Vec<usize> = (0..d).collect();
        while let Some((slot, rows)) = stack.pop() {
            let first = self.y[rows[0]];
            if rows.iter().all(|&r| self.y[r] == first) {
                nodes[slot] = self.leaf(&rows);
                continue;
            }
            // draw features in random order until enough non-constant ones were tried
            features.shuffle(rng);
            let mut tried = 0;
            let mut best: Option<Best> = None;
            for &f in &features {
                if tried >= self.max_features {
                    break;
                }
                let Some(cand) = self.best_on_feature(&rows, f, &mut pairs) else {
                    continue;
                };
                tried += 1;
                let better = match &best {
                    None => true,
                    Some(b) => {
                        cand.impurity < b.impurity
                            || (cand.impurity == b.impurity
                                && (cand.feature, cand.threshold) < (b.feature, b.threshold))
                    }
                };
                if better {
                    best = Some(cand);
                }
            }
            let Some(best) = best else {
                nodes[slot] = self.leaf(&rows);
                continue;
            };
            let (l, r): (Vec<usize>, Vec<usize>) = rows
                .iter()
                .partition(|&&i| self.x.row(i)[best.feature] <= best.threshold);
            let left = nodes.len();
            let right = left + 1;
            nodes.push(Node::Leaf {
                distribution: Vec::new(),
            });
            nodes.push(Node::Leaf {
                distribution: Vec::new(),
            });
            nodes[slot] = Node::Split {
                feature: best.feature,
                threshold: best.threshold,
                left,
                right,
            };
            stack.push((right, r));
            stack.push((left, l));
        }
        DecisionTree { nodes }
    }
}

pub fn train_rf(train: &FeatureMatrix, config: &ForestConfig, seed: u64) -> Result<ForestModel> {
    if train.n_rows() == 0 || train.n_cols() == 0 {
        return Err(Error::TooFewRows {
            needed: 1,
            have: train.n_rows(),
        });
    }
    if config.n_trees == 0 {
        return Err(Error::InvalidArgument("a forest needs at least one tree".into()));
    }
    let class_ids = train.class_ids();
    let y = train
        .labels()
        .iter()
        .map(|&l| class_index(&class_ids, l))
        .collect::<Result<Vec<_>>>()?;
    let d = train.n_cols();
    let max_features = config
        .max_features
        .unwrap_or_else(|| (d as f64).sqrt().floor() as usize)
        .clamp(1, d);
    let builder = Builder {
        x: train,
        y: &y,
        n_classes: class_ids.len(),
        max_features,
    };
    let n = train.n_rows();
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng(derive_seed(seed, &[t as u64]));
            let rows: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            builder.grow(rows, &mut rng)
        })
        .collect();
    Ok(ForestModel {
        class_ids,
        n_features: d,
        trees,
    })
}

impl ForestModel {
    pub(crate) fn predict_proba(&self, rows: &FeatureMatrix) -> Probabilities {
        let k = self.class_ids.len();
        let scale = 1.0 / self.trees.len() as f64;
        let values = rows
            .rows()
            .flat_map(|row| {
                let mut p = vec![0.0; k];
                for tree in &self.trees {
                    p.iter_mut()
                        .zip(tree.leaf_distribution(row))
                        .for_each(|(a, b)| *a += b);
                }
                p.into_iter().map(move |v| v * scale)
            })
            .collect();
        Probabilities::new(self.class_ids.clone(), values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::FeatureKind;
    use crate::ml::{evaluate, TrainedModel};

    fn matrix(rows: Vec<Vec<f64>>, labels: Vec<ClassId>) -> FeatureMatrix {
        FeatureMatrix::from_rows(rows, labels, FeatureKind::FreqDomain, None).unwrap()
    }

    #[test]
    fn single_tree_memorizes() {
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|i| vec![((i * 37) % 17) as f64, ((i * 11) % 7) as f64, i as f64 * 0.5])
            .collect();
        let labels: Vec<ClassId> = (0..60).map(|i| (i * 7 % 3) as ClassId).collect();
        let m = matrix(rows, labels);
        let cfg = ForestConfig {
            n_trees: 1,
            bootstrap: false,
            max_features: None,
        };
        let model = TrainedModel::Forest(train_rf(&m, &cfg, 3).unwrap());
        assert_eq!(evaluate(&model, &m).unwrap().accuracy, 1.0);
    }

    #[test]
    fn root_threshold_lies_between_classes() {
        let m = matrix(
            vec![vec![1.0], vec![2.0], vec![2.5], vec![7.0], vec![8.0]],
            vec![0, 0, 0, 1, 1],
        );
        let cfg = ForestConfig {
            n_trees: 1,
            bootstrap: false,
            max_features: None,
        };
        let model = train_rf(&m, &cfg, 0).unwrap();
        match model.trees[0].nodes[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(feature, 0);
                assert!(threshold > 2.5 && threshold < 7.0);
                assert_eq!(threshold, 4.75);
            }
            _ => panic!("root should split"),
        }
        assert_eq!(model.trees[0].depth(), 2);
    }

    #[test]
    fn identical_rows_with_mixed_labels_become_a_leaf() {
        let m = matrix(vec![vec![1.0], vec![1.0], vec![1.0]], vec![0, 1, 1]);
        let cfg = ForestConfig {
            n_trees: 1,
            bootstrap: false,
            max_features: None,
        };
        let model = train_rf(&m, &cfg, 0).unwrap();
        assert_eq!(
            model.trees[0].nodes,
            vec![Node::Leaf {
                distribution: vec![1.0 / 3.0, 2.0 / 3.0]
            }]
        );
    }
}
