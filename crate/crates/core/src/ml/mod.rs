//! Classifiers with a shared probability contract.

mod forest;
mod knn;
mod svm;

pub use forest::{train_rf, DecisionTree, ForestConfig, ForestModel, Node};
pub use knn::{train_knn, KnnModel};
pub use svm::{softmax, train_svm, SvmConfig, SvmModel, SvmScaling, SvmSolver};

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{ClassId, FeatureMatrix};
use crate::error::{Error, Result};
use crate::preprocess::split_dataset;

const MODEL_FORMAT: &str = "freqprint-model";
const MODEL_VERSION: u32 = 1;

pub(crate) fn class_index(class_ids: &[ClassId], label: ClassId) -> Result<usize> {
    class_ids
        .binary_search(&label)
        .map_err(|_| Error::LabelNotInModel(label))
}

/// Row-major `n_rows × n_classes` class probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Probabilities {
    class_ids: Vec<ClassId>,
    values: Vec<f64>,
}

impl Probabilities {
    pub fn new(class_ids: Vec<ClassId>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len() % class_ids.len().max(1), 0);
        Self { class_ids, values }
    }

    pub fn class_ids(&self) -> &[ClassId] {
        &self.class_ids
    }

    pub fn n_rows(&self) -> usize {
        self.values.len() / self.class_ids.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let k = self.class_ids.len();
        &self.values[i * k..(i + 1) * k]
    }

    /// Most probable class of row `i` and its probability; ties go to the
    /// lowest class id.
    pub fn argmax(&self, i: usize) -> (ClassId, f64) {
        let row = self.row(i);
        let mut best = 0;
        for (j, &p) in row.iter().enumerate() {
            if p > row[best] {
                best = j;
            }
        }
        (self.class_ids[best], row[best])
    }

    pub fn argmax_class(&self, i: usize) -> ClassId {
        self.argmax(i).0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainedModel {
    Knn(KnnModel),
    #[serde(rename = "linear_svm")]
    Svm(SvmModel),
    #[serde(rename = "random_forest")]
    Forest(ForestModel),
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: TrainedModel,
}

impl TrainedModel {
    pub fn class_ids(&self) -> &[ClassId] {
        match self {
            TrainedModel::Knn(m) => &m.class_ids,
            TrainedModel::Svm(m) => &m.class_ids,
            TrainedModel::Forest(m) => &m.class_ids,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            TrainedModel::Knn(m) => m.n_features(),
            TrainedModel::Svm(m) => m.n_features(),
            TrainedModel::Forest(m) => m.n_features,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            TrainedModel::Knn(_) => "knn",
            TrainedModel::Svm(_) => "svm",
            TrainedModel::Forest(_) => "rf",
        }
    }

    pub fn predict(&self, rows: &FeatureMatrix) -> Result<Vec<ClassId>> {
        let p = predict_proba(self, rows)?;
        Ok((0..p.n_rows()).map(|i| p.argmax_class(i)).collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            model: self.clone(),
        };
        let mut text = serde_json::to_string(&file)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ModelFile = serde_json::from_str(&text)?;
        if file.format != MODEL_FORMAT {
            return Err(Error::Config(format!("{} is not a model file", path.display())));
        }
        if file.version != MODEL_VERSION {
            return Err(Error::UnsupportedVersion {
                expected: MODEL_VERSION,
                found: file.version,
            });
        }
        Ok(file.model)
    }
}

/// Class probabilities for every row.
pub fn predict_proba(model: &TrainedModel, rows: &FeatureMatrix) -> Result<Probabilities> {
    if rows.n_cols() != model.n_features() {
        return Err(Error::WidthMismatch {
            expected: model.n_features(),
            got: rows.n_cols(),
        });
    }
    Ok(match model {
        TrainedModel::Knn(m) => m.predict_proba(rows),
        TrainedModel::Svm(m) => m.predict_proba(rows),
        TrainedModel::Forest(m) => m.predict_proba(rows),
    })
}

/// Classifier choice plus hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Knn { k: usize },
    Svm(SvmConfig),
    Forest(ForestConfig),
}

impl ModelSpec {
    pub fn train(&self, train: &FeatureMatrix, seed: u64) -> Result<TrainedModel> {
        Ok(match self {
            ModelSpec::Knn { k } => TrainedModel::Knn(train_knn(train, *k)?),
            ModelSpec::Svm(c) => TrainedModel::Svm(train_svm(train, c, seed)?),
            ModelSpec::Forest(c) => TrainedModel::Forest(train_rf(train, c, seed)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub class_ids: Vec<ClassId>,
    /// `confusion[true][predicted]`, indexed by position in `class_ids`.
    pub confusion: Vec<Vec<usize>>,
    pub predictions: Vec<ClassId>,
}

/// Accuracy and confusion matrix on labelled rows.
pub fn evaluate(model: &TrainedModel, test: &FeatureMatrix) -> Result<Evaluation> {
    let class_ids = model.class_ids().to_vec();
    let predictions = model.predict(test)?;
    let k = class_ids.len();
    let mut confusion = vec![vec![0usize; k]; k];
    let mut correct = 0;
    for (&truth, &pred) in test.labels().iter().zip(&predictions) {
        let t = class_index(&class_ids, truth)?;
        let p = class_index(&class_ids, pred)?;
        confusion[t][p] += 1;
        correct += usize::from(t == p);
    }
    let accuracy = if predictions.is_empty() {
        0.0
    } else {
        correct as f64 / predictions.len() as f64
    };
    Ok(Evaluation {
        accuracy,
        class_ids,
        confusion,
        predictions,
    })
}

/// Picks `k` by validation accuracy on a stratified hold-out of `train`;
/// ties go to the smallest `k`. Returns `(k, accuracy)` for every candidate
/// that fits the fitting fold, plus the winner.
pub fn select_k(
    train: &FeatureMatrix,
    candidates: &[usize],
    ratio: f64,
    seed: u64,
) -> Result<(usize, Vec<(usize, f64)>)> {
    let split = split_dataset(train, ratio, seed)?;
    let mut scores = Vec::new();
    for &k in candidates {
        if k == 0 || k > split.train.n_rows() {
            continue;
        }
        let model = TrainedModel::Knn(train_knn(&split.train, k)?);
        scores.push((k, evaluate(&model, &split.test)?.accuracy));
    }
    let best = scores
        .iter()
        .fold(None::<(usize, f64)>, |best, &(k, a)| match best {
            Some((_, b)) if b >= a => best,
            _ => Some((k, a)),
        })
        .ok_or_else(|| Error::InvalidArgument("no usable k candidate".into()))?;
    Ok((best.0, scores))
}
