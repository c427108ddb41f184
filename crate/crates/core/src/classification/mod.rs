//! Classifiers trained on clustering labels.

pub mod knn;
pub mod logreg;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use knn::{KnnModel, KnnParams};
pub use logreg::{LogregModel, LogregParams};

use crate::data::{Dataset, LabelVector, NOISE};
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ClassifierConfig {
    Knn(#[serde(default)] KnnParams),
    Logreg(#[serde(default)] LogregParams),
    /// Ignores the features and predicts uniformly random class labels.
    /// Its stability is the chance level by construction.
    Chance {
        #[serde(default)]
        seed: u64,
    },
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig::Knn(KnnParams::default())
    }
}

impl ClassifierConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ClassifierConfig::Knn(_) => "knn",
            ClassifierConfig::Logreg(_) => "logreg",
            ClassifierConfig::Chance { .. } => "chance",
        }
    }

    /// Cost ordering for tie-breaks; knn and logreg are both linear in the
    /// sample count and share a rank.
    pub fn complexity_rank(&self) -> u8 {
        match self {
            ClassifierConfig::Chance { .. } => 0,
            ClassifierConfig::Knn(_) | ClassifierConfig::Logreg(_) => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ClassifierConfig::Knn(p) if p.n_neighbors < 1 => {
                Err(Error::InvalidParameter("n_neighbors must be ≥ 1".into()))
            }
            ClassifierConfig::Logreg(p) => p.validate(),
            _ => Ok(()),
        }
    }

    /// Trains on `(data, labels)`. Noise must be removed beforehand; a
    /// single class yields a constant predictor.
    pub fn fit<T: Scalar>(
        &self,
        data: &Dataset<T>,
        labels: &LabelVector,
    ) -> Result<TrainedClassifier<T>> {
        if data.n_samples() == 0 {
            return Err(Error::InvalidData(
                "cannot train a classifier on zero samples".into(),
            ));
        }
        if labels.len() != data.n_samples() {
            return Err(Error::LengthMismatch(labels.len(), data.n_samples()));
        }
        if labels.iter().any(|l| l == NOISE) {
            return Err(Error::InvalidData(
                "noise labels must be removed before training".into(),
            ));
        }
        let class_ids = labels.classes();
        let model = match self {
            ClassifierConfig::Knn(p) => ClassifierModel::Knn(KnnModel::fit(p, data, labels)?),
            ClassifierConfig::Logreg(p) => {
                let y = logreg::class_indices(labels, &class_ids);
                ClassifierModel::Logreg(LogregModel::fit(p, data, &y, class_ids.len())?)
            }
            ClassifierConfig::Chance { seed } => ClassifierModel::Chance {
                seed: rng::derive_seed(*seed, &labels.iter().map(|l| l as u64).collect::<Vec<_>>()),
            },
        };
        Ok(TrainedClassifier {
            n_features: data.n_features(),
            class_ids,
            model,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", bound = "T: Scalar")]
pub enum ClassifierModel<T> {
    Knn(KnnModel<T>),
    Logreg(LogregModel<T>),
    Chance { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TrainedClassifier<T> {
    pub n_features: usize,
    /// Labels seen at fit time, ascending; predictions are drawn from these.
    pub class_ids: Vec<i32>,
    pub model: ClassifierModel<T>,
}

impl<T: Scalar> TrainedClassifier<T> {
    pub fn predict(&self, data: &Dataset<T>) -> Result<LabelVector> {
        if data.n_features() != self.n_features {
            return Err(Error::FeatureMismatch {
                expected: self.n_features,
                found: data.n_features(),
            });
        }
        if self.class_ids.len() == 1 {
            return LabelVector::new(vec![self.class_ids[0]; data.n_samples()]);
        }
        let out: Vec<i32> = match &self.model {
            ClassifierModel::Knn(m) => {
                let mut scratch = Vec::with_capacity(m.labels.len());
                data.rows()
                    .map(|r| m.predict_row(r, &mut scratch))
                    .collect()
            }
            ClassifierModel::Logreg(m) => data
                .rows()
                .map(|r| self.class_ids[m.predict_index(r)])
                .collect(),
            ClassifierModel::Chance { seed } => {
                let mut rng = rng::stream(*seed, &[data.n_samples() as u64]);
                (0..data.n_samples())
                    .map(|_| self.class_ids[rng.random_range(0..self.class_ids.len())])
                    .collect()
            }
        };
        LabelVector::new(out)
    }
}
