//! Clusterers behind one configuration type.
//!
//! `kmeans` and `ward` need the number of clusters at fit time; `dbscan`
//! infers it and may mark samples as noise.

pub mod dbscan;
pub mod kmeans;
pub mod ward;

use serde::{Deserialize, Serialize};

pub use dbscan::{fit_dbscan, suggest_eps, DbscanModel, DbscanParams};
pub use kmeans::{fit_kmeans, KMeansModel, KMeansParams};
pub use ward::{fit_ward, Merge, WardModel, WardParams};

use crate::data::{Dataset, LabelVector};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ClustererConfig {
    Kmeans(#[serde(default)] KMeansParams),
    Ward(#[serde(default)] WardParams),
    Dbscan(DbscanParams),
}

impl Default for ClustererConfig {
    fn default() -> Self {
        ClustererConfig::Kmeans(KMeansParams::default())
    }
}

impl ClustererConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ClustererConfig::Kmeans(_) => "kmeans",
            ClustererConfig::Ward(_) => "ward",
            ClustererConfig::Dbscan(_) => "dbscan",
        }
    }

    /// Whether the clusterer chooses its own number of clusters.
    pub fn is_auto_k(&self) -> bool {
        matches!(self, ClustererConfig::Dbscan(_))
    }

    /// Cost ordering used to break ties between equally stable
    /// configurations: dbscan < kmeans < ward.
    pub fn complexity_rank(&self) -> u8 {
        match self {
            ClustererConfig::Dbscan(_) => 0,
            ClustererConfig::Kmeans(_) => 1,
            ClustererConfig::Ward(_) => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ClustererConfig::Kmeans(p) => p.validate(),
            ClustererConfig::Ward(_) => Ok(()),
            ClustererConfig::Dbscan(p) => p.validate(),
        }
    }

    /// Fits the clusterer. Fixed-k kinds require `k`; `dbscan` rejects it.
    /// `seed` only affects k-means initialization.
    pub fn fit<T: Scalar>(
        &self,
        data: &Dataset<T>,
        k: Option<usize>,
        seed: u64,
    ) -> Result<Clustering<T>> {
        let (model, labels) = match (self, k) {
            (ClustererConfig::Kmeans(p), Some(k)) => {
                let (m, l) = fit_kmeans(data, k, p, seed)?;
                (ClusterModel::Kmeans(m), l)
            }
            (ClustererConfig::Ward(_), Some(k)) => {
                let (m, l) = fit_ward(data, k)?;
                (ClusterModel::Ward(m), l)
            }
            (ClustererConfig::Dbscan(p), None) => {
                let (m, l) = fit_dbscan(data, p)?;
                (ClusterModel::Dbscan(m), l)
            }
            (ClustererConfig::Dbscan(_), Some(_)) => {
                return Err(Error::InvalidParameter(
                    "dbscan chooses k itself; none may be supplied".into(),
                ))
            }
            (_, None) => {
                return Err(Error::InvalidParameter(format!(
                    "{} requires k",
                    self.name()
                )));
            }
        };
        Ok(Clustering { model, labels })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", bound = "T: Scalar")]
pub enum ClusterModel<T> {
    Kmeans(KMeansModel<T>),
    Ward(WardModel<T>),
    Dbscan(DbscanModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Clustering<T> {
    pub model: ClusterModel<T>,
    pub labels: LabelVector,
}

impl<T: Scalar> Clustering<T> {
    /// Number of non-noise clusters.
    pub fn k(&self) -> usize {
        self.labels.n_clusters()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_json_forms() {
        let c: ClustererConfig = serde_json::from_str(r#"{"kind":"kmeans","n_init":3}"#).unwrap();
        assert_eq!(
            c,
            ClustererConfig::Kmeans(KMeansParams {
                n_init: 3,
                ..Default::default()
            })
        );
        let c: ClustererConfig = serde_json::from_str(r#"{"kind":"ward"}"#).unwrap();
        assert_eq!(c, ClustererConfig::Ward(WardParams::default()));
        let c: ClustererConfig = serde_json::from_str(r#"{"kind":"dbscan","eps":0.5}"#).unwrap();
        assert!(c.is_auto_k());
        assert!(serde_json::from_str::<ClustererConfig>(r#"{"kind":"kmeans","bogus":1}"#).is_err());
        assert!(serde_json::from_str::<ClustererConfig>(r#"{"kind":"spectral"}"#).is_err());
        assert!(serde_json::from_str::<ClustererConfig>(r#"{"kind":"ward","n_init":3}"#).is_err());
    }

    #[test]
    fn k_contract() {
        let d = Dataset::from_rows(vec![vec![0.0], vec![1.0], vec![5.0]]).unwrap();
        assert!(ClustererConfig::Ward(WardParams::default())
            .fit(&d, None, 0)
            .is_err());
        let db = ClustererConfig::Dbscan(DbscanParams {
            eps: 1.0,
            min_samples: 2,
        });
        assert!(db.fit(&d, Some(2), 0).is_err());
        assert_eq!(db.fit(&d, None, 0).unwrap().k(), 1);
        let fit = ClustererConfig::default().fit(&d, Some(2), 0).unwrap();
        let json = serde_json::to_string(&fit.model).unwrap();
        let back: ClusterModel<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, fit.model);
    }
}
