//! Stability-based relative validation of clusterings.
//!
//! A clusterer's labels on one split train a classifier; the classifier's
//! disagreement with an independent clustering of held-out data, minimized
//! over label permutations and normalized by the same disagreement under
//! random labels, measures how reproducible the partition is. Repeated
//! cross-validation picks the number of clusters with the lowest normalized
//! stability, and [`evaluate`] scores the winner on unseen data.
//!
//! ```
//! use clustab::{make_blobs, BlobsSpec, Dataset64};
//!
//! let data: Dataset64 = make_blobs(&BlobsSpec::five_blobs()).unwrap();
//! assert_eq!(data.n_samples(), 1000);
//! ```

// `!(x > 0.0)` style checks reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assignment;
pub mod classification;
pub mod clustering;
pub mod data;
pub mod error;
pub mod gridsearch;
pub mod metrics;
pub mod rng;
pub mod scalar;
pub mod selection;
pub mod stability;

pub use assignment::{
    hungarian_max_agreement, misclassification_distance, relabel, ContingencyTable, Permutation,
};
pub use classification::{ClassifierConfig, TrainedClassifier};
pub use clustering::{ClusterModel, ClustererConfig, Clustering};
pub use data::{
    cv_folds, load_csv, make_blobs, standard_scale, train_test_split, write_csv, BlobsSpec,
    Centers, CvGrid, Dataset, LabelVector, Scaler, SplitPlan, NOISE,
};
pub use error::{Error, Result};
pub use gridsearch::{expand_grid, search, SearchOutcome, SearchSpace};
pub use metrics::{
    ami, davies_bouldin, internal_sweep, mcc, precision_recall_f1, silhouette, InternalSweep,
};
pub use scalar::Scalar;
pub use selection::{
    best_nclust_cv, best_nclust_cv_auto, evaluate, evaluate_auto, with_workers, EvaluationReport,
    Mode, StabilityResult,
};
pub use stability::{random_labels, stability_cell, StabilityCell};

pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
pub type ClusterModel64 = ClusterModel<f64>;
pub type TrainedClassifier64 = TrainedClassifier<f64>;
pub type TrainedClassifier32 = TrainedClassifier<f32>;
pub type ClusterModel32 = ClusterModel<f32>;
