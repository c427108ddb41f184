//! One train/validation stability cell.
//!
//! The clusterer labels the inner-train split and a classifier learns those
//! labels. The validation split is clustered independently, and the
//! classifier's predictions on it are compared with that clustering after
//! optimal relabeling. The same comparison with classifiers trained on
//! random labels gives the chance-level baseline.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::assignment::{misclassification_distance, Permutation};
use crate::classification::{ClassifierConfig, TrainedClassifier};
use crate::clustering::ClustererConfig;
use crate::data::{Dataset, LabelVector, NOISE};
use crate::error::{Error, Result};
use crate::rng::{self, domain};
use crate::scalar::Scalar;

/// Full redraws attempted before missing labels are patched in.
const MAX_REDRAWS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityCell {
    /// Requested k, or the number of clusters found on inner-train for
    /// auto-k clusterers.
    pub k: usize,
    pub fold: usize,
    pub rep: usize,
    #[serde(rename = "raw")]
    pub raw_distance: f64,
    #[serde(rename = "baseline")]
    pub random_baseline: f64,
    #[serde(rename = "norm")]
    pub normalized: f64,
    /// Resubstitution misclassification of the classifier on inner-train.
    #[serde(rename = "train")]
    pub train_distance: f64,
    /// Clusters found on the validation split.
    pub k_val: usize,
    pub permutation: Permutation,
    pub seed: u64,
    /// Set when the random baseline was 0 and `norm` fell back to `raw`.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub zero_baseline: bool,
}

/// Uniform i.i.d. labels over `0..k`, redrawn until every label occurs.
///
/// After a bounded number of full redraws any label still missing is
/// written over a random position whose label occurs more than once, so
/// the call terminates even when `k` is close to `n`.
pub fn random_labels(k: usize, n: usize, seed: u64) -> Result<LabelVector> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!(
            "random labels need k ≥ 2, got {k}"
        )));
    }
    if n < k {
        return Err(Error::InvalidParameter(format!(
            "random labels need n ≥ k, got n={n} k={k}"
        )));
    }
    let mut rng = rng::stream(seed, &[domain::RANDOM_LABELS]);
    let mut labels = vec![0usize; n];
    let mut counts = vec![0usize; k];
    for _ in 0..MAX_REDRAWS {
        counts.iter_mut().for_each(|c| *c = 0);
        for l in labels.iter_mut() {
            *l = rng.random_range(0..k);
            counts[*l] += 1;
        }
        if counts.iter().all(|&c| c > 0) {
            return Ok(LabelVector::from_indices(labels));
        }
    }
    for missing in 0..k {
        if counts[missing] > 0 {
            continue;
        }
        loop {
            let i = rng.random_range(0..n);
            if counts[labels[i]] > 1 {
                counts[labels[i]] -= 1;
                labels[i] = missing;
                counts[missing] = 1;
                break;
            }
        }
    }
    Ok(LabelVector::from_indices(labels))
}

/// Non-noise rows of `data` with their labels.
fn strip_noise<T: Scalar>(data: &Dataset<T>, labels: &LabelVector) -> (Dataset<T>, LabelVector) {
    if labels.noise_count() == 0 {
        return (data.clone(), labels.clone());
    }
    let keep: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] != NOISE).collect();
    (data.subset(&keep), labels.select(&keep))
}

/// Classifier trained on the clustering of `inner_train`, as built inside a
/// stability cell with the same `seed`. Also returns the noise-free training
/// rows and their labels.
pub fn fit_cell_classifier<T: Scalar>(
    inner_train: &Dataset<T>,
    clusterer: &ClustererConfig,
    classifier: &ClassifierConfig,
    k: Option<usize>,
    seed: u64,
) -> Result<(TrainedClassifier<T>, Dataset<T>, LabelVector)> {
    let fit = clusterer.fit(
        inner_train,
        k,
        rng::derive_seed(seed, &[domain::CLUSTER_TRAIN]),
    )?;
    let found = fit.k();
    if found < 2 {
        return Err(Error::TooFewClusters {
            found,
            side: "inner-train",
        });
    }
    let (x, y) = strip_noise(inner_train, &fit.labels);
    let model = classifier.fit(&x, &y)?;
    Ok((model, x, y))
}

/// Runs one cell. `k` is required for fixed-k clusterers and must be `None`
/// for auto-k ones.
pub fn stability_cell<T: Scalar>(
    inner_train: &Dataset<T>,
    validation: &Dataset<T>,
    clusterer: &ClustererConfig,
    classifier: &ClassifierConfig,
    k: Option<usize>,
    n_rnd: usize,
    seed: u64,
) -> Result<StabilityCell> {
    if n_rnd < 1 {
        return Err(Error::InvalidParameter("n_rnd must be ≥ 1".into()));
    }
    let (model, x_itr, y_itr) = fit_cell_classifier(inner_train, clusterer, classifier, k, seed)?;
    let k_itr = y_itr.n_clusters();
    let train_distance = misclassification_distance(&model.predict(&x_itr)?, &y_itr)?.0;

    let val = clusterer.fit(
        validation,
        k,
        rng::derive_seed(seed, &[domain::CLUSTER_VAL]),
    )?;
    let k_val = val.k();
    if k.is_some() && k_val < 2 {
        return Err(Error::TooFewClusters {
            found: k_val,
            side: "validation",
        });
    }
    let y_val = val.labels;
    let (raw_distance, permutation) =
        misclassification_distance(&model.predict(validation)?, &y_val)?;

    let mut total = 0.0;
    for r in 0..n_rnd {
        let labels = random_labels(
            k_itr,
            x_itr.n_samples(),
            rng::derive_seed(seed, &[r as u64]),
        )?;
        let chance = classifier.fit(&x_itr, &labels)?;
        total += misclassification_distance(&chance.predict(validation)?, &y_val)?.0;
    }
    let random_baseline = total / n_rnd as f64;
    let zero_baseline = random_baseline <= 0.0;
    let normalized = if zero_baseline {
        tracing::warn!(seed, "random baseline is 0; reporting the raw distance");
        raw_distance
    } else {
        raw_distance / random_baseline
    };
    Ok(StabilityCell {
        k: k_itr,
        fold: 0,
        rep: 0,
        raw_distance,
        random_baseline,
        normalized,
        train_distance,
        k_val,
        permutation,
        seed,
        zero_baseline,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classification::KnnParams;
    use crate::clustering::WardParams;
    use crate::data::{make_blobs, train_test_split, BlobsSpec};

    fn blobs_halves() -> (Dataset<f64>, Dataset<f64>) {
        let d = make_blobs(&BlobsSpec::five_blobs()).unwrap();
        let (_, a, b) = train_test_split(&d, 0.5, 11, None).unwrap();
        (a, b)
    }

    #[test]
    fn random_labels_cover_and_balance() {
        let l = random_labels(2, 10_000, 3).unwrap();
        let ones = l.iter().filter(|&x| x == 1).count() as f64 / 1e4;
        assert!((ones - 0.5).abs() < 0.02, "{ones}");
        for n in [5, 12, 40] {
            let l = random_labels(n, n, 9).unwrap();
            assert_eq!(l.n_clusters(), n);
        }
        assert_eq!(
            random_labels(4, 50, 1).unwrap(),
            random_labels(4, 50, 1).unwrap()
        );
        assert!(random_labels(3, 2, 0).is_err());
        assert!(random_labels(1, 5, 0).is_err());
    }

    #[test]
    fn blobs_at_true_k_are_perfectly_stable() {
        let (a, b) = blobs_halves();
        let knn = ClassifierConfig::Knn(KnnParams { n_neighbors: 15 });
        let c = stability_cell(&a, &b, &ClustererConfig::default(), &knn, Some(5), 5, 1).unwrap();
        assert_eq!(c.raw_distance, 0.0);
        assert_eq!(c.normalized, 0.0);
        assert!(c.random_baseline > 0.6);
        assert_eq!((c.k, c.k_val), (5, 5));
    }

    #[test]
    fn wrong_k_is_less_stable_and_reproducible() {
        let (a, b) = blobs_halves();
        let knn = ClassifierConfig::Knn(KnnParams { n_neighbors: 15 });
        let run =
            || stability_cell(&a, &b, &ClustererConfig::default(), &knn, Some(2), 5, 8).unwrap();
        let c = run();
        assert!(c.raw_distance >= 0.0 && c.raw_distance <= 1.0);
        assert_eq!(c.raw_distance.to_bits(), run().raw_distance.to_bits());
        assert_eq!(c.normalized.to_bits(), run().normalized.to_bits());
    }

    #[test]
    fn chance_classifier_normalizes_to_one() {
        let (a, b) = blobs_halves();
        let chance = ClassifierConfig::Chance { seed: 0 };
        let mean: f64 = (0..10)
            .map(|s| {
                stability_cell(&a, &b, &ClustererConfig::default(), &chance, Some(3), 20, s)
                    .unwrap()
                    .normalized
            })
            .sum::<f64>()
            / 10.0;
        assert!((mean - 1.0).abs() < 0.1, "{mean}");
    }

    #[test]
    fn cell_json_fields() {
        let (a, b) = blobs_halves();
        let knn = ClassifierConfig::Knn(KnnParams { n_neighbors: 5 });
        let c = stability_cell(
            &a,
            &b,
            &ClustererConfig::Ward(WardParams::default()),
            &knn,
            Some(3),
            2,
            0,
        )
        .unwrap();
        let v: serde_json::Value = serde_json::to_value(&c).unwrap();
        for key in ["k", "fold", "rep", "raw", "baseline", "norm", "train"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        let back: StabilityCell = serde_json::from_value(v).unwrap();
        assert_eq!(back, c);
    }
}
