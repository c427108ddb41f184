//! Density-based clustering (DBSCAN). The number of clusters is an output.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, LabelVector, NOISE};
use crate::error::{Error, Result};
use crate::scalar::{euclidean, sq_euclidean, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DbscanParams {
    pub eps: f64,
    /// Neighbourhood size (the point itself included) that makes a core point.
    #[serde(default = "DbscanParams::default_min_samples")]
    pub min_samples: usize,
}

impl DbscanParams {
    fn default_min_samples() -> usize {
        5
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) || self.min_samples < 1 {
            return Err(Error::InvalidParameter(
                "dbscan needs eps > 0 and min_samples ≥ 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbscanModel {
    pub eps: f64,
    pub min_samples: usize,
    pub core_samples: Vec<usize>,
    pub k_found: usize,
}

/// Labels samples by density reachability. Clusters are numbered in order
/// of their lowest-index core point; unreachable samples get `-1`.
pub fn fit_dbscan<T: Scalar>(
    data: &Dataset<T>,
    params: &DbscanParams,
) -> Result<(DbscanModel, LabelVector)> {
    params.validate()?;
    let n = data.n_samples();
    let eps2 = T::of(params.eps * params.eps);
    let neighbours: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| sq_euclidean(data.row(i), data.row(j)) <= eps2)
                .collect()
        })
        .collect();
    let is_core: Vec<bool> = neighbours
        .iter()
        .map(|nb| nb.len() >= params.min_samples)
        .collect();

    let mut labels = vec![NOISE; n];
    let mut k = 0;
    let mut queue = VecDeque::new();
    for seed in 0..n {
        if !is_core[seed] || labels[seed] != NOISE {
            continue;
        }
        labels[seed] = k;
        queue.push_back(seed);
        while let Some(p) = queue.pop_front() {
            if !is_core[p] {
                continue;
            }
            for &q in &neighbours[p] {
                if labels[q] == NOISE {
                    labels[q] = k;
                    queue.push_back(q);
                }
            }
        }
        k += 1;
    }
    let model = DbscanModel {
        eps: params.eps,
        min_samples: params.min_samples,
        core_samples: (0..n).filter(|&i| is_core[i]).collect(),
        k_found: k as usize,
    };
    Ok((model, LabelVector::new(labels)?))
}

/// Picks `eps` at the elbow of the sorted k-distance curve, where k is
/// `min_samples` (each point counts as its own first neighbour).
///
/// Both axes are rescaled to [0, 1] and the elbow is the curve point
/// farthest from the chord joining its ends.
pub fn suggest_eps<T: Scalar>(data: &Dataset<T>, min_samples: usize) -> Result<f64> {
    let n = data.n_samples();
    if min_samples < 1 || min_samples > n {
        return Err(Error::InvalidParameter(format!(
            "min_samples {min_samples} outside 1..={n}"
        )));
    }
    let mut kdist: Vec<f64> = (0..n)
        .map(|i| {
            let mut d: Vec<f64> = (0..n)
                .map(|j| euclidean(data.row(i), data.row(j)).as_f64())
                .collect();
            d.select_nth_unstable_by(min_samples - 1, f64::total_cmp);
            d[min_samples - 1]
        })
        .collect();
    kdist.sort_by(f64::total_cmp);
    let (lo, hi) = (kdist[0], kdist[n - 1]);
    if hi <= lo {
        return Ok(hi.max(f64::MIN_POSITIVE));
    }
    let last = (n - 1).max(1) as f64;
    // Chord from (0, 0) to (1, 1) in normalized coordinates.
    let (best, _) = kdist
        .iter()
        .enumerate()
        .map(|(i, &d)| (i, i as f64 / last - (d - lo) / (hi - lo)))
        .fold((0, f64::NEG_INFINITY), |acc, (i, gap)| {
            if gap > acc.1 {
                (i, gap)
            } else {
                acc
            }
        });
    Ok(kdist[best])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::misclassification_distance;
    use crate::data::{make_blobs, BlobsSpec, Centers};
    use proptest::prelude::*;

    fn ds(rows: Vec<Vec<f64>>) -> Dataset<f64> {
        Dataset::from_rows(rows).unwrap()
    }

    #[test]
    fn two_separated_groups() {
        let mut rows = Vec::new();
        for i in 0..5 {
            rows.push(vec![i as f64 * 0.1, 0.0]);
            rows.push(vec![100.0 + i as f64 * 0.1, 0.0]);
        }
        let (m, l) = fit_dbscan(
            &ds(rows),
            &DbscanParams {
                eps: 0.5,
                min_samples: 3,
            },
        )
        .unwrap();
        assert_eq!(m.k_found, 2);
        assert_eq!(l.noise_count(), 0);
        assert_eq!(l.as_slice(), &[0, 1, 0, 1, 0, 1, 0, 1, 0, 1]);
    }

    #[test]
    fn sparse_points_are_noise() {
        let d = ds((0..6).map(|i| vec![i as f64 * 10.0]).collect());
        let (m, l) = fit_dbscan(
            &d,
            &DbscanParams {
                eps: 1.0,
                min_samples: 2,
            },
        )
        .unwrap();
        assert_eq!(m.k_found, 0);
        assert_eq!(l.noise_count(), 6);
        assert!(fit_dbscan(
            &d,
            &DbscanParams {
                eps: 0.0,
                min_samples: 2
            }
        )
        .is_err());
    }

    #[test]
    fn border_points_join_but_do_not_expand() {
        // 0..3 dense, 3.9 is a border point of that group, 5.0 is beyond it.
        let d = ds(vec![
            vec![0.0],
            vec![1.0],
            vec![2.0],
            vec![3.0],
            vec![3.9],
            vec![5.0],
        ]);
        let (m, l) = fit_dbscan(
            &d,
            &DbscanParams {
                eps: 1.0,
                min_samples: 3,
            },
        )
        .unwrap();
        assert_eq!(l.as_slice(), &[0, 0, 0, 0, 0, -1]);
        assert_eq!(m.core_samples, vec![1, 2, 3]);
    }

    #[test]
    fn elbow_eps_recovers_five_blobs() {
        let d: Dataset<f64> = make_blobs(&BlobsSpec::five_blobs()).unwrap();
        // With min_samples = 5 the elbow (0.54) splits one blob; 10 is the
        // smallest setting whose elbow lands in the stable 5-cluster range.
        let eps = suggest_eps(&d, 10).unwrap();
        let (m, l) = fit_dbscan(
            &d,
            &DbscanParams {
                eps,
                min_samples: 10,
            },
        )
        .unwrap();
        assert_eq!(m.k_found, 5, "eps={eps}");
        assert!(l.noise_count() < 50, "noise {}", l.noise_count());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn row_order_does_not_matter(seed in 0u64..10_000) {
            let spec = BlobsSpec {
                n_samples: 90,
                n_features: 2,
                centers: Centers::Points(vec![vec![0.0, 0.0], vec![30.0, 0.0], vec![0.0, 30.0]]),
                cluster_std: 0.5,
                center_box: (0.0, 0.0),
                seed: seed % 1000,
            };
            let d: Dataset<f64> = make_blobs(&spec).unwrap();
            let params = DbscanParams { eps: 3.0, min_samples: 4 };
            let (_, l) = fit_dbscan(&d, &params).unwrap();
            let mut order: Vec<usize> = (0..90).collect();
            use rand::{seq::SliceRandom, SeedableRng};
            order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let (_, l2) = fit_dbscan(&d.subset(&order), &params).unwrap();
            let back = l.select(&order);
            prop_assert_eq!(misclassification_distance(&back, &l2).unwrap().0, 0.0);
            prop_assert_eq!(l.noise_count(), l2.noise_count());
        }
    }
}
