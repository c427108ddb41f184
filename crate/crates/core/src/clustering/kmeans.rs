//! Lloyd's k-means with greedy k-means++ seeding.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, LabelVector};
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::{sq_euclidean, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KMeansParams {
    #[serde(default = "KMeansParams::default_n_init")]
    pub n_init: usize,
    #[serde(default = "KMeansParams::default_max_iter")]
    pub max_iter: usize,
    /// Convergence threshold on the summed squared centroid shift, relative
    /// to the mean per-feature variance of the data.
    #[serde(default = "KMeansParams::default_tol")]
    pub tol: f64,
}

impl KMeansParams {
    fn default_n_init() -> usize {
        10
    }

    fn default_max_iter() -> usize {
        300
    }

    fn default_tol() -> f64 {
        1e-4
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_init < 1 || self.max_iter < 1 || !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(
                "kmeans needs n_init ≥ 1, max_iter ≥ 1 and tol > 0".into(),
            ));
        }
        Ok(())
    }
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self {
            n_init: Self::default_n_init(),
            max_iter: Self::default_max_iter(),
            tol: Self::default_tol(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct KMeansModel<T> {
    pub centroids: Vec<Vec<T>>,
    pub inertia: T,
    pub n_iter: usize,
}

impl<T: Scalar> KMeansModel<T> {
    /// Index of the nearest centroid; ties go to the lower index.
    pub fn nearest(&self, x: &[T]) -> (usize, T) {
        nearest(&self.centroids, x)
    }

    pub fn predict(&self, data: &Dataset<T>) -> Result<LabelVector> {
        let p = self.centroids.first().map_or(0, Vec::len);
        if data.n_features() != p {
            return Err(Error::FeatureMismatch {
                expected: p,
                found: data.n_features(),
            });
        }
        Ok(LabelVector::from_indices(
            data.rows().map(|r| self.nearest(r).0),
        ))
    }
}

fn nearest<T: Scalar>(centroids: &[Vec<T>], x: &[T]) -> (usize, T) {
    let mut best = (0, T::infinity());
    for (c, cen) in centroids.iter().enumerate() {
        let d = sq_euclidean(cen, x);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Greedy k-means++: each new center is the best of `2 + ln k` candidates
/// sampled proportionally to squared distance.
fn kmeans_plus_plus<T: Scalar>(data: &Dataset<T>, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<T>> {
    let n = data.n_samples();
    let trials = 2 + (k as f64).ln().floor() as usize;
    let first = rng.random_range(0..n);
    let mut centers = vec![data.row(first).to_vec()];
    let mut closest: Vec<f64> = data
        .rows()
        .map(|r| sq_euclidean(r, data.row(first)).as_f64())
        .collect();

    while centers.len() < k {
        let total: f64 = closest.iter().sum();
        let mut best: Option<(f64, usize, Vec<f64>)> = None;
        for _ in 0..trials {
            let cand = if total > 0.0 {
                let target = rng.random::<f64>() * total;
                let mut acc = 0.0;
                closest
                    .iter()
                    .position(|&d| {
                        acc += d;
                        acc > target
                    })
                    .unwrap_or(n - 1)
            } else {
                rng.random_range(0..n)
            };
            let updated: Vec<f64> = data
                .rows()
                .zip(&closest)
                .map(|(r, &d)| d.min(sq_euclidean(r, data.row(cand)).as_f64()))
                .collect();
            let pot: f64 = updated.iter().sum();
            if best.as_ref().is_none_or(|(b, _, _)| pot < *b) {
                best = Some((pot, cand, updated));
            }
        }
        let (_, cand, updated) = best.expect("at least one trial");
        centers.push(data.row(cand).to_vec());
        closest = updated;
    }
    centers
}

fn assign<T: Scalar>(
    data: &Dataset<T>,
    centroids: &[Vec<T>],
    labels: &mut [usize],
    dists: &mut [T],
) -> T {
    let mut inertia = T::zero();
    for (i, r) in data.rows().enumerate() {
        let (c, d) = nearest(centroids, r);
        labels[i] = c;
        dists[i] = d;
        inertia = inertia + d;
    }
    inertia
}

/// Recomputes centroids as cluster means. An empty cluster takes the point
/// currently farthest from its own centroid, which is then moved.
fn update<T: Scalar>(
    data: &Dataset<T>,
    k: usize,
    labels: &mut [usize],
    dists: &mut [T],
) -> Vec<Vec<T>> {
    let p = data.n_features();
    loop {
        let mut sums = vec![vec![T::zero(); p]; k];
        let mut counts = vec![0usize; k];
        for (i, r) in data.rows().enumerate() {
            counts[labels[i]] += 1;
            for (s, &v) in sums[labels[i]].iter_mut().zip(r) {
                *s = *s + v;
            }
        }
        match counts.iter().position(|&c| c == 0) {
            None => {
                return sums
                    .into_iter()
                    .zip(counts)
                    .map(|(s, c)| {
                        let c = T::of_usize(c);
                        s.into_iter().map(|v| v / c).collect()
                    })
                    .collect();
            }
            Some(empty) => {
                let far = (0..labels.len()).filter(|&i| counts[labels[i]] > 1).fold(
                    None::<usize>,
                    |best, i| match best {
                        Some(b) if dists[b] >= dists[i] => Some(b),
                        _ => Some(i),
                    },
                );
                let Some(far) = far else {
                    // Fewer distinct points than clusters; nothing can move.
                    return sums
                        .into_iter()
                        .zip(counts)
                        .map(|(s, c)| {
                            let c = T::of_usize(c.max(1));
                            s.into_iter().map(|v| v / c).collect()
                        })
                        .collect();
                };
                labels[far] = empty;
                dists[far] = T::zero();
            }
        }
    }
}

fn single_run<T: Scalar>(
    data: &Dataset<T>,
    k: usize,
    params: &KMeansParams,
    threshold: T,
    rng: &mut ChaCha8Rng,
) -> (KMeansModel<T>, Vec<usize>) {
    let n = data.n_samples();
    let mut centroids = kmeans_plus_plus(data, k, rng);
    let mut labels = vec![0usize; n];
    let mut dists = vec![T::zero(); n];
    let mut inertia = assign(data, &centroids, &mut labels, &mut dists);
    let mut n_iter = 0;
    for _ in 0..params.max_iter {
        n_iter += 1;
        let next = update(data, k, &mut labels, &mut dists);
        let shift: T = centroids
            .iter()
            .zip(&next)
            .map(|(a, b)| sq_euclidean(a, b))
            .sum();
        centroids = next;
        let new_inertia = assign(data, &centroids, &mut labels, &mut dists);
        debug_assert!(
            new_inertia <= inertia + inertia.abs() * T::of(1e-9) + T::epsilon() || shift.is_zero(),
            "Lloyd step increased inertia"
        );
        inertia = new_inertia;
        if shift <= threshold {
            break;
        }
    }
    // Final labels must reference every centroid.
    let counts = labels.iter().fold(vec![0usize; k], |mut c, &l| {
        c[l] += 1;
        c
    });
    if counts.contains(&0) {
        centroids = update(data, k, &mut labels, &mut dists);
        inertia = data
            .rows()
            .zip(&labels)
            .map(|(r, &l)| sq_euclidean(r, &centroids[l]))
            .sum();
    }
    (
        KMeansModel {
            centroids,
            inertia,
            n_iter,
        },
        labels,
    )
}

/// Best of `n_init` Lloyd runs by within-cluster sum of squares.
///
/// Each restart draws from its own stream `(seed, restart)`; ties in
/// inertia keep the earlier restart.
pub fn fit_kmeans<T: Scalar>(
    data: &Dataset<T>,
    k: usize,
    params: &KMeansParams,
    seed: u64,
) -> Result<(KMeansModel<T>, LabelVector)> {
    params.validate()?;
    let n = data.n_samples();
    if k < 2 || k > n {
        return Err(Error::InvalidParameter(format!("k={k} outside 2..={n}")));
    }
    let means = data.column_means();
    let var: T = data.rows().map(|r| sq_euclidean(r, &means)).sum::<T>()
        / T::of_usize(n * data.n_features());
    let threshold = var * T::of(params.tol);

    let mut best: Option<(KMeansModel<T>, Vec<usize>)> = None;
    for restart in 0..params.n_init {
        let mut rng = rng::stream(seed, &[restart as u64]);
        let run = single_run(data, k, params, threshold, &mut rng);
        if best.as_ref().is_none_or(|(b, _)| run.0.inertia < b.inertia) {
            best = Some(run);
        }
    }
    let (model, labels) = best.expect("n_init ≥ 1");
    Ok((model, LabelVector::from_indices(labels)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::misclassification_distance;
    use crate::data::{make_blobs, BlobsSpec};
    use crate::metrics::ami;

    fn ds(rows: Vec<Vec<f64>>) -> Dataset<f64> {
        Dataset::from_rows(rows).unwrap()
    }

    #[test]
    fn two_points_two_clusters() {
        let d = ds(vec![vec![0.0, 0.0], vec![10.0, 0.0]]);
        let (m, l) = fit_kmeans(&d, 2, &KMeansParams::default(), 1).unwrap();
        assert_eq!(m.inertia, 0.0);
        assert_ne!(l[0], l[1]);
    }

    #[test]
    fn saturation_gives_singletons() {
        let d = ds((0..6)
            .map(|i| vec![i as f64 * 1.5, (i * i) as f64])
            .collect());
        let (m, l) = fit_kmeans(&d, 6, &KMeansParams::default(), 3).unwrap();
        assert_eq!(m.inertia, 0.0);
        assert_eq!(l.n_clusters(), 6);
    }

    #[test]
    fn k_out_of_range() {
        let d = ds(vec![vec![0.0], vec![1.0]]);
        assert!(fit_kmeans(&d, 1, &KMeansParams::default(), 0).is_err());
        assert!(fit_kmeans(&d, 3, &KMeansParams::default(), 0).is_err());
    }

    #[test]
    fn recovers_five_blobs() {
        let d: Dataset<f64> = make_blobs(&BlobsSpec::five_blobs()).unwrap();
        let (m, l) = fit_kmeans(&d, 5, &KMeansParams::default(), 11).unwrap();
        assert_eq!(l.n_clusters(), 5);
        assert!(m.centroids.iter().flatten().all(|v| v.is_finite()));
        assert_eq!(ami(d.true_labels().unwrap(), &l).unwrap().value, 1.0);
    }

    #[test]
    fn single_precision_matches_on_blobs() {
        let d: Dataset<f32> = make_blobs(&BlobsSpec::five_blobs()).unwrap();
        let (_, l) = fit_kmeans(&d, 5, &KMeansParams::default(), 11).unwrap();
        let (dist, _) = misclassification_distance(d.true_labels().unwrap(), &l).unwrap();
        assert_eq!(dist, 0.0);
    }

    #[test]
    fn inertia_non_increasing_over_lloyd_steps() {
        let d: Dataset<f64> = make_blobs(&BlobsSpec {
            n_samples: 300,
            n_features: 3,
            centers: crate::data::Centers::Count(4),
            cluster_std: 3.0,
            center_box: (-5.0, 5.0),
            seed: 1,
        })
        .unwrap();
        let mut rng = rng::stream(4, &[0]);
        let mut centroids = kmeans_plus_plus(&d, 4, &mut rng);
        let mut labels = vec![0; 300];
        let mut dists = vec![0.0; 300];
        let mut prev = assign(&d, &centroids, &mut labels, &mut dists);
        for _ in 0..30 {
            centroids = update(&d, 4, &mut labels, &mut dists);
            let cur = assign(&d, &centroids, &mut labels, &mut dists);
            assert!(cur <= prev + 1e-9, "{cur} > {prev}");
            prev = cur;
        }
    }

    #[test]
    fn translation_equivariance() {
        let d: Dataset<f64> = make_blobs(&BlobsSpec::five_blobs()).unwrap();
        let shifted = Dataset::from_flat(
            d.values()
                .iter()
                .enumerate()
                .map(|(i, v)| v + if i % 2 == 0 { 100.0 } else { -50.0 })
                .collect(),
            d.n_samples(),
            2,
        )
        .unwrap();
        let (m1, l1) = fit_kmeans(&d, 5, &KMeansParams::default(), 2).unwrap();
        let (m2, l2) = fit_kmeans(&shifted, 5, &KMeansParams::default(), 2).unwrap();
        assert_eq!(misclassification_distance(&l1, &l2).unwrap().0, 0.0);
        let mut c1: Vec<(i64, i64)> = m1
            .centroids
            .iter()
            .map(|c| ((c[0] * 1e6) as i64, (c[1] * 1e6) as i64))
            .collect();
        let mut c2: Vec<(i64, i64)> = m2
            .centroids
            .iter()
            .map(|c| (((c[0] - 100.0) * 1e6) as i64, ((c[1] + 50.0) * 1e6) as i64))
            .collect();
        c1.sort();
        c2.sort();
        for (a, b) in c1.iter().zip(&c2) {
            assert!((a.0 - b.0).abs() <= 2 && (a.1 - b.1).abs() <= 2);
        }
    }
}
