//! Agglomerative clustering with Ward linkage.
//!
//! Distances follow the Lance-Williams recurrence for Ward's method on
//! squared Euclidean distances, so the stored dissimilarity between clusters
//! `a` and `b` is `2·|a||b|/(|a|+|b|)·‖c_a − c_b‖²`, twice the increase in
//! within-cluster sum of squares caused by merging them.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, LabelVector};
use crate::error::{Error, Result};
use crate::scalar::{sq_euclidean, Scalar};

/// Ward linkage has no tuning parameters; the type exists so that unknown
/// keys in a config are rejected.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WardParams {}

/// One merge: slots `a < b` are joined into slot `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Merge<T> {
    pub a: usize,
    pub b: usize,
    /// Increase in within-cluster sum of squares.
    pub cost: T,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct WardModel<T> {
    /// Merges performed until `k` clusters remain, in order.
    pub merges: Vec<Merge<T>>,
    pub k: usize,
    /// Within-cluster sum of squares at the cut.
    pub inertia: T,
}

/// Cuts the Ward hierarchy at exactly `k` clusters.
///
/// At each step the pair with the smallest dissimilarity is merged; equal
/// dissimilarities resolve to the lexicographically smallest `(a, b)`.
/// Labels are numbered by the smallest sample index in each cluster.
pub fn fit_ward<T: Scalar>(data: &Dataset<T>, k: usize) -> Result<(WardModel<T>, LabelVector)> {
    let n = data.n_samples();
    if k < 2 || k > n {
        return Err(Error::InvalidParameter(format!("k={k} outside 2..={n}")));
    }
    // Condensed upper triangle, dist[idx(i, j)] for i < j.
    let idx = |i: usize, j: usize| i * n - i * (i + 1) / 2 + (j - i - 1);
    let mut dist = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            dist.push(sq_euclidean(data.row(i), data.row(j)));
        }
    }
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut owner: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n - k);
    let two = T::of(2.0);

    for _ in 0..n - k {
        let mut best = (usize::MAX, usize::MAX, T::infinity());
        for i in (0..n).filter(|&i| active[i]) {
            for j in (i + 1..n).filter(|&j| active[j]) {
                let d = dist[idx(i, j)];
                if d < best.2 {
                    best = (i, j, d);
                }
            }
        }
        let (a, b, d_ab) = best;
        let (na, nb) = (T::of_usize(size[a]), T::of_usize(size[b]));
        for c in (0..n).filter(|&c| active[c] && c != a && c != b) {
            let nc = T::of_usize(size[c]);
            let d_ac = dist[idx(a.min(c), a.max(c))];
            let d_bc = dist[idx(b.min(c), b.max(c))];
            let updated = ((na + nc) * d_ac + (nb + nc) * d_bc - nc * d_ab) / (na + nb + nc);
            dist[idx(a.min(c), a.max(c))] = updated;
        }
        active[b] = false;
        size[a] += size[b];
        for o in owner.iter_mut().filter(|o| **o == b) {
            *o = a;
        }
        merges.push(Merge {
            a,
            b,
            cost: d_ab / two,
            size: size[a],
        });
    }

    // Slot ids are the smallest member index, so ordering slots orders
    // clusters by first appearance.
    let mut slot_label = vec![usize::MAX; n];
    let mut next = 0;
    for &o in &owner {
        if slot_label[o] == usize::MAX {
            slot_label[o] = next;
            next += 1;
        }
    }
    let labels = LabelVector::from_indices(owner.iter().map(|&o| slot_label[o]));
    let inertia = merges.iter().fold(T::zero(), |acc, m| acc + m.cost);
    Ok((WardModel { merges, k, inertia }, labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ds(rows: Vec<Vec<f64>>) -> Dataset<f64> {
        Dataset::from_rows(rows).unwrap()
    }

    fn sse(points: &[f64], labels: &[usize], k: usize) -> f64 {
        (0..k)
            .map(|c| {
                let m: Vec<f64> = points
                    .iter()
                    .zip(labels)
                    .filter(|(_, &l)| l == c)
                    .map(|(p, _)| *p)
                    .collect();
                let mean = m.iter().sum::<f64>() / m.len() as f64;
                m.iter().map(|p| (p - mean).powi(2)).sum::<f64>()
            })
            .sum()
    }

    #[test]
    fn splits_two_pairs_like_exhaustive_search() {
        let pts = [0.0, 1.0, 10.0, 11.0];
        // Every non-trivial 2-partition, scored by within-cluster SSE.
        let mut best = (f64::INFINITY, 0u32);
        for mask in 1u32..(1 << 3) {
            let labels: Vec<usize> = (0..4).map(|i| ((mask << 1) >> i & 1) as usize).collect();
            let s = sse(&pts, &labels, 2);
            if s < best.0 {
                best = (s, mask);
            }
        }
        let (m, l) = fit_ward(&ds(pts.iter().map(|&p| vec![p]).collect()), 2).unwrap();
        assert_eq!(l.as_slice(), &[0, 0, 1, 1]);
        let ours: Vec<usize> = l.iter().map(|v| v as usize).collect();
        assert_eq!(sse(&pts, &ours, 2), best.0);
        assert!((m.inertia - best.0).abs() < 1e-12);
    }

    #[test]
    fn k_equal_n_is_singletons() {
        let (m, l) = fit_ward(&ds(vec![vec![0.0], vec![3.0], vec![1.0]]), 3).unwrap();
        assert!(m.merges.is_empty());
        assert_eq!(l.as_slice(), &[0, 1, 2]);
        assert!(fit_ward(&ds(vec![vec![0.0], vec![1.0]]), 3).is_err());
    }

    #[test]
    fn merge_cost_matches_centroid_formula() {
        let d = ds(vec![
            vec![0.0, 0.0],
            vec![2.0, 0.0],
            vec![0.0, 2.0],
            vec![9.0, 9.0],
        ]);
        let (m, _) = fit_ward(&d, 2).unwrap();
        // First merge pairs points 0 and 1 (tie with (0, 2) resolved
        // lexicographically); the second adds point 2 to that pair.
        let pair_then_third = m.merges[1].cost;
        let c = [1.0, 0.0]; // centroid of points 0 and 1
        let expect = 2.0 * 1.0 / 3.0 * ((0.0 - c[0]) * (0.0 - c[0]) + (2.0 - c[1]) * (2.0 - c[1]));
        assert!((pair_then_third - expect).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn merge_costs_non_decreasing(pts in proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 3..25)) {
            let d = ds(pts.iter().map(|&(x, y)| vec![x, y]).collect());
            let (m, l) = fit_ward(&d, 2).unwrap();
            for w in m.merges.windows(2) {
                prop_assert!(w[1].cost >= w[0].cost - 1e-9);
            }
            prop_assert_eq!(l.n_clusters(), 2);
        }

        #[test]
        fn duplicates_share_a_cluster(pts in proptest::collection::vec(-20.0f64..20.0, 3..15), dup in 0usize..15, k in 2usize..4) {
            let mut rows: Vec<Vec<f64>> = pts.iter().map(|&p| vec![p]).collect();
            let dup = dup % rows.len();
            rows.push(rows[dup].clone());
            let n = rows.len();
            let k = k.min(n - 1);
            let (_, l) = fit_ward(&ds(rows), k).unwrap();
            prop_assert_eq!(l[dup], l[n - 1]);
        }
    }
}
