//! Optimal label alignment.
//!
//! Clustering labels are arbitrary names, so agreement between a classifier
//! and a clusterer is measured after relabeling the clustering by the
//! bijection that maximizes agreement. That bijection is found with the
//! Kuhn-Munkres algorithm on the contingency table.

use serde::{Deserialize, Serialize};

use crate::data::{LabelVector, NOISE};
use crate::error::{Error, Result};

/// Bijection on `0..size`; `mapping[i]` is the image of label `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation {
    mapping: Vec<usize>,
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;

    fn try_from(mapping: Vec<usize>) -> Result<Self> {
        Permutation::new(mapping)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.mapping
    }
}

impl Permutation {
    pub fn new(mapping: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; mapping.len()];
        for &m in &mapping {
            if m >= mapping.len() || std::mem::replace(&mut seen[m], true) {
                return Err(Error::InvalidParameter(format!(
                    "{mapping:?} is not a permutation"
                )));
            }
        }
        Ok(Self { mapping })
    }

    pub fn identity(size: usize) -> Self {
        Self {
            mapping: (0..size).collect(),
        }
    }

    pub fn size(&self) -> usize {
        self.mapping.len()
    }

    pub fn mapping(&self) -> &[usize] {
        &self.mapping
    }

    pub fn apply(&self, label: usize) -> usize {
        self.mapping[label]
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.mapping.len()];
        for (i, &m) in self.mapping.iter().enumerate() {
            inv[m] = i;
        }
        Self { mapping: inv }
    }

    pub fn is_identity(&self) -> bool {
        self.mapping.iter().enumerate().all(|(i, &m)| i == m)
    }
}

/// Co-occurrence counts of two labelings. Rows index labels `0..n_rows` of
/// the first labeling, columns labels `0..n_cols` of the second.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    counts: Vec<Vec<u64>>,
}

impl ContingencyTable {
    pub fn new(counts: Vec<Vec<u64>>) -> Result<Self> {
        let cols = counts.first().map_or(0, Vec::len);
        if counts.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidParameter("ragged contingency table".into()));
        }
        Ok(Self { counts })
    }

    /// Counts pairs `(a[i], b[i])`, skipping samples where either side is
    /// noise. Labels index rows/columns directly, so both sides should be
    /// compact or close to it.
    pub fn from_labels(a: &LabelVector, b: &LabelVector) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::LengthMismatch(a.len(), b.len()));
        }
        let rows = a.iter().max().map_or(0, |m| (m + 1).max(0) as usize);
        let cols = b.iter().max().map_or(0, |m| (m + 1).max(0) as usize);
        let mut counts = vec![vec![0u64; cols]; rows];
        for (x, y) in a.iter().zip(b.iter()) {
            if x != NOISE && y != NOISE {
                counts[x as usize][y as usize] += 1;
            }
        }
        Ok(Self { counts })
    }

    pub fn n_rows(&self) -> usize {
        self.counts.len()
    }

    pub fn n_cols(&self) -> usize {
        self.counts.first().map_or(0, Vec::len)
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i][j]
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn transpose(&self) -> Self {
        let (r, c) = (self.n_rows(), self.n_cols());
        Self {
            counts: (0..c)
                .map(|j| (0..r).map(|i| self.counts[i][j]).collect())
                .collect(),
        }
    }
}

/// Min-cost perfect matching on a square matrix (O(n³) shortest augmenting
/// paths with potentials). Returns `assign[row] = col`.
fn min_cost_assignment(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    const INF: i64 = i64::MAX / 4;
    // 1-based arrays; index 0 is the virtual source column.
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0usize;
        let mut minv = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let i0 = owner[col0];
            let mut delta = INF;
            let mut col1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = col0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    col1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            owner[col0] = owner[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        if owner[j] > 0 {
            assign[owner[j] - 1] = j - 1;
        }
    }
    assign
}

/// Row→column bijection maximizing `Σ_i counts[i][σ(i)]`.
///
/// Non-square tables are zero-padded to `max(rows, cols)`; the returned
/// permutation has that size, so rows without a real partner map to ids at
/// or beyond the other side's range.
pub fn hungarian_max_agreement(table: &ContingencyTable) -> (Permutation, u64) {
    let n = table.n_rows().max(table.n_cols());
    if n == 0 {
        return (Permutation::identity(0), 0);
    }
    let cost: Vec<Vec<i64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i < table.n_rows() && j < table.n_cols() {
                        -(table.get(i, j) as i64)
                    } else {
                        0
                    }
                })
                .collect()
        })
        .collect();
    let assign = min_cost_assignment(&cost);
    let agreement = assign
        .iter()
        .enumerate()
        .filter(|&(i, &j)| i < table.n_rows() && j < table.n_cols())
        .map(|(i, &j)| table.get(i, j))
        .sum();
    (Permutation { mapping: assign }, agreement)
}

/// Permutation-minimized normalized Hamming distance
/// `min_σ (1/n) Σ 1{predicted_i ≠ σ(clustered_i)}`.
///
/// The permutation acts on the clustering labels. Samples whose clustering
/// label is noise are dropped before counting `n`. Returns the distance and
/// the minimizing σ (clustering label → classifier label).
pub fn misclassification_distance(
    predicted: &LabelVector,
    clustered: &LabelVector,
) -> Result<(f64, Permutation)> {
    if predicted.len() != clustered.len() {
        return Err(Error::LengthMismatch(predicted.len(), clustered.len()));
    }
    let n = clustered.iter().filter(|&l| l != NOISE).count();
    if n == 0 {
        return Err(Error::AllNoise);
    }
    if let Some(i) = (0..predicted.len()).find(|&i| predicted[i] == NOISE && clustered[i] != NOISE)
    {
        return Err(Error::InvalidData(format!(
            "predicted label at {i} is the noise marker"
        )));
    }
    let table = ContingencyTable::from_labels(clustered, predicted)?;
    let (perm, agreement) = hungarian_max_agreement(&table);
    Ok((1.0 - agreement as f64 / n as f64, perm))
}

/// Applies `perm` to every non-noise label; noise passes through.
pub fn relabel(labels: &LabelVector, perm: &Permutation) -> Result<LabelVector> {
    let out = labels
        .iter()
        .map(|l| {
            if l == NOISE {
                Ok(NOISE)
            } else if (l as usize) < perm.size() {
                Ok(perm.apply(l as usize) as i32)
            } else {
                Err(Error::LabelOutOfRange {
                    label: l,
                    size: perm.size(),
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    LabelVector::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lv(v: &[i32]) -> LabelVector {
        LabelVector::new(v.to_vec()).unwrap()
    }

    fn all_perms(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in all_perms(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    fn brute_max(table: &ContingencyTable) -> u64 {
        let n = table.n_rows().max(table.n_cols());
        all_perms(n)
            .into_iter()
            .map(|p| {
                p.iter()
                    .enumerate()
                    .filter(|&(i, &j)| i < table.n_rows() && j < table.n_cols())
                    .map(|(i, &j)| table.get(i, j))
                    .sum()
            })
            .max()
            .unwrap()
    }

    #[test]
    fn diagonal_table_gives_identity() {
        let t = ContingencyTable::new(vec![vec![3, 0, 0], vec![0, 4, 0], vec![0, 0, 5]]).unwrap();
        let (p, a) = hungarian_max_agreement(&t);
        assert!(p.is_identity());
        assert_eq!(a, 12);
    }

    #[test]
    fn anti_diagonal_gives_swap() {
        let t = ContingencyTable::new(vec![vec![0, 4], vec![4, 0]]).unwrap();
        let (p, a) = hungarian_max_agreement(&t);
        assert_eq!(p.mapping(), &[1, 0]);
        assert_eq!(a, 8);
    }

    #[test]
    fn random_5x5_tables_match_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let t = ContingencyTable::new(
                (0..5)
                    .map(|_| (0..5).map(|_| rng.random_range(0..20)).collect())
                    .collect(),
            )
            .unwrap();
            let (p, a) = hungarian_max_agreement(&t);
            assert_eq!(a, brute_max(&t));
            let via_perm: u64 = (0..5).map(|i| t.get(i, p.apply(i))).sum();
            assert_eq!(via_perm, a);
        }
    }

    #[test]
    fn distance_examples() {
        let (d, p) = misclassification_distance(&lv(&[0, 1, 2]), &lv(&[0, 1, 2])).unwrap();
        assert_eq!(d, 0.0);
        assert!(p.is_identity());

        let (d, p) = misclassification_distance(&lv(&[0, 0, 1, 1]), &lv(&[1, 1, 0, 0])).unwrap();
        assert_eq!(d, 0.0);
        assert_eq!(p.mapping(), &[1, 0]);

        // Brute force over 3! permutations: best σ maps 1→0, 0→1 and loses
        // only the last sample.
        let (d, _) =
            misclassification_distance(&lv(&[0, 0, 1, 1, 2]), &lv(&[1, 1, 0, 0, 0])).unwrap();
        assert!((d - 0.2).abs() < 1e-15);
    }

    #[test]
    fn noise_is_excluded_and_all_noise_errors() {
        let (d, _) = misclassification_distance(&lv(&[0, 1, 1]), &lv(&[0, -1, 1])).unwrap();
        assert_eq!(d, 0.0);
        assert!(matches!(
            misclassification_distance(&lv(&[0, 1]), &lv(&[-1, -1])),
            Err(Error::AllNoise)
        ));
        assert!(misclassification_distance(&lv(&[0]), &lv(&[0, 1])).is_err());
    }

    #[test]
    fn unequal_cardinalities_pad() {
        // Three clusters against two predicted classes.
        let (d, p) =
            misclassification_distance(&lv(&[0, 0, 1, 1, 1]), &lv(&[2, 2, 0, 0, 1])).unwrap();
        assert!((d - 0.2).abs() < 1e-15);
        assert_eq!(p.size(), 3);
        assert_eq!(p.apply(2), 0);
        assert_eq!(p.apply(0), 1);
        assert_eq!(
            p.apply(1),
            2,
            "unmatched cluster goes beyond the classifier's range"
        );
    }

    #[test]
    fn relabel_examples() {
        let l = lv(&[0, 1, 0, -1]);
        assert_eq!(relabel(&l, &Permutation::identity(2)).unwrap(), l);
        let swap = Permutation::new(vec![1, 0]).unwrap();
        assert_eq!(relabel(&l, &swap).unwrap().as_slice(), &[1, 0, 1, -1]);
        assert!(matches!(
            relabel(&lv(&[2]), &swap),
            Err(Error::LabelOutOfRange { label: 2, size: 2 })
        ));
        assert!(Permutation::new(vec![0, 0]).is_err());
    }

    fn labels_strategy() -> impl Strategy<Value = (Vec<i32>, Vec<i32>)> {
        (1usize..=6, 1usize..=6, 1usize..40).prop_flat_map(|(ka, kb, n)| {
            (
                proptest::collection::vec(0..ka as i32, n),
                proptest::collection::vec(0..kb as i32, n),
            )
        })
    }

    proptest! {
        #[test]
        fn distance_equals_brute_force_both_forms((a, b) in labels_strategy()) {
            let (pred, clus) = (lv(&a), lv(&b));
            let (d, perm) = misclassification_distance(&pred, &clus).unwrap();
            let k = (a.iter().chain(&b).max().unwrap() + 1) as usize;
            let n = a.len() as f64;
            let mut best_clus = f64::INFINITY;
            let mut best_pred = f64::INFINITY;
            for p in all_perms(k) {
                let miss_c = a.iter().zip(&b).filter(|(x, y)| **x as usize != p[**y as usize]).count();
                let miss_p = a.iter().zip(&b).filter(|(x, y)| p[**x as usize] != **y as usize).count();
                best_clus = best_clus.min(miss_c as f64 / n);
                best_pred = best_pred.min(miss_p as f64 / n);
            }
            prop_assert!((d - best_clus).abs() < 1e-12);
            prop_assert!((best_clus - best_pred).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&d));
            // The returned σ achieves the distance.
            let relabeled = relabel(&clus, &perm).unwrap();
            let miss = relabeled.iter().zip(pred.iter()).filter(|(x, y)| x != y).count();
            prop_assert!((miss as f64 / n - d).abs() < 1e-12);
            // Symmetry after transposing.
            let (d2, _) = misclassification_distance(&clus, &pred).unwrap();
            prop_assert!((d - d2).abs() < 1e-12);
        }

        #[test]
        fn agreement_is_transpose_invariant(rows in proptest::collection::vec(proptest::collection::vec(0u64..30, 4), 1..6)) {
            let t = ContingencyTable::new(rows).unwrap();
            prop_assert_eq!(hungarian_max_agreement(&t).1, hungarian_max_agreement(&t.transpose()).1);
            prop_assert_eq!(hungarian_max_agreement(&t).1, brute_max(&t));
        }

        #[test]
        fn relabel_with_inverse_roundtrips(seed in 0u64..1000, n in 1usize..30) {
            use rand::{seq::SliceRandom, Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut m: Vec<usize> = (0..5).collect();
            m.shuffle(&mut rng);
            let p = Permutation::new(m).unwrap();
            let l = lv(&(0..n).map(|_| rng.random_range(-1..5)).collect::<Vec<_>>());
            let back = relabel(&relabel(&l, &p).unwrap(), &p.inverse()).unwrap();
            prop_assert_eq!(back, l);
        }

        #[test]
        fn zero_distance_iff_bijective_relabeling(a in proptest::collection::vec(0i32..4, 1..30), seed in 0u64..100) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut m: Vec<usize> = (0..4).collect();
            m.shuffle(&mut rng);
            let p = Permutation::new(m).unwrap();
            let b = relabel(&lv(&a), &p).unwrap();
            prop_assert_eq!(misclassification_distance(&lv(&a), &b).unwrap().0, 0.0);
        }
    }
}
