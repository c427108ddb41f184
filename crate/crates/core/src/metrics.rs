//! External agreement scores (accuracy, MCC, macro precision/recall/F1,
//! AMI) and internal validity indices (silhouette, Davies-Bouldin).
//!
//! External scores treat every distinct label, noise included, as its own
//! category. Degenerate inputs produce a pinned value with `degenerate` set
//! instead of an error, so a single odd CV fold cannot abort a run.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::clustering::ClustererConfig;
use crate::data::{Dataset, LabelVector};
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::{euclidean, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub value: f64,
    pub degenerate: bool,
}

impl Score {
    fn ok(value: f64) -> Self {
        Self {
            value,
            degenerate: false,
        }
    }

    fn flagged(value: f64) -> Self {
        Self {
            value,
            degenerate: true,
        }
    }
}

/// Dense confusion counts over the union of labels in `a` (rows) and `b`.
fn confusion(a: &LabelVector, b: &LabelVector) -> Result<Vec<Vec<f64>>> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let mut ids: Vec<i32> = a.iter().chain(b.iter()).collect();
    ids.sort_unstable();
    ids.dedup();
    let idx = |l: i32| ids.binary_search(&l).unwrap();
    let mut c = vec![vec![0.0; ids.len()]; ids.len()];
    for (x, y) in a.iter().zip(b.iter()) {
        c[idx(x)][idx(y)] += 1.0;
    }
    Ok(c)
}

/// Separate category indices for each side, for measures where the two
/// label sets are unrelated.
fn contingency(a: &LabelVector, b: &LabelVector) -> Result<Vec<Vec<f64>>> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let encode = |v: &LabelVector| {
        let mut ids: Vec<i32> = v.iter().collect();
        ids.sort_unstable();
        ids.dedup();
        let codes: Vec<usize> = v.iter().map(|l| ids.binary_search(&l).unwrap()).collect();
        (ids.len(), codes)
    };
    let (ra, ca) = encode(a);
    let (rb, cb) = encode(b);
    let mut t = vec![vec![0.0; rb]; ra];
    for (i, j) in ca.into_iter().zip(cb) {
        t[i][j] += 1.0;
    }
    Ok(t)
}

/// Fraction of positions where the labels agree.
pub fn accuracy(a: &LabelVector, b: &LabelVector) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::InvalidData("accuracy of zero samples".into()));
    }
    Ok(a.iter().zip(b.iter()).filter(|(x, y)| x == y).count() as f64 / a.len() as f64)
}

/// Multiclass Matthews correlation. A constant side gives 0, flagged.
pub fn mcc(a: &LabelVector, b: &LabelVector) -> Result<Score> {
    let c = confusion(a, b)?;
    let k = c.len();
    let s: f64 = c.iter().flatten().sum();
    let trace: f64 = (0..k).map(|i| c[i][i]).sum();
    let t: Vec<f64> = c.iter().map(|r| r.iter().sum()).collect();
    let p: Vec<f64> = (0..k).map(|j| c.iter().map(|r| r[j]).sum()).collect();
    let tp: f64 = t.iter().zip(&p).map(|(x, y)| x * y).sum();
    let tt: f64 = t.iter().map(|x| x * x).sum();
    let pp: f64 = p.iter().map(|x| x * x).sum();
    let denom = ((s * s - pp) * (s * s - tt)).sqrt();
    if denom == 0.0 {
        return Ok(Score::flagged(0.0));
    }
    Ok(Score::ok((trace * s - tp) / denom))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Unweighted one-vs-rest averages over every label in either input, with
/// `truth` first. Undefined ratios count as 0.
pub fn precision_recall_f1(truth: &LabelVector, pred: &LabelVector) -> Result<MacroScores> {
    let c = confusion(truth, pred)?;
    let k = c.len();
    if k == 0 {
        return Err(Error::InvalidData("scores of zero samples".into()));
    }
    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    let (mut ps, mut rs, mut fs) = (0.0, 0.0, 0.0);
    for i in 0..k {
        let tp = c[i][i];
        let pred_i: f64 = c.iter().map(|r| r[i]).sum();
        let true_i: f64 = c[i].iter().sum();
        let p = ratio(tp, pred_i);
        let r = ratio(tp, true_i);
        ps += p;
        rs += r;
        fs += ratio(2.0 * p * r, p + r);
    }
    let k = k as f64;
    Ok(MacroScores {
        precision: ps / k,
        recall: rs / k,
        f1: fs / k,
    })
}

fn entropy(counts: &[f64], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / n;
            -p * p.ln()
        })
        .sum()
}

/// Expected mutual information under the hypergeometric model for fixed
/// marginals `a`, `b` summing to `n`. `lnf[i]` must hold `ln i!`.
fn expected_mutual_info(a: &[f64], b: &[f64], n: usize, lnf: &[f64]) -> f64 {
    let nf = n as f64;
    let mut emi = 0.0;
    for &ai in a {
        let ai_u = ai as usize;
        for &bj in b {
            let bj_u = bj as usize;
            let lo = (ai_u + bj_u).saturating_sub(n).max(1);
            let hi = ai_u.min(bj_u);
            let fixed = lnf[ai_u] + lnf[bj_u] + lnf[n - ai_u] + lnf[n - bj_u] - lnf[n];
            for nij in lo..=hi {
                let x = nij as f64;
                let term = (x / nf) * (nf * x / (ai * bj)).ln();
                let ln_p = fixed
                    - lnf[nij]
                    - lnf[ai_u - nij]
                    - lnf[bj_u - nij]
                    - lnf[n + nij - ai_u - bj_u];
                emi += term * ln_p.exp();
            }
        }
    }
    emi
}

/// Adjusted mutual information with the arithmetic mean of entropies as
/// normalizer. When the normalizer equals E\[MI\] the value is 1 for
/// identical partitions and 0 otherwise, flagged.
pub fn ami(a: &LabelVector, b: &LabelVector) -> Result<Score> {
    let t = contingency(a, b)?;
    let n = a.len();
    if n == 0 {
        return Err(Error::InvalidData("AMI of zero samples".into()));
    }
    let nf = n as f64;
    let ra: Vec<f64> = t.iter().map(|r| r.iter().sum()).collect();
    let cb: Vec<f64> = (0..t[0].len())
        .map(|j| t.iter().map(|r| r[j]).sum())
        .collect();
    let mut mi = 0.0;
    for (i, row) in t.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij > 0.0 {
                mi += nij / nf * (nf * nij / (ra[i] * cb[j])).ln();
            }
        }
    }
    let mut lnf = vec![0.0; n + 1];
    for i in 1..=n {
        lnf[i] = lnf[i - 1] + (i as f64).ln();
    }
    let emi = expected_mutual_info(&ra, &cb, n, &lnf);
    let norm = 0.5 * (entropy(&ra, nf) + entropy(&cb, nf));
    let denom = norm - emi;
    let identical = t
        .iter()
        .all(|r| r.iter().filter(|&&c| c > 0.0).count() == 1)
        && (0..cb.len()).all(|j| t.iter().filter(|r| r[j] > 0.0).count() == 1);
    if denom.abs() < 1e-15 {
        return Ok(Score::flagged(if identical { 1.0 } else { 0.0 }));
    }
    if identical {
        return Ok(Score::ok(1.0));
    }
    Ok(Score::ok((mi - emi) / denom))
}

/// Groups sample indices by compacted label; errors on noise or fewer than
/// two clusters.
fn clusters_of(labels: &LabelVector, n: usize) -> Result<Vec<Vec<usize>>> {
    if labels.len() != n {
        return Err(Error::LengthMismatch(labels.len(), n));
    }
    if labels.noise_count() > 0 {
        return Err(Error::InvalidData(
            "internal indices need noise-free labels".into(),
        ));
    }
    let compact = labels.compact();
    let k = compact.n_clusters();
    if k < 2 {
        return Err(Error::TooFewClusters {
            found: k,
            side: "scored",
        });
    }
    let mut groups = vec![Vec::new(); k];
    for (i, l) in compact.iter().enumerate() {
        groups[l as usize].push(i);
    }
    Ok(groups)
}

/// Mean silhouette width over all samples with exact pairwise Euclidean
/// distances. Samples in singleton clusters score 0.
pub fn silhouette<T: Scalar>(data: &Dataset<T>, labels: &LabelVector) -> Result<f64> {
    let n = data.n_samples();
    let groups = clusters_of(labels, n)?;
    let compact = labels.compact();
    let k = groups.len();
    let mut total = 0.0;
    let mut sums = vec![0.0; k];
    for i in 0..n {
        let own = compact[i] as usize;
        if groups[own].len() == 1 {
            continue;
        }
        sums.iter_mut().for_each(|s| *s = 0.0);
        let xi = data.row(i);
        for j in 0..n {
            sums[compact[j] as usize] += euclidean(xi, data.row(j)).as_f64();
        }
        let a = sums[own] / (groups[own].len() - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own)
            .map(|c| sums[c] / groups[c].len() as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    Ok(total / n as f64)
}

/// Davies-Bouldin index. Coincident centroids give +∞, flagged.
pub fn davies_bouldin<T: Scalar>(data: &Dataset<T>, labels: &LabelVector) -> Result<Score> {
    let groups = clusters_of(labels, data.n_samples())?;
    let p = data.n_features();
    let centroids: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| {
            let mut c = vec![0.0; p];
            for &i in g {
                for (cj, &x) in c.iter_mut().zip(data.row(i)) {
                    *cj += x.as_f64();
                }
            }
            c.iter_mut().for_each(|v| *v /= g.len() as f64);
            c
        })
        .collect();
    let dist = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    };
    let spread: Vec<f64> = groups
        .iter()
        .zip(&centroids)
        .map(|(g, c)| {
            g.iter()
                .map(|&i| {
                    let row: Vec<f64> = data.row(i).iter().map(|v| v.as_f64()).collect();
                    dist(&row, c)
                })
                .sum::<f64>()
                / g.len() as f64
        })
        .collect();
    let k = groups.len();
    let mut total = 0.0;
    for i in 0..k {
        let mut worst = f64::NEG_INFINITY;
        for j in (0..k).filter(|&j| j != i) {
            let d = dist(&centroids[i], &centroids[j]);
            if d == 0.0 {
                return Ok(Score::flagged(f64::INFINITY));
            }
            worst = worst.max((spread[i] + spread[j]) / d);
        }
        total += worst;
    }
    Ok(Score::ok(total / k as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InternalScores {
    pub silhouette: f64,
    pub davies_bouldin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InternalSweep {
    pub per_k: BTreeMap<usize, InternalScores>,
    /// Maximizes silhouette; the smaller k wins ties.
    pub best_silhouette_k: usize,
    /// Minimizes Davies-Bouldin; the smaller k wins ties.
    pub best_db_k: usize,
}

/// Refits `clusterer` at every k and scores both internal indices.
pub fn internal_sweep<T: Scalar>(
    data: &Dataset<T>,
    clusterer: &ClustererConfig,
    k_values: &[usize],
    seed: u64,
) -> Result<InternalSweep> {
    if k_values.is_empty() {
        return Err(Error::InvalidParameter(
            "internal sweep needs at least one k".into(),
        ));
    }
    let mut per_k = BTreeMap::new();
    for &k in k_values {
        let fit = clusterer.fit(data, Some(k), rng::derive_seed(seed, &[k as u64]))?;
        per_k.insert(
            k,
            InternalScores {
                silhouette: silhouette(data, &fit.labels)?,
                davies_bouldin: davies_bouldin(data, &fit.labels)?.value,
            },
        );
    }
    let pick = |better: fn(f64, f64) -> bool, get: fn(&InternalScores) -> f64| {
        per_k
            .iter()
            .fold(None::<(usize, f64)>, |best, (&k, s)| match best {
                Some((_, v)) if !better(get(s), v) => best,
                _ => Some((k, get(s))),
            })
            .unwrap()
            .0
    };
    Ok(InternalSweep {
        best_silhouette_k: pick(|a, b| a > b, |s| s.silhouette),
        best_db_k: pick(|a, b| a < b, |s| s.davies_bouldin),
        per_k,
    })
}
