//! Datasets, label vectors, CSV ingestion, synthetic blobs, scaling and
//! deterministic train/test and cross-validation splitting.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, domain, NumpyRandomState};
use crate::scalar::Scalar;

/// Label carried by samples that a density clusterer left unassigned.
pub const NOISE: i32 = -1;

/// One integer label per sample; `-1` marks density noise.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<i32>", into = "Vec<i32>")]
pub struct LabelVector(Vec<i32>);

impl TryFrom<Vec<i32>> for LabelVector {
    type Error = Error;

    fn try_from(labels: Vec<i32>) -> Result<Self> {
        LabelVector::new(labels)
    }
}

impl From<LabelVector> for Vec<i32> {
    fn from(l: LabelVector) -> Self {
        l.0
    }
}

impl LabelVector {
    pub fn new(labels: Vec<i32>) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l < NOISE) {
            return Err(Error::InvalidData(format!(
                "label {bad} is negative and not the noise marker -1"
            )));
        }
        Ok(Self(labels))
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(labels: I) -> Self {
        Self(labels.into_iter().map(|l| l as i32).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[i32] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = i32> + '_ {
        self.0.iter().copied()
    }

    pub fn into_inner(self) -> Vec<i32> {
        self.0
    }

    /// Distinct non-noise labels in ascending order.
    pub fn classes(&self) -> Vec<i32> {
        self.0
            .iter()
            .filter(|&&l| l != NOISE)
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Number of distinct non-noise labels.
    pub fn n_clusters(&self) -> usize {
        self.classes().len()
    }

    pub fn noise_count(&self) -> usize {
        self.0.iter().filter(|&&l| l == NOISE).count()
    }

    /// Maps non-noise labels onto `0..k` preserving their numeric order.
    pub fn compact(&self) -> LabelVector {
        let map: BTreeMap<i32, i32> = self
            .classes()
            .into_iter()
            .enumerate()
            .map(|(i, l)| (l, i as i32))
            .collect();
        Self(
            self.0
                .iter()
                .map(|l| if *l == NOISE { NOISE } else { map[l] })
                .collect(),
        )
    }

    pub fn is_compact(&self) -> bool {
        self.classes()
            .iter()
            .enumerate()
            .all(|(i, &l)| l == i as i32)
    }

    pub fn select(&self, indices: &[usize]) -> LabelVector {
        Self(indices.iter().map(|&i| self.0[i]).collect())
    }
}

impl std::ops::Index<usize> for LabelVector {
    type Output = i32;

    fn index(&self, i: usize) -> &i32 {
        &self.0[i]
    }
}

/// Row-major sample matrix with optional feature names and true labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Dataset<T> {
    values: Vec<T>,
    n_samples: usize,
    n_features: usize,
    feature_names: Option<Vec<String>>,
    true_labels: Option<LabelVector>,
    id: String,
}

impl<T: Scalar> Dataset<T> {
    /// Builds a dataset from equally long rows; requires at least two rows,
    /// one feature and only finite values.
    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let n_features = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n_features) {
            return Err(Error::InvalidData(format!(
                "row {i} has {} features, expected {n_features}",
                r.len()
            )));
        }
        let n = rows.len();
        Self::from_flat(rows.into_iter().flatten().collect(), n, n_features)
    }

    pub fn from_flat(values: Vec<T>, n_samples: usize, n_features: usize) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::InvalidData("n_features ≥ 1 violated".into()));
        }
        if n_samples < 2 {
            return Err(Error::InvalidData("n_samples ≥ 2 violated".into()));
        }
        if values.len() != n_samples * n_features {
            return Err(Error::InvalidData(format!(
                "{} values do not form a {n_samples}×{n_features} matrix",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parse {
                row: pos / n_features,
                column: pos % n_features,
                message: "non-finite value".into(),
            });
        }
        Ok(Self {
            values,
            n_samples,
            n_features,
            feature_names: None,
            true_labels: None,
            id: String::new(),
        })
    }

    pub fn with_labels(mut self, labels: LabelVector) -> Result<Self> {
        if labels.len() != self.n_samples {
            return Err(Error::LengthMismatch(labels.len(), self.n_samples));
        }
        self.true_labels = Some(labels);
        Ok(self)
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_features {
            return Err(Error::LengthMismatch(names.len(), self.n_features));
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn true_labels(&self) -> Option<&LabelVector> {
        self.true_labels.as_ref()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.values[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.values.chunks_exact(self.n_features)
    }

    /// Rows at `indices`, in that order, with matching true labels.
    ///
    /// Unlike the constructors this accepts a single row, since cross
    /// validation can produce one-sample parts on tiny inputs.
    pub fn subset(&self, indices: &[usize]) -> Dataset<T> {
        let mut values = Vec::with_capacity(indices.len() * self.n_features);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Dataset {
            values,
            n_samples: indices.len(),
            n_features: self.n_features,
            feature_names: self.feature_names.clone(),
            true_labels: self.true_labels.as_ref().map(|l| l.select(indices)),
            id: self.id.clone(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> Dataset<U> {
        Dataset {
            values: self.values.iter().map(|v| U::of(v.as_f64())).collect(),
            n_samples: self.n_samples,
            n_features: self.n_features,
            feature_names: self.feature_names.clone(),
            true_labels: self.true_labels.clone(),
            id: self.id.clone(),
        }
    }

    /// Per-feature means.
    pub fn column_means(&self) -> Vec<T> {
        let n = T::of_usize(self.n_samples);
        let mut sums = vec![T::zero(); self.n_features];
        for r in self.rows() {
            for (s, &v) in sums.iter_mut().zip(r) {
                *s = *s + v;
            }
        }
        sums.into_iter().map(|s| s / n).collect()
    }
}

fn parse_label(cell: &str, row: usize, column: usize) -> Result<i32> {
    let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
        row,
        column,
        message: format!("label `{cell}` is not numeric"),
    })?;
    if !v.is_finite() || v.fract() != 0.0 || v < f64::from(NOISE) || v > f64::from(i32::MAX) {
        return Err(Error::Parse {
            row,
            column,
            message: format!("label `{cell}` is not a non-negative integer or -1"),
        });
    }
    Ok(v as i32)
}

/// Reads a comma-separated numeric table.
///
/// `label_column` names a header column (or, without a header, gives a
/// zero-based column index) whose integer values become the true labels.
/// Row numbers in errors are 1-based file lines.
pub fn load_csv<T: Scalar>(
    path: impl AsRef<Path>,
    label_column: Option<&str>,
    has_header: bool,
) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());

    let header: Option<Vec<String>> = if has_header {
        lines
            .next()
            .map(|(_, l)| l.split(',').map(|s| s.trim().to_owned()).collect())
    } else {
        None
    };

    let label_idx = match (label_column, &header) {
        (None, _) => None,
        (Some(name), Some(h)) => Some(
            h.iter()
                .position(|c| c == name)
                .ok_or_else(|| Error::MissingColumn(name.to_owned()))?,
        ),
        (Some(name), None) => Some(
            name.parse::<usize>()
                .map_err(|_| Error::MissingColumn(name.to_owned()))?,
        ),
    };

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut n_cols = header.as_ref().map(Vec::len);
    let mut n_rows = 0;
    for (line_no, line) in lines {
        let row = line_no + 1;
        let cells: Vec<&str> = line.split(',').collect();
        let expected = *n_cols.get_or_insert(cells.len());
        if cells.len() != expected {
            return Err(Error::Parse {
                row,
                column: cells.len().min(expected),
                message: format!("expected {expected} columns, found {}", cells.len()),
            });
        }
        if let Some(li) = label_idx {
            if li >= cells.len() {
                return Err(Error::MissingColumn(li.to_string()));
            }
        }
        for (c, cell) in cells.iter().enumerate() {
            if Some(c) == label_idx {
                labels.push(parse_label(cell, row, c + 1)?);
                continue;
            }
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                row,
                column: c + 1,
                message: format!("`{cell}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: c + 1,
                    message: format!("`{cell}` is not finite"),
                });
            }
            values.push(T::of(v));
        }
        n_rows += 1;
    }

    let n_features = n_cols.unwrap_or(0) - usize::from(label_idx.is_some());
    let mut ds = Dataset::from_flat(values, n_rows, n_features)?;
    if let Some(h) = header {
        let names = h
            .into_iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != label_idx)
            .map(|(_, n)| n)
            .collect();
        ds = ds.with_feature_names(names)?;
    }
    if label_idx.is_some() {
        ds = ds.with_labels(LabelVector::new(labels)?)?;
    }
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(ds.with_id(id))
}

/// Writes the dataset in the dialect read by [`load_csv`], with a header and
/// a trailing `label` column when true labels are present. Values use the
/// shortest representation that round-trips.
pub fn write_csv<T: Scalar>(data: &Dataset<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    let names: Vec<String> = match data.feature_names() {
        Some(n) => n.to_vec(),
        None => (0..data.n_features()).map(|i| format!("x{i}")).collect(),
    };
    out.push_str(&names.join(","));
    if data.true_labels().is_some() {
        out.push_str(",label");
    }
    out.push('\n');
    for (i, r) in data.rows().enumerate() {
        for (j, v) in r.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v}");
        }
        if let Some(l) = data.true_labels() {
            let _ = write!(out, ",{}", l[i]);
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

/// Blob centers: either explicit coordinates or a count drawn uniformly
/// from `center_box`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Centers {
    Count(usize),
    Points(Vec<Vec<f64>>),
}

/// Parameters of an isotropic Gaussian blob dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlobsSpec {
    pub n_samples: usize,
    pub n_features: usize,
    pub centers: Centers,
    #[serde(default = "BlobsSpec::default_std")]
    pub cluster_std: f64,
    #[serde(default = "BlobsSpec::default_box")]
    pub center_box: (f64, f64),
    #[serde(default)]
    pub seed: u64,
}

impl BlobsSpec {
    fn default_std() -> f64 {
        1.0
    }

    fn default_box() -> (f64, f64) {
        (-10.0, 10.0)
    }

    /// The five-blob fixture: 1000 samples, 2 features, centers drawn in
    /// (-20, 20), unit standard deviation, seed 42.
    pub fn five_blobs() -> Self {
        Self {
            n_samples: 1000,
            n_features: 2,
            centers: Centers::Count(5),
            cluster_std: 1.0,
            center_box: (-20.0, 20.0),
            seed: 42,
        }
    }
}

/// Isotropic Gaussian blobs, sample-for-sample identical to
/// scikit-learn's `make_blobs` under the same integer seed.
///
/// Samples are divided among centers as evenly as possible (the first
/// `n % centers` centers get one extra), generated center by center and then
/// shuffled. True labels are the generating center index.
pub fn make_blobs<T: Scalar>(spec: &BlobsSpec) -> Result<Dataset<T>> {
    if !(spec.cluster_std >= 0.0 && spec.cluster_std.is_finite()) {
        return Err(Error::InvalidParameter("cluster_std must be ≥ 0".into()));
    }
    let seed = u32::try_from(spec.seed)
        .map_err(|_| Error::InvalidParameter("blob seed must fit in 32 bits".into()))?;
    let mut rs = NumpyRandomState::new(seed);

    let centers: Vec<Vec<f64>> = match &spec.centers {
        Centers::Count(c) => {
            let (lo, hi) = spec.center_box;
            (0..*c)
                .map(|_| (0..spec.n_features).map(|_| rs.uniform(lo, hi)).collect())
                .collect()
        }
        Centers::Points(p) => p.clone(),
    };
    let n_centers = centers.len();
    if n_centers == 0 {
        return Err(Error::InvalidParameter(
            "at least one center required".into(),
        ));
    }
    let n_features = centers[0].len();
    if centers.iter().any(|c| c.len() != n_features) || n_features != spec.n_features {
        return Err(Error::InvalidParameter(format!(
            "centers must all have {} coordinates",
            spec.n_features
        )));
    }
    if spec.n_samples < n_centers {
        return Err(Error::InvalidParameter(format!(
            "{} samples cannot cover {n_centers} centers",
            spec.n_samples
        )));
    }

    let base = spec.n_samples / n_centers;
    let extra = spec.n_samples % n_centers;
    let mut values = Vec::with_capacity(spec.n_samples * n_features);
    let mut labels = Vec::with_capacity(spec.n_samples);
    for (ci, center) in centers.iter().enumerate() {
        let count = base + usize::from(ci < extra);
        for _ in 0..count {
            for &loc in center {
                values.push(rs.normal(loc, spec.cluster_std));
            }
            labels.push(ci as i32);
        }
    }

    let mut order: Vec<usize> = (0..spec.n_samples).collect();
    rs.shuffle(&mut order);
    let mut shuffled = Vec::with_capacity(values.len());
    for &i in &order {
        shuffled.extend(
            values[i * n_features..(i + 1) * n_features]
                .iter()
                .map(|&v| T::of(v)),
        );
    }
    let labels = LabelVector::new(order.iter().map(|&i| labels[i]).collect())?;
    Ok(Dataset::from_flat(shuffled, spec.n_samples, n_features)?
        .with_labels(labels)?
        .with_id("blobs"))
}

/// Statistics fitted by [`standard_scale`]; apply them to held-out data with
/// [`Scaler::transform`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Scaler<T> {
    pub mean: Vec<T>,
    /// Population standard deviation; 1 for zero-variance features.
    pub scale: Vec<T>,
    pub zero_variance: Vec<bool>,
}

impl<T: Scalar> Scaler<T> {
    pub fn fit(data: &Dataset<T>) -> Self {
        let mean = data.column_means();
        let n = T::of_usize(data.n_samples());
        let mut var = vec![T::zero(); data.n_features()];
        for r in data.rows() {
            for ((v, &x), &m) in var.iter_mut().zip(r).zip(&mean) {
                *v = *v + (x - m) * (x - m);
            }
        }
        let mut zero_variance = Vec::with_capacity(var.len());
        let scale = var
            .into_iter()
            .map(|v| {
                let sd = (v / n).sqrt();
                let degenerate = !(sd > T::epsilon() * T::of(10.0));
                zero_variance.push(degenerate);
                if degenerate {
                    T::one()
                } else {
                    sd
                }
            })
            .collect();
        Self {
            mean,
            scale,
            zero_variance,
        }
    }

    pub fn transform(&self, data: &Dataset<T>) -> Result<Dataset<T>> {
        if data.n_features() != self.mean.len() {
            return Err(Error::FeatureMismatch {
                expected: self.mean.len(),
                found: data.n_features(),
            });
        }
        let mut out = data.clone();
        let p = self.mean.len();
        for (i, v) in out.values.iter_mut().enumerate() {
            let j = i % p;
            *v = (*v - self.mean[j]) / self.scale[j];
        }
        Ok(out)
    }
}

/// Centers every feature and divides by its population standard deviation.
/// Constant features are only centered and flagged in the returned scaler.
pub fn standard_scale<T: Scalar>(data: &Dataset<T>) -> (Dataset<T>, Scaler<T>) {
    let scaler = Scaler::fit(data);
    let scaled = scaler
        .transform(data)
        .expect("scaler fitted on the same feature count");
    (scaled, scaler)
}

/// Train/test partition of sample indices. Serializes as
/// `{"seed":…, "train":[…], "test":[…]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    #[serde(skip)]
    pub stratifier: Option<LabelVector>,
}

/// Number of test samples for `fraction` of `n`, rounded up like
/// scikit-learn (after trimming float noise).
fn test_count(n: usize, fraction: f64) -> usize {
    let raw = fraction * n as f64;
    let rounded = (raw * 1e9).round() / 1e9;
    rounded.ceil() as usize
}

/// Allocates `total` draws across strata by largest remainder; remainder
/// ties go to the stratum with the smaller label.
fn stratum_quotas(sizes: &[usize], fraction: f64, total: usize) -> Vec<usize> {
    let ideal: Vec<f64> = sizes.iter().map(|&s| s as f64 * fraction).collect();
    let mut quota: Vec<usize> = ideal.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = quota.iter().sum();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = ideal[a] - ideal[a].floor();
        let rb = ideal[b] - ideal[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    let mut remaining = total.saturating_sub(assigned);
    for &s in order.iter().cycle().take(order.len() * 2) {
        if remaining == 0 {
            break;
        }
        if quota[s] < sizes[s] {
            quota[s] += 1;
            remaining -= 1;
        }
    }
    quota
}

/// Groups sample indices by stratum label, in ascending label order.
fn strata(stratifier: &LabelVector) -> Vec<Vec<usize>> {
    let mut groups: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for (i, l) in stratifier.iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }
    groups.into_values().collect()
}

/// Shuffled hold-out split, optionally stratified.
///
/// The test part has `ceil(test_fraction · n)` samples. With a stratifier,
/// each stratum contributes its proportional share rounded by largest
/// remainder, so no stratum deviates from its global proportion by more than
/// one sample. Index lists are returned in ascending order.
pub fn train_test_split<T: Scalar>(
    data: &Dataset<T>,
    test_fraction: f64,
    seed: u64,
    stratifier: Option<&LabelVector>,
) -> Result<(SplitPlan, Dataset<T>, Dataset<T>)> {
    let n = data.n_samples();
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParameter(
            "test_fraction must lie in (0, 1)".into(),
        ));
    }
    let n_test = test_count(n, test_fraction);
    if n_test == 0 || n_test >= n {
        return Err(Error::InvalidParameter(format!(
            "test_fraction {test_fraction} on {n} samples leaves an empty part"
        )));
    }
    let mut rng = rng::stream(seed, &[domain::SPLIT]);
    let mut test = Vec::with_capacity(n_test);
    match stratifier {
        None => {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            test.extend_from_slice(&perm[..n_test]);
        }
        Some(s) => {
            if s.len() != n {
                return Err(Error::LengthMismatch(s.len(), n));
            }
            let mut groups = strata(s);
            let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
            let quotas = stratum_quotas(&sizes, test_fraction, n_test);
            for (g, q) in groups.iter_mut().zip(quotas) {
                g.shuffle(&mut rng);
                test.extend_from_slice(&g[..q]);
            }
        }
    }
    test.sort_unstable();
    let mut in_test = vec![false; n];
    for &i in &test {
        in_test[i] = true;
    }
    let train: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
    let plan = SplitPlan {
        seed,
        train,
        test,
        stratifier: stratifier.cloned(),
    };
    let tr = data.subset(&plan.train);
    let ts = data.subset(&plan.test);
    Ok((plan, tr, ts))
}

/// Repeated cross-validation design: `n_fold` folds × `n_rep` repetitions
/// for each candidate `k`, with `n_rnd` random labelings per cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvGrid {
    #[serde(default = "CvGrid::default_n_fold")]
    pub n_fold: usize,
    #[serde(default = "CvGrid::default_n_rep")]
    pub n_rep: usize,
    /// Candidate cluster counts; empty for auto-k clusterers.
    #[serde(default)]
    pub k_values: Vec<usize>,
    #[serde(default = "CvGrid::default_n_rnd")]
    pub n_rnd: usize,
    #[serde(default)]
    pub base_seed: u64,
}

impl Default for CvGrid {
    fn default() -> Self {
        Self {
            n_fold: Self::default_n_fold(),
            n_rep: Self::default_n_rep(),
            k_values: Vec::new(),
            n_rnd: Self::default_n_rnd(),
            base_seed: 0,
        }
    }
}

impl CvGrid {
    fn default_n_fold() -> usize {
        2
    }

    fn default_n_rep() -> usize {
        1
    }

    fn default_n_rnd() -> usize {
        10
    }

    pub fn new(
        n_fold: usize,
        n_rep: usize,
        k_values: Vec<usize>,
        n_rnd: usize,
        base_seed: u64,
    ) -> Self {
        Self {
            n_fold,
            n_rep,
            k_values,
            n_rnd,
            base_seed,
        }
    }

    /// Checks the grid against a training set of `n` samples.
    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n_fold < 2 {
            return bad("n_fold must be ≥ 2".into());
        }
        if self.n_rep < 1 || self.n_rnd < 1 {
            return bad("n_rep and n_rnd must be ≥ 1".into());
        }
        if self.n_fold > n {
            return bad(format!(
                "n_fold {} exceeds {n} training samples",
                self.n_fold
            ));
        }
        if self.k_values.windows(2).any(|w| w[0] >= w[1]) {
            return bad("k_values must be strictly increasing".into());
        }
        let k_max = n * (self.n_fold - 1) / self.n_fold;
        if let Some(&k) = self.k_values.iter().find(|&&k| k < 2 || k > k_max) {
            return bad(format!(
                "k={k} outside 2..={k_max} for n={n}, n_fold={}",
                self.n_fold
            ));
        }
        Ok(())
    }
}

/// One cross-validation fold: inner-train and validation index lists, both
/// ascending.
pub type Fold = (Vec<usize>, Vec<usize>);

/// Folds of repetition `rep`.
///
/// The shuffle is seeded by `(base_seed, rep)`, so repetitions differ while
/// the whole grid stays reproducible. Without a stratifier the shuffled
/// order is cut into contiguous folds (the first `n % n_fold` folds take one
/// extra sample). With a stratifier, strata are shuffled independently,
/// concatenated in label order and dealt round-robin to folds.
pub fn cv_folds(
    n: usize,
    grid: &CvGrid,
    rep: usize,
    stratifier: Option<&LabelVector>,
) -> Result<Vec<Fold>> {
    let k = grid.n_fold;
    if k < 2 {
        return Err(Error::InvalidParameter("n_fold must be ≥ 2".into()));
    }
    if k > n {
        return Err(Error::InvalidParameter(format!(
            "n_fold {k} exceeds {n} samples"
        )));
    }
    if rep >= grid.n_rep {
        return Err(Error::InvalidParameter(format!(
            "rep {rep} ≥ n_rep {}",
            grid.n_rep
        )));
    }
    let mut rng = rng::stream(grid.base_seed, &[domain::FOLDS, rep as u64]);
    let mut fold_of = vec![0usize; n];
    match stratifier {
        None => {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let (base, extra) = (n / k, n % k);
            let mut pos = 0;
            for f in 0..k {
                let size = base + usize::from(f < extra);
                for &i in &perm[pos..pos + size] {
                    fold_of[i] = f;
                }
                pos += size;
            }
        }
        Some(s) => {
            if s.len() != n {
                return Err(Error::LengthMismatch(s.len(), n));
            }
            let mut pos = 0;
            for mut g in strata(s) {
                g.shuffle(&mut rng);
                for i in g {
                    fold_of[i] = pos % k;
                    pos += 1;
                }
            }
        }
    }
    Ok((0..k)
        .map(|f| {
            let (val, tr): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| fold_of[i] == f);
            (tr, val)
        })
        .collect())
}
