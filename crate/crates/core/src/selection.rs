//! Choosing k by repeated cross-validation and scoring the choice on
//! held-out data.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::{misclassification_distance, relabel, Permutation};
use crate::classification::{ClassifierConfig, TrainedClassifier};
use crate::clustering::ClustererConfig;
use crate::data::{cv_folds, CvGrid, Dataset, Fold, LabelVector, NOISE};
use crate::error::{Error, Result};
use crate::metrics;
use crate::rng::{self, domain};
use crate::scalar::Scalar;
use crate::stability::{fit_cell_classifier, stability_cell, StabilityCell};

/// Means closer than this are tied; ties go to the larger k.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    FixedK,
    AutoK,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSummary {
    /// Mean over repetitions of the per-repetition mean over folds.
    pub mean_norm: f64,
    /// Sample standard deviation of the cell values.
    pub sd: f64,
    /// `mean ± 1.96·sd/√n_cells`.
    pub ci95: (f64, f64),
    pub mean_train: f64,
    pub mean_raw: f64,
    pub cells: Vec<StabilityCell>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectedCell {
    pub rep: usize,
    pub fold: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCell {
    pub rep: usize,
    pub fold: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityResult {
    pub mode: Mode,
    pub per_k: BTreeMap<usize, KSummary>,
    pub k_star: usize,
    /// Auto-k only: the lowest-stability cell of the chosen group, whose
    /// fold-trained classifier is reused on the test set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected_cell: Option<SelectedCell>,
    /// Auto-k only: cells that found fewer than two clusters.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<SkippedCell>,
}

/// Largest key whose value is within [`TIE_TOLERANCE`] of the minimum.
pub fn max_argmin(means: impl IntoIterator<Item = (usize, f64)>) -> Option<usize> {
    let means: Vec<(usize, f64)> = means.into_iter().collect();
    let min = means.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
    means
        .iter()
        .filter(|m| m.1 <= min + TIE_TOLERANCE)
        .map(|m| m.0)
        .max()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Mean over repetitions of the within-repetition mean; `cells` must be in
/// canonical (rep, fold) order.
fn nested_mean(cells: &[StabilityCell], value: fn(&StabilityCell) -> f64) -> f64 {
    let mut per_rep = Vec::new();
    let mut start = 0;
    while start < cells.len() {
        let rep = cells[start].rep;
        let end = start + cells[start..].iter().take_while(|c| c.rep == rep).count();
        per_rep.push(mean(
            &cells[start..end].iter().map(value).collect::<Vec<_>>(),
        ));
        start = end;
    }
    mean(&per_rep)
}

fn summarize(mut cells: Vec<StabilityCell>) -> KSummary {
    cells.sort_by_key(|c| (c.rep, c.fold));
    let mean_norm = nested_mean(&cells, |c| c.normalized);
    let n = cells.len() as f64;
    let sd = if cells.len() > 1 {
        let flat = mean(&cells.iter().map(|c| c.normalized).collect::<Vec<_>>());
        (cells
            .iter()
            .map(|c| (c.normalized - flat).powi(2))
            .sum::<f64>()
            / (n - 1.0))
            .sqrt()
    } else {
        0.0
    };
    let half = 1.96 * sd / n.sqrt();
    KSummary {
        mean_norm,
        sd,
        ci95: (mean_norm - half, mean_norm + half),
        mean_train: nested_mean(&cells, |c| c.train_distance),
        mean_raw: nested_mean(&cells, |c| c.raw_distance),
        cells,
    }
}

impl StabilityResult {
    /// Groups cells by `k`, aggregates each group and applies the
    /// max-argmin rule. In auto-k mode the selected cell is recorded.
    pub fn from_cells(mode: Mode, cells: Vec<StabilityCell>) -> Result<Self> {
        let mut groups: BTreeMap<usize, Vec<StabilityCell>> = BTreeMap::new();
        for c in cells {
            groups.entry(c.k).or_default().push(c);
        }
        let per_k: BTreeMap<usize, KSummary> =
            groups.into_iter().map(|(k, v)| (k, summarize(v))).collect();
        let k_star =
            max_argmin(per_k.iter().map(|(&k, s)| (k, s.mean_norm))).ok_or(match mode {
                Mode::AutoK => Error::NoAutoKGroup,
                Mode::FixedK => Error::InvalidParameter("no stability cells".into()),
            })?;
        let selected_cell = (mode == Mode::AutoK).then(|| {
            let best = per_k[&k_star]
                .cells
                .iter()
                .fold(None::<&StabilityCell>, |acc, c| match acc {
                    Some(b) if b.normalized <= c.normalized => Some(b),
                    _ => Some(c),
                })
                .expect("groups are non-empty");
            SelectedCell {
                rep: best.rep,
                fold: best.fold,
                seed: best.seed,
            }
        });
        Ok(Self {
            mode,
            per_k,
            k_star,
            selected_cell,
            skipped: Vec::new(),
        })
    }
}

/// Seed of the cell at `(k, rep, fold)`; `k` is 0 for auto-k runs.
pub fn cell_seed(base: u64, k: usize, rep: usize, fold: usize) -> u64 {
    rng::derive_seed(base, &[k as u64, rep as u64, fold as u64])
}

fn all_folds(n: usize, grid: &CvGrid, stratifier: Option<&LabelVector>) -> Result<Vec<Vec<Fold>>> {
    (0..grid.n_rep)
        .map(|rep| cv_folds(n, grid, rep, stratifier))
        .collect()
}

fn check_inputs<T: Scalar>(
    train: &Dataset<T>,
    clusterer: &ClustererConfig,
    classifier: &ClassifierConfig,
    grid: &CvGrid,
    stratifier: Option<&LabelVector>,
) -> Result<()> {
    clusterer.validate()?;
    classifier.validate()?;
    grid.validate(train.n_samples())?;
    if let Some(s) = stratifier {
        if s.len() != train.n_samples() {
            return Err(Error::LengthMismatch(s.len(), train.n_samples()));
        }
    }
    Ok(())
}

struct Task {
    k: Option<usize>,
    rep: usize,
    fold: usize,
}

fn run_cell<T: Scalar>(
    train: &Dataset<T>,
    folds: &[Vec<Fold>],
    clusterer: &ClustererConfig,
    classifier: &ClassifierConfig,
    grid: &CvGrid,
    t: &Task,
) -> Result<StabilityCell> {
    let (itr, val) = &folds[t.rep][t.fold];
    let seed = cell_seed(grid.base_seed, t.k.unwrap_or(0), t.rep, t.fold);
    let mut cell = stability_cell(
        &train.subset(itr),
        &train.subset(val),
        clusterer,
        classifier,
        t.k,
        grid.n_rnd,
        seed,
    )?;
    cell.rep = t.rep;
    cell.fold = t.fold;
    Ok(cell)
}

/// Evaluates every `(k, rep, fold)` cell and returns the per-k summary with
/// `k*` the largest minimizer of mean normalized stability.
///
/// Cells run on the current rayon pool (see [`with_workers`]). Each cell's
/// seed depends only on `(base_seed, k, rep, fold)`, so the result is
/// identical for any worker count.
pub fn best_nclust_cv<T: Scalar>(
    train: &Dataset<T>,
    clusterer: &ClustererConfig,
    classifier: &ClassifierConfig,
    grid: &CvGrid,
    stratifier: Option<&LabelVector>,
) -> Result<StabilityResult> {
    check_inputs(train, clusterer, classifier, grid, stratifier)?;
    if clusterer.is_auto_k() {
        return Err(Error::InvalidParameter(format!(
            "{} picks k itself; use the auto-k selection",
            clusterer.name()
        )));
    }
    if grid.k_values.is_empty() {
        return Err(Error::InvalidParameter("k_values must not be empty".into()));
    }
    let folds = all_folds(train.n_samples(), grid, stratifier)?;
    let tasks: Vec<Task> = grid
        .k_values
        .iter()
        .flat_map(|&k| {
            (0..grid.n_rep).flat_map(move |rep| {
                (0..grid.n_fold).map(move |fold| Task {
                    k: Some(k),
                    rep,
                    fold,
                })
            })
        })
        .collect();
    let results: Vec<Result<StabilityCell>> = tasks
        .par_iter()
        .map(|t| run_cell(train, &folds, clusterer, classifier, grid, t))
        .collect();
    let mut cells = Vec::with_capacity(results.len());
    for (t, r) in tasks.iter().zip(results) {
        cells.push(r.map_err(|e| Error::Cell {
            k: t.k,
            fold: t.fold,
            rep: t.rep,
            source: Box::new(e),
        })?);
    }
    StabilityResult::from_cells(Mode::FixedK, cells)
}

/// Auto-k selection: one cell per `(rep, fold)`, grouped by the number of
/// clusters found on inner-train. Cells finding fewer than two clusters, or
/// only noise on validation, are skipped and listed.
pub fn best_nclust_cv_auto<T: Scalar>(
    train: &Dataset<T>,
    clusterer: &ClustererConfig,
    classifier: &ClassifierConfig,
    grid: &CvGrid,
    stratifier: Option<&LabelVector>,
) -> Result<StabilityResult> {
    check_inputs(train, clusterer, classifier, grid, stratifier)?;
    if !clusterer.is_auto_k() {
        return Err(Error::InvalidParameter(format!(
            "{} needs candidate k values",
            clusterer.name()
        )));
    }
    if !grid.k_values.is_empty() {
        return Err(Error::InvalidParameter(
            "k_values must be empty for auto-k".into(),
        ));
    }
    let folds = all_folds(train.n_samples(), grid, stratifier)?;
    let tasks: Vec<Task> = (0..grid.n_rep)
        .flat_map(|rep| (0..grid.n_fold).map(move |fold| Task { k: None, rep, fold }))
        .collect();
    let results: Vec<Result<StabilityCell>> = tasks
        .par_iter()
        .map(|t| run_cell(train, &folds, clusterer, classifier, grid, t))
        .collect();
    let mut cells = Vec::new();
    let mut skipped = Vec::new();
    for (t, r) in tasks.iter().zip(results) {
        match r {
            Ok(c) => cells.push(c),
            Err(e @ (Error::TooFewClusters { .. } | Error::AllNoise)) => {
                skipped.push(SkippedCell {
                    rep: t.rep,
                    fold: t.fold,
                    reason: e.to_string(),
                })
            }
            Err(e) => {
                return Err(Error::Cell {
                    k: None,
                    fold: t.fold,
                    rep: t.rep,
                    source: Box::new(e),
                })
            }
        }
    }
    let mut result = StabilityResult::from_cells(Mode::AutoK, cells)?;
    result.skipped = skipped;
    Ok(result)
}

/// Runs `f` on a dedicated pool of `workers` threads; 0 uses rayon's
/// default size.
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub acc: f64,
    pub mcc: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub mcc_degenerate: bool,
    pub f1_macro: f64,
    pub precision_macro: f64,
    pub recall_macro: f64,
    /// True test labels against classifier predictions.
    pub ami: Option<f64>,
    /// True test labels against the independent test clustering.
    pub ami_clustering: Option<f64>,
    /// Accuracy of the predictions against true labels after optimal
    /// relabeling.
    pub acc_true: Option<f64>,
    /// MCC of the relabeled predictions against true labels.
    pub mcc_true: Option<f64>,
    /// Test clustering label → classifier label.
    pub permutation: Permutation,
    pub k_train: usize,
    pub k_test: usize,
    pub n_test: usize,
    pub n_test_noise: usize,
    pub test_clustering: LabelVector,
    pub predictions: LabelVector,
}

/// Aligns the test clustering to the predictions and scores the agreement.
fn score_on_test<T: Scalar>(
    model: &TrainedClassifier<T>,
    test: &Dataset<T>,
    y_ts: LabelVector,
    k_train: usize,
) -> Result<EvaluationReport> {
    let pred = model.predict(test)?;
    let (_, permutation) = misclassification_distance(&pred, &y_ts)?;
    let aligned = relabel(&y_ts, &permutation)?;
    let keep: Vec<usize> = (0..y_ts.len()).filter(|&i| y_ts[i] != NOISE).collect();
    let (truth, guess) = (aligned.select(&keep), pred.select(&keep));
    let mcc = metrics::mcc(&truth, &guess)?;
    let prf = metrics::precision_recall_f1(&truth, &guess)?;
    let (ami, ami_clustering, acc_true, mcc_true) = match test.true_labels() {
        Some(t) => {
            let (d, to_true) = misclassification_distance(t, &pred)?;
            let matched = relabel(&pred, &to_true)?;
            (
                Some(metrics::ami(t, &pred)?.value),
                Some(metrics::ami(t, &y_ts)?.value),
                Some(1.0 - d),
                Some(metrics::mcc(t, &matched)?.value),
            )
        }
        None => (None, None, None, None),
    };
    Ok(EvaluationReport {
        acc: metrics::accuracy(&truth, &guess)?,
        mcc: mcc.value,
        mcc_degenerate: mcc.degenerate,
        f1_macro: prf.f1,
        precision_macro: prf.precision,
        recall_macro: prf.recall,
        ami,
        ami_clustering,
        acc_true,
        mcc_true,
        permutation,
        k_train,
        k_test: y_ts.n_clusters(),
        n_test: y_ts.len(),
        n_test_noise: y_ts.noise_count(),
        test_clustering: y_ts,
        predictions: pred,
    })
}

fn cluster_test<T: Scalar>(
    test: &Dataset<T>,
    clusterer: &ClustererConfig,
    k: Option<usize>,
    seed: u64,
) -> Result<LabelVector> {
    let fit = clusterer.fit(
        test,
        k,
        rng::derive_seed(seed, &[domain::EVALUATE, domain::CLUSTER_VAL]),
    )?;
    if fit.labels.noise_count() == fit.labels.len() {
        return Err(Error::AllNoise);
    }
    Ok(fit.labels)
}

/// Held-out evaluation for a fixed-k clusterer: refit at `k_star` on the
/// whole training set, train the classifier, cluster the test set
/// independently and compare after optimal relabeling.
pub fn evaluate<T: Scalar>(
    train: &Dataset<T>,
    test: &Dataset<T>,
    k_star: usize,
    clusterer: &ClustererConfig,
    classifier: &ClassifierConfig,
    seed: u64,
) -> Result<EvaluationReport> {
    if clusterer.is_auto_k() {
        return Err(Error::InvalidParameter(
            "use evaluate_auto for auto-k clusterers".into(),
        ));
    }
    let (model, _, y_tr) = fit_cell_classifier(
        train,
        clusterer,
        classifier,
        Some(k_star),
        rng::derive_seed(seed, &[domain::EVALUATE]),
    )?;
    let y_ts = cluster_test(test, clusterer, Some(k_star), seed)?;
    score_on_test(&model, test, y_ts, y_tr.n_clusters())
}

/// Held-out evaluation for an auto-k result: the classifier is rebuilt from
/// the selected CV cell rather than refitted on the whole training set.
/// `grid` and `stratifier` must be those used for selection.
pub fn evaluate_auto<T: Scalar>(
    train: &Dataset<T>,
    test: &Dataset<T>,
    result: &StabilityResult,
    clusterer: &ClustererConfig,
    classifier: &ClassifierConfig,
    grid: &CvGrid,
    stratifier: Option<&LabelVector>,
) -> Result<EvaluationReport> {
    let cell = result
        .selected_cell
        .ok_or_else(|| Error::InvalidParameter("stability result has no selected cell".into()))?;
    let folds = cv_folds(train.n_samples(), grid, cell.rep, stratifier)?;
    let (itr, _) = folds
        .get(cell.fold)
        .ok_or_else(|| Error::InvalidParameter(format!("fold {} outside the grid", cell.fold)))?;
    let (model, _, y_tr) =
        fit_cell_classifier(&train.subset(itr), clusterer, classifier, None, cell.seed)?;
    let y_ts = cluster_test(test, clusterer, None, grid.base_seed)?;
    score_on_test(&model, test, y_ts, y_tr.n_clusters())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(k: usize, rep: usize, fold: usize, norm: f64) -> StabilityCell {
        StabilityCell {
            k,
            fold,
            rep,
            raw_distance: norm / 2.0,
            random_baseline: 0.5,
            normalized: norm,
            train_distance: 0.0,
            k_val: k,
            permutation: Permutation::identity(k),
            seed: 0,
            zero_baseline: false,
        }
    }

    #[test]
    fn max_argmin_rule() {
        assert_eq!(
            max_argmin([(2, 0.4), (3, 0.1), (4, 0.1), (5, 0.3)]),
            Some(4)
        );
        assert_eq!(max_argmin([(2, 0.9)]), Some(2));
        assert_eq!(max_argmin([(3, 0.1), (4, 0.1 + 1e-13)]), Some(4));
        assert_eq!(max_argmin([(3, 0.1), (4, 0.1 + 1e-9)]), Some(3));
        assert_eq!(max_argmin([]), None);
    }

    #[test]
    fn summary_statistics() {
        let cells = vec![
            cell(3, 0, 0, 0.2),
            cell(3, 0, 1, 0.4),
            cell(3, 1, 0, 0.6),
            cell(3, 1, 1, 0.8),
        ];
        let r = StabilityResult::from_cells(Mode::FixedK, cells).unwrap();
        let s = &r.per_k[&3];
        assert!((s.mean_norm - 0.5).abs() < 1e-15);
        let sd = (0.2f64 / 3.0).sqrt();
        assert!((s.sd - sd).abs() < 1e-15);
        assert!((s.ci95.1 - s.mean_norm - 1.96 * sd / 2.0).abs() < 1e-15);
        assert!(r.selected_cell.is_none());
    }

    #[test]
    fn nested_mean_weights_repetitions_equally() {
        // Rep 0 has two cells, rep 1 one: (0.5 + 1.0) / 2.
        let cells = vec![cell(4, 0, 0, 0.0), cell(4, 0, 1, 1.0), cell(4, 1, 0, 1.0)];
        let r = StabilityResult::from_cells(Mode::AutoK, cells).unwrap();
        assert_eq!(r.per_k[&4].mean_norm, 0.75);
        assert_eq!(
            r.selected_cell.unwrap(),
            SelectedCell {
                rep: 0,
                fold: 0,
                seed: 0
            }
        );
    }

    #[test]
    fn auto_groups_pick_lowest_then_largest() {
        let cells = vec![
            cell(4, 0, 0, 0.3),
            cell(5, 0, 1, 0.1),
            cell(5, 1, 0, 0.1),
            cell(4, 1, 1, 0.3),
        ];
        let r = StabilityResult::from_cells(Mode::AutoK, cells).unwrap();
        assert_eq!(r.k_star, 5);
        assert!(matches!(
            StabilityResult::from_cells(Mode::AutoK, vec![]),
            Err(Error::NoAutoKGroup)
        ));
    }

    #[test]
    fn result_json_roundtrip() {
        let r = StabilityResult::from_cells(
            Mode::FixedK,
            vec![cell(2, 0, 0, 0.5), cell(3, 0, 0, 0.25)],
        )
        .unwrap();
        let back: StabilityResult =
            serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
        assert_eq!(r.k_star, 3);
    }
}
