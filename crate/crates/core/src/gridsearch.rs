//! Exhaustive search over clusterer/classifier pairs and their
//! hyperparameters, ranked by normalized stability at the selected k.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::classification::ClassifierConfig;
use crate::clustering::ClustererConfig;
use crate::data::{CvGrid, Dataset, LabelVector};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::selection::{
    best_nclust_cv, best_nclust_cv_auto, evaluate, evaluate_auto, EvaluationReport, StabilityResult,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchPair {
    pub clusterer: ClustererConfig,
    pub classifier: ClassifierConfig,
    /// Values to try per parameter, keyed `clusterer.<field>` or
    /// `classifier.<field>`.
    #[serde(default)]
    pub grid: BTreeMap<String, Vec<Value>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpace {
    pub pairs: Vec<SearchPair>,
    /// Shared design. Auto-k clusterers ignore `k_values`.
    pub cv: CvGrid,
    #[serde(default)]
    pub true_k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub clusterer: ClustererConfig,
    pub classifier: ClassifierConfig,
}

impl Candidate {
    /// `classifier/clusterer`, e.g. `knn/kmeans`.
    pub fn model_name(&self) -> String {
        format!("{}/{}", self.classifier.name(), self.clusterer.name())
    }

    /// Canonical JSON, used as the last ranking key.
    pub fn config_json(&self) -> String {
        serde_json::to_string(self).expect("configs serialize")
    }

    fn complexity(&self) -> (u8, u8) {
        (
            self.clusterer.complexity_rank(),
            self.classifier.complexity_rank(),
        )
    }
}

fn patch(base: &Value, path: &str, value: &Value) -> Result<Value> {
    let mut out = base.clone();
    let obj = out
        .as_object_mut()
        .ok_or_else(|| Error::InvalidParameter("config is not an object".into()))?;
    obj.insert(path.to_string(), value.clone());
    Ok(out)
}

/// Concrete configurations of every pair, pairs in order.
///
/// Within a pair, parameter names are taken in sorted order and the last
/// name varies fastest. Repeated values are dropped, keeping the first.
pub fn expand_grid(space: &SearchSpace) -> Result<Vec<Candidate>> {
    if space.pairs.is_empty() {
        return Err(Error::InvalidParameter("search space has no pairs".into()));
    }
    let mut out = Vec::new();
    for pair in &space.pairs {
        let mut axes: Vec<(&str, &str, Vec<&Value>)> = Vec::new();
        for (name, values) in &pair.grid {
            let (side, field) = name
                .split_once('.')
                .filter(|(s, _)| *s == "clusterer" || *s == "classifier")
                .ok_or_else(|| {
                    Error::InvalidParameter(format!(
                        "grid key `{name}` must start with clusterer. or classifier."
                    ))
                })?;
            if values.is_empty() {
                return Err(Error::InvalidParameter(format!(
                    "grid key `{name}` has no values"
                )));
            }
            let mut distinct: Vec<&Value> = Vec::new();
            for v in values {
                if !distinct.contains(&v) {
                    distinct.push(v);
                }
            }
            axes.push((side, field, distinct));
        }
        let base_c = serde_json::to_value(&pair.clusterer)?;
        let base_f = serde_json::to_value(&pair.classifier)?;
        let total: usize = axes.iter().map(|a| a.2.len()).product();
        for mut idx in 0..total {
            let mut c = base_c.clone();
            let mut f = base_f.clone();
            let mut picks = vec![0; axes.len()];
            for (slot, axis) in picks.iter_mut().zip(&axes).rev() {
                *slot = idx % axis.2.len();
                idx /= axis.2.len();
            }
            for ((side, field, values), &i) in axes.iter().zip(&picks) {
                if *side == "clusterer" {
                    c = patch(&c, field, values[i])?;
                } else {
                    f = patch(&f, field, values[i])?;
                }
            }
            let cand = Candidate {
                clusterer: serde_json::from_value(c)?,
                classifier: serde_json::from_value(f)?,
            };
            cand.clusterer.validate()?;
            cand.classifier.validate()?;
            out.push(cand);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchEntry {
    pub config: Candidate,
    pub k_star: Option<usize>,
    pub mean_norm: Option<f64>,
    pub sd: Option<f64>,
    pub mean_train: Option<f64>,
    /// Mean normalized stability for every k evaluated.
    pub curve: BTreeMap<usize, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<EvaluationReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SearchEntry {
    pub fn succeeded(&self) -> bool {
        self.k_star.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    /// Successful entries by (stability, complexity, config JSON), then
    /// failed ones in expansion order.
    pub ranked: Vec<SearchEntry>,
    pub best: Option<usize>,
    pub best_matching_true_k: Option<usize>,
    pub true_k: Option<usize>,
}

fn rank_order(a: &SearchEntry, b: &SearchEntry) -> Ordering {
    match (a.mean_norm, b.mean_norm) {
        (Some(x), Some(y)) => x
            .total_cmp(&y)
            .then(a.config.complexity().cmp(&b.config.complexity()))
            .then_with(|| a.config.config_json().cmp(&b.config.config_json())),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    }
}

fn run_one<T: Scalar>(
    train: &Dataset<T>,
    test: Option<&Dataset<T>>,
    cand: &Candidate,
    cv: &CvGrid,
    stratifier: Option<&LabelVector>,
) -> Result<(StabilityResult, Option<EvaluationReport>)> {
    if cand.clusterer.is_auto_k() {
        let grid = CvGrid {
            k_values: Vec::new(),
            ..cv.clone()
        };
        let r = best_nclust_cv_auto(train, &cand.clusterer, &cand.classifier, &grid, stratifier)?;
        let e = test
            .map(|t| {
                evaluate_auto(
                    train,
                    t,
                    &r,
                    &cand.clusterer,
                    &cand.classifier,
                    &grid,
                    stratifier,
                )
            })
            .transpose()?;
        Ok((r, e))
    } else {
        let r = best_nclust_cv(train, &cand.clusterer, &cand.classifier, cv, stratifier)?;
        let e = test
            .map(|t| {
                evaluate(
                    train,
                    t,
                    r.k_star,
                    &cand.clusterer,
                    &cand.classifier,
                    cv.base_seed,
                )
            })
            .transpose()?;
        Ok((r, e))
    }
}

/// Runs selection (and, given `test`, evaluation) for every grid point.
///
/// Every point uses `space.cv.base_seed` unchanged, so its stability values
/// equal a standalone selection run with the same grid. A failing point is
/// kept with its error.
pub fn search<T: Scalar>(
    train: &Dataset<T>,
    test: Option<&Dataset<T>>,
    space: &SearchSpace,
    stratifier: Option<&LabelVector>,
) -> Result<SearchOutcome> {
    let candidates = expand_grid(space)?;
    let mut ranked: Vec<SearchEntry> = candidates
        .par_iter()
        .map(
            |cand| match run_one(train, test, cand, &space.cv, stratifier) {
                Ok((r, evaluation)) => {
                    let s = &r.per_k[&r.k_star];
                    SearchEntry {
                        config: cand.clone(),
                        k_star: Some(r.k_star),
                        mean_norm: Some(s.mean_norm),
                        sd: Some(s.sd),
                        mean_train: Some(s.mean_train),
                        curve: r.per_k.iter().map(|(&k, s)| (k, s.mean_norm)).collect(),
                        evaluation,
                        error: None,
                    }
                }
                Err(e) => SearchEntry {
                    config: cand.clone(),
                    k_star: None,
                    mean_norm: None,
                    sd: None,
                    mean_train: None,
                    curve: BTreeMap::new(),
                    evaluation: None,
                    error: Some(e.to_string()),
                },
            },
        )
        .collect();
    ranked.sort_by(rank_order);
    let best = ranked.first().filter(|e| e.succeeded()).map(|_| 0);
    let best_matching_true_k = space
        .true_k
        .and_then(|k| ranked.iter().position(|e| e.k_star == Some(k)));
    Ok(SearchOutcome {
        ranked,
        best,
        best_matching_true_k,
        true_k: space.true_k,
    })
}

/// Row labels for the results table.
#[derive(Debug, Clone, Default)]
pub struct TableMeta {
    pub dataset: String,
    pub classes: Option<usize>,
    pub preprocessing: String,
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn opt<V: ToString>(v: Option<V>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl SearchOutcome {
    /// Results table, one row per ranked entry: dataset, classes, clusters,
    /// model, preprocessing, validation stability and its sd, the
    /// clustering-vs-classifier test ACC, then AMI/ACC/MCC against true
    /// labels.
    pub fn to_table_csv(&self, meta: &TableMeta) -> String {
        let mut out = String::from(
            "rank,dataset,classes,clusters,model,preprocessing,validation_stability,validation_error,\
             test_acc,ami,acc,mcc,matches_true_k,status,config\n",
        );
        for (i, e) in self.ranked.iter().enumerate() {
            let ev = e.evaluation.as_ref();
            let clusters = match (e.k_star, ev) {
                (Some(k), Some(r)) if r.k_test != k => format!("{k}/{}", r.k_test),
                (k, _) => opt(k),
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                i + 1,
                csv_field(&meta.dataset),
                opt(meta.classes),
                clusters,
                e.config.model_name(),
                csv_field(&meta.preprocessing),
                opt(e.mean_norm),
                opt(e.sd),
                opt(ev.map(|r| r.acc)),
                opt(ev.and_then(|r| r.ami)),
                opt(ev.and_then(|r| r.acc_true)),
                opt(ev.and_then(|r| r.mcc_true)),
                self.best_matching_true_k == Some(i),
                e.error
                    .as_deref()
                    .map_or("ok".to_string(), |m| csv_field(&format!("failed: {m}"))),
                csv_field(&e.config.config_json()),
            );
        }
        out
    }
}
