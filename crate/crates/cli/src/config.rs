//! Run configuration: one JSON file describing data, preprocessing, models
//! and the CV grid. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clustab::gridsearch::SearchPair;
use clustab::{
    BlobsSpec, ClassifierConfig, ClustererConfig, CvGrid, Dataset, LabelVector, Scalar, Scaler,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum DataSource {
    Csv(CsvSource),
    Blobs(BlobsSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    /// Relative paths resolve against the config file's directory.
    pub path: PathBuf,
    #[serde(default)]
    pub label_column: Option<String>,
    #[serde(default = "yes")]
    pub has_header: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preprocessing {
    #[default]
    None,
    /// Standardize with statistics of the training split.
    Scale,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F64,
    F32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RngFamily {
    #[default]
    Chacha8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    #[serde(default = "SplitConfig::default_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    /// Stratify by the dataset's true labels.
    #[serde(default)]
    pub stratify: bool,
}

impl SplitConfig {
    fn default_fraction() -> f64 {
        0.3
    }
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            test_fraction: Self::default_fraction(),
            seed: 0,
            stratify: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub pairs: Vec<SearchPair>,
    #[serde(default)]
    pub true_k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DataSource,
    /// Held-out data; when absent the dataset is split.
    #[serde(default)]
    pub test_dataset: Option<DataSource>,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub preprocessing: Preprocessing,
    /// Stratify CV folds by the true labels of the training split.
    #[serde(default)]
    pub stratify_cv: bool,
    #[serde(default)]
    pub clusterer: ClustererConfig,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    #[serde(default)]
    pub cv: CvGrid,
    #[serde(default)]
    pub search: Option<SearchConfig>,
    #[serde(default)]
    pub rng: RngFamily,
    #[serde(default)]
    pub precision: Precision,
    /// Output directory; `--out` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Worker threads; `--workers` and the environment take precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

/// A parsed config plus where it came from.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: RunConfig,
    pub base_dir: PathBuf,
    /// sha256 of the canonical config JSON, excluding `out` and `workers`.
    pub hash: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunConfig {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).context("config does not match the schema")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.clusterer.validate()?;
        self.classifier.validate()?;
        if self.test_dataset.is_none()
            && !(self.split.test_fraction > 0.0 && self.split.test_fraction < 1.0)
        {
            bail!("split.test_fraction must lie in (0, 1)");
        }
        Ok(())
    }

    /// Hash input: everything that affects results. Output location and
    /// worker count do not.
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        c.workers = None;
        serde_json::to_string(&c).expect("config serializes")
    }
}

pub fn load(path: &Path) -> anyhow::Result<Loaded> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let config = RunConfig::parse(&text).with_context(|| format!("in {}", path.display()))?;
    let hash = sha256_hex(config.canonical_json().as_bytes());
    let base_dir = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(Loaded {
        config,
        base_dir,
        hash,
    })
}

/// Train and test parts after splitting and preprocessing.
pub struct Prepared<T> {
    pub train: Dataset<T>,
    pub test: Dataset<T>,
    /// CV stratifier over `train`, when requested.
    pub stratifier: Option<LabelVector>,
    pub dataset_name: String,
    pub n_classes: Option<usize>,
}

fn read_source<T: Scalar>(src: &DataSource, base: &Path) -> anyhow::Result<Dataset<T>> {
    match src {
        DataSource::Blobs(spec) => Ok(clustab::make_blobs(spec)?),
        DataSource::Csv(c) => {
            let path = base.join(&c.path);
            Ok(clustab::load_csv(
                &path,
                c.label_column.as_deref(),
                c.has_header,
            )?)
        }
    }
}

impl Loaded {
    /// Loads the data and produces the train/test parts. Every failure here
    /// is an input problem.
    pub fn prepare<T: Scalar>(&self) -> anyhow::Result<Prepared<T>> {
        let cfg = &self.config;
        let data: Dataset<T> = read_source(&cfg.dataset, &self.base_dir)?;
        let (train, test) = match &cfg.test_dataset {
            Some(src) => {
                let test: Dataset<T> = read_source(src, &self.base_dir)?;
                if test.n_features() != data.n_features() {
                    bail!(
                        "feature mismatch: training data has {} features, test data has {}",
                        data.n_features(),
                        test.n_features()
                    );
                }
                (data.clone(), test)
            }
            None => {
                let strat = if cfg.split.stratify {
                    Some(
                        data.true_labels()
                            .context("split.stratify needs a label column")?
                            .clone(),
                    )
                } else {
                    None
                };
                let (_, tr, ts) = clustab::train_test_split(
                    &data,
                    cfg.split.test_fraction,
                    cfg.split.seed,
                    strat.as_ref(),
                )?;
                (tr, ts)
            }
        };
        let (train, test) = match cfg.preprocessing {
            Preprocessing::None => (train, test),
            Preprocessing::Scale => {
                let scaler = Scaler::fit(&train);
                (scaler.transform(&train)?, scaler.transform(&test)?)
            }
        };
        let stratifier = if cfg.stratify_cv {
            Some(
                train
                    .true_labels()
                    .context("stratify_cv needs a label column")?
                    .clone(),
            )
        } else {
            None
        };
        Ok(Prepared {
            n_classes: data.true_labels().map(LabelVector::n_clusters),
            dataset_name: data.id().to_string(),
            train,
            test,
            stratifier,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_blobs_config() {
        let cfg = RunConfig::parse(
            r#"{"dataset": {"blobs": {"n_samples": 50, "n_features": 2, "centers": 3}},
                "cv": {"k_values": [2, 3]}}"#,
        )
        .unwrap();
        assert_eq!(cfg.split, SplitConfig::default());
        assert_eq!(cfg.precision, Precision::F64);
        assert!(matches!(cfg.clusterer, ClustererConfig::Kmeans(_)));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for bad in [
            r#"{"dataset": {"blobs": {"n_samples": 5, "n_features": 2, "centers": 2}}, "colour": 1}"#,
            r#"{"dataset": {"blobs": {"n_samples": 5, "n_features": 2, "centers": 2, "x": 0}}}"#,
            r#"{"dataset": {"csv": {"path": "a.csv", "sep": ";"}}}"#,
            r#"{"dataset": {"blobs": {"n_samples": 5, "n_features": 2, "centers": 2}}, "cv": {"folds": 2}}"#,
        ] {
            assert!(RunConfig::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn hash_ignores_out_and_workers() {
        let a = RunConfig::parse(
            r#"{"dataset": {"blobs": {"n_samples": 50, "n_features": 2, "centers": 3}}}"#,
        )
        .unwrap();
        let mut b = a.clone();
        b.out = Some("elsewhere".into());
        b.workers = Some(3);
        assert_eq!(a.canonical_json(), b.canonical_json());
        b.split.seed = 1;
        assert_ne!(a.canonical_json(), b.canonical_json());
    }

    #[test]
    fn shipped_configs_parse() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        let mut n = 0;
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            load(&path).unwrap_or_else(|e| panic!("{}: {e:#}", path.display()));
            n += 1;
        }
        assert!(n >= 3);
    }

    #[test]
    fn schema_lists_every_top_level_key() {
        let path =
            Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas/run_config.schema.json");
        let schema: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
        let mut cfg = RunConfig::parse(
            r#"{"dataset": {"blobs": {"n_samples": 5, "n_features": 2, "centers": 2}},
                "search": {"pairs": []}, "out": "o", "workers": 1}"#,
        )
        .unwrap();
        cfg.test_dataset = Some(cfg.dataset.clone());
        let value = serde_json::to_value(&cfg).unwrap();
        let mut ours: Vec<&String> = value.as_object().unwrap().keys().collect();
        let mut theirs: Vec<&String> = schema["properties"].as_object().unwrap().keys().collect();
        ours.sort();
        theirs.sort();
        assert_eq!(ours, theirs);
    }
}
