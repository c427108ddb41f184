use serde::{Deserialize, Serialize};

use crate::data::{Dataset, LabelVector};
use crate::error::{Error, Result};
use crate::scalar::{sq_euclidean, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnnParams {
    #[serde(default = "KnnParams::default_n_neighbors")]
    pub n_neighbors: usize,
}

impl KnnParams {
    fn default_n_neighbors() -> usize {
        5
    }
}

impl Default for KnnParams {
    fn default() -> Self {
        Self {
            n_neighbors: Self::default_n_neighbors(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct KnnModel<T> {
    pub n_neighbors: usize,
    pub train: Dataset<T>,
    pub labels: Vec<i32>,
}

impl<T: Scalar> KnnModel<T> {
    pub fn fit(params: &KnnParams, data: &Dataset<T>, labels: &LabelVector) -> Result<Self> {
        if params.n_neighbors < 1 || params.n_neighbors > data.n_samples() {
            return Err(Error::InvalidParameter(format!(
                "n_neighbors {} outside 1..={}",
                params.n_neighbors,
                data.n_samples()
            )));
        }
        Ok(Self {
            n_neighbors: params.n_neighbors,
            train: data.clone(),
            labels: labels.as_slice().to_vec(),
        })
    }

    /// Majority vote of the nearest neighbours.
    ///
    /// Neighbours are ordered by (distance, class id), so distance ties
    /// prefer the lower class. Among classes with equal votes the one owning
    /// the nearest neighbour wins.
    pub fn predict_row(&self, x: &[T], scratch: &mut Vec<(T, i32)>) -> i32 {
        scratch.clear();
        scratch.extend(
            self.train
                .rows()
                .zip(&self.labels)
                .map(|(r, &l)| (sq_euclidean(r, x), l)),
        );
        let cmp = |a: &(T, i32), b: &(T, i32)| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1));
        let k = self.n_neighbors;
        if k < scratch.len() {
            scratch.select_nth_unstable_by(k - 1, cmp);
            scratch.truncate(k);
        }
        scratch.sort_unstable_by(cmp);

        // (label, votes, rank of nearest occurrence)
        let mut tally: Vec<(i32, usize, usize)> = Vec::new();
        for (rank, &(_, l)) in scratch.iter().enumerate() {
            match tally.iter_mut().find(|t| t.0 == l) {
                Some(t) => t.1 += 1,
                None => tally.push((l, 1, rank)),
            }
        }
        tally
            .into_iter()
            .max_by(|a, b| a.1.cmp(&b.1).then(b.2.cmp(&a.2)))
            .map(|t| t.0)
            .expect("at least one neighbour")
    }
}
