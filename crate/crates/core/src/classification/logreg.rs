//! Multinomial logistic regression fitted by full-batch gradient descent
//! with Armijo backtracking.
//!
//! Features are standardized with training statistics before fitting; the
//! objective is the mean cross-entropy plus `l2/2 · ‖W‖²` over the
//! non-bias weights of the standardized problem. The stored weights are
//! mapped back so that prediction works on raw features.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, LabelVector, Scaler};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogregParams {
    #[serde(default = "LogregParams::default_l2")]
    pub l2: f64,
    #[serde(default = "LogregParams::default_max_iter")]
    pub max_iter: usize,
    /// Stop once the gradient norm falls below this value.
    #[serde(default = "LogregParams::default_tol")]
    pub tol: f64,
    #[serde(default = "LogregParams::default_step")]
    pub initial_step: f64,
    #[serde(default = "LogregParams::default_shrink")]
    pub backtrack: f64,
}

impl LogregParams {
    fn default_l2() -> f64 {
        1e-3
    }

    fn default_max_iter() -> usize {
        500
    }

    fn default_tol() -> f64 {
        1e-5
    }

    fn default_step() -> f64 {
        1.0
    }

    fn default_shrink() -> f64 {
        0.5
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l2 >= 0.0)
            || self.max_iter < 1
            || !(self.tol > 0.0)
            || !(self.initial_step > 0.0)
            || !(self.backtrack > 0.0 && self.backtrack < 1.0)
        {
            return Err(Error::InvalidParameter(
                "logreg needs l2 ≥ 0, max_iter ≥ 1, tol > 0, initial_step > 0, backtrack in (0, 1)"
                    .into(),
            ));
        }
        Ok(())
    }
}

impl Default for LogregParams {
    fn default() -> Self {
        Self {
            l2: Self::default_l2(),
            max_iter: Self::default_max_iter(),
            tol: Self::default_tol(),
            initial_step: Self::default_step(),
            backtrack: Self::default_shrink(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LogregModel<T> {
    /// One row per class: feature weights followed by the bias.
    pub weights: Vec<Vec<T>>,
    pub n_iter: usize,
    pub converged: bool,
}

/// Objective value and gradient at `w` (k rows of p+1, bias last) for
/// class indices `y` in `0..k`.
pub(crate) fn objective<T: Scalar>(
    w: &[Vec<T>],
    x: &Dataset<T>,
    y: &[usize],
    l2: T,
) -> (T, Vec<Vec<T>>) {
    let k = w.len();
    let p = x.n_features();
    let n = T::of_usize(x.n_samples());
    let mut grad = vec![vec![T::zero(); p + 1]; k];
    let mut loss = T::zero();
    let mut z = vec![T::zero(); k];
    for (row, &yi) in x.rows().zip(y) {
        for (zc, wc) in z.iter_mut().zip(w) {
            *zc = row.iter().zip(wc).fold(wc[p], |acc, (&a, &b)| acc + a * b);
        }
        let m = z.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
        let denom: T = z.iter().map(|&v| (v - m).exp()).sum();
        let log_denom = denom.ln() + m;
        loss = loss + log_denom - z[yi];
        for c in 0..k {
            let pc = (z[c] - log_denom).exp() - if c == yi { T::one() } else { T::zero() };
            for j in 0..p {
                grad[c][j] = grad[c][j] + pc * row[j];
            }
            grad[c][p] = grad[c][p] + pc;
        }
    }
    loss = loss / n;
    let half = T::of(0.5);
    for (gc, wc) in grad.iter_mut().zip(w) {
        for j in 0..=p {
            gc[j] = gc[j] / n;
            if j < p {
                gc[j] = gc[j] + l2 * wc[j];
                loss = loss + half * l2 * wc[j] * wc[j];
            }
        }
    }
    (loss, grad)
}

fn sq_norm<T: Scalar>(g: &[Vec<T>]) -> T {
    g.iter().flatten().fold(T::zero(), |a, &v| a + v * v)
}

impl<T: Scalar> LogregModel<T> {
    /// `y` holds class indices in `0..n_classes`.
    pub fn fit(
        params: &LogregParams,
        data: &Dataset<T>,
        y: &[usize],
        n_classes: usize,
    ) -> Result<Self> {
        params.validate()?;
        let p = data.n_features();
        let scaler = Scaler::fit(data);
        let xs = scaler.transform(data)?;
        let l2 = T::of(params.l2);
        let c1 = T::of(1e-4);
        let shrink = T::of(params.backtrack);
        let tol2 = T::of(params.tol * params.tol);

        let mut w = vec![vec![T::zero(); p + 1]; n_classes];
        let (mut f, mut g) = objective(&w, &xs, y, l2);
        let mut step = T::of(params.initial_step);
        let mut n_iter = 0;
        let mut converged = false;
        while n_iter < params.max_iter {
            let gn = sq_norm(&g);
            if gn < tol2 {
                converged = true;
                break;
            }
            n_iter += 1;
            let mut accepted = false;
            for _ in 0..60 {
                let cand: Vec<Vec<T>> = w
                    .iter()
                    .zip(&g)
                    .map(|(wc, gc)| wc.iter().zip(gc).map(|(&a, &b)| a - step * b).collect())
                    .collect();
                let (fc, gc) = objective(&cand, &xs, y, l2);
                if fc <= f - c1 * step * gn {
                    w = cand;
                    f = fc;
                    g = gc;
                    accepted = true;
                    break;
                }
                step = step * shrink;
            }
            if !accepted {
                break;
            }
            step = step / shrink;
        }

        // Undo standardization: w·(x−μ)/σ + b = (w/σ)·x + (b − Σ wμ/σ).
        let weights = w
            .into_iter()
            .map(|wc| {
                let mut raw: Vec<T> = (0..p).map(|j| wc[j] / scaler.scale[j]).collect();
                let shift = (0..p).fold(T::zero(), |a, j| a + raw[j] * scaler.mean[j]);
                raw.push(wc[p] - shift);
                raw
            })
            .collect();
        Ok(Self {
            weights,
            n_iter,
            converged,
        })
    }

    /// Index of the highest-scoring class; ties go to the lower index.
    pub fn predict_index(&self, x: &[T]) -> usize {
        let p = x.len();
        let mut best = (0, T::neg_infinity());
        for (c, wc) in self.weights.iter().enumerate() {
            let s = x.iter().zip(wc).fold(wc[p], |a, (&v, &w)| a + v * w);
            if s > best.1 {
                best = (c, s);
            }
        }
        best.0
    }
}

/// Maps labels onto indices of `class_ids`.
pub(crate) fn class_indices(labels: &LabelVector, class_ids: &[i32]) -> Vec<usize> {
    labels
        .iter()
        .map(|l| {
            class_ids
                .binary_search(&l)
                .expect("label drawn from class_ids")
        })
        .collect()
}
