//! Seeded random streams.
//!
//! Every stochastic step (fold shuffles, k-means seeding, random labelings)
//! draws from its own ChaCha8 stream whose seed is a pure function of the
//! run's base seed and a tuple of integer tags such as `(rep, fold, k)`.
//! Results therefore do not depend on execution order or worker count.
//!
//! Synthetic blobs use [`NumpyRandomState`], a bit-compatible port of
//! NumPy's legacy `RandomState` sampling on top of MT19937, so fixture
//! datasets can be cross-checked against the Python ecosystem.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_mt::Mt;
use serde::{Deserialize, Serialize};

/// Generator family recorded in run configurations and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RngFamily {
    #[default]
    Chacha8,
}

/// Stream-domain tags, kept distinct so that e.g. fold shuffles and
/// k-means seeding never share a stream.
pub mod domain {
    pub const FOLDS: u64 = 1;
    pub const CLUSTER_TRAIN: u64 = 2;
    pub const CLUSTER_VAL: u64 = 3;
    pub const RANDOM_LABELS: u64 = 4;
    pub const SPLIT: u64 = 5;
    pub const CLASSIFIER: u64 = 6;
    pub const EVALUATE: u64 = 7;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed: `h = splitmix64(base)`, then for each tag
/// `h = splitmix64(h ^ tag)`.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(base), |h, &t| splitmix64(h ^ t))
}

pub fn stream(base: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, tags))
}

/// NumPy legacy `RandomState` sampling over MT19937.
///
/// Only the handful of methods used by the blob generator are provided;
/// each reproduces NumPy's output bit for bit for the same integer seed.
#[derive(Clone)]
pub struct NumpyRandomState {
    mt: Mt,
    cached_gauss: Option<f64>,
}

impl NumpyRandomState {
    /// Seeds like `numpy.random.RandomState(seed)` (seed must fit in 32 bits).
    pub fn new(seed: u32) -> Self {
        Self {
            mt: Mt::new(seed),
            cached_gauss: None,
        }
    }

    /// Uniform double on [0, 1) with 53 random bits.
    pub fn random_sample(&mut self) -> f64 {
        let a = (self.mt.next_u32() >> 5) as f64;
        let b = (self.mt.next_u32() >> 6) as f64;
        (a * 67_108_864.0 + b) / 9_007_199_254_740_992.0
    }

    pub fn uniform(&mut self, low: f64, high: f64) -> f64 {
        low + (high - low) * self.random_sample()
    }

    /// Marsaglia polar method with one cached deviate.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(g) = self.cached_gauss.take() {
            return g;
        }
        loop {
            let x1 = 2.0 * self.random_sample() - 1.0;
            let x2 = 2.0 * self.random_sample() - 1.0;
            let r2 = x1 * x1 + x2 * x2;
            if r2 < 1.0 && r2 != 0.0 {
                let f = (-2.0 * r2.ln() / r2).sqrt();
                self.cached_gauss = Some(f * x1);
                return f * x2;
            }
        }
    }

    pub fn normal(&mut self, loc: f64, scale: f64) -> f64 {
        loc + scale * self.standard_normal()
    }

    /// Uniform integer on `0..=max` by masked rejection.
    pub fn random_interval(&mut self, max: u64) -> u64 {
        if max == 0 {
            return 0;
        }
        let mut mask = max;
        for shift in [1, 2, 4, 8, 16, 32] {
            mask |= mask >> shift;
        }
        if max <= u64::from(u32::MAX) {
            loop {
                let v = u64::from(self.mt.next_u32()) & mask;
                if v <= max {
                    return v;
                }
            }
        } else {
            loop {
                let v = self.mt.next_u64() & mask;
                if v <= max {
                    return v;
                }
            }
        }
    }

    /// In-place Fisher-Yates shuffle in NumPy's order (from the back).
    pub fn shuffle<E>(&mut self, items: &mut [E]) {
        for i in (1..items.len()).rev() {
            let j = self.random_interval(i as u64) as usize;
            items.swap(i, j);
        }
    }
}
