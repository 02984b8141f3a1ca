//! Reproducible random number streams.
//!
//! Streams are keyed by `(seed, stream_id)` on top of ChaCha's counter-based
//! stream mechanism: the same key always yields the same draw sequence, and
//! distinct stream ids yield independent sequences. Bootstrap replicate `j`
//! runs on stream `j`, so results never depend on how replicates are
//! scheduled across threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use super::matrix::{compensated_sum, SpdMatrix};
use super::NumError;

/// Stream ids at the top of the range are reserved for non-replicate draws
/// (synthetic data generation, MCMC proposals), keeping replicate streams
/// `0..B` collision-free under a shared seed.
pub const STREAM_DATA: u64 = u64::MAX;
pub const STREAM_MCMC: u64 = u64::MAX - 1;
pub const STREAM_TEST_SPLIT: u64 = u64::MAX - 2;

/// A reproducible random stream identified by `(seed, stream_id)`.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha12Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        RngStream {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A fresh stream with the same seed and a different id.
    pub fn substream(&self, stream_id: u64) -> Self {
        RngStream::new(self.seed, stream_id)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }
}

/// Derives an unrelated 64-bit seed from `(seed, salt)` via splitmix64.
/// Used to give each experiment repetition its own seed space.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn standard_normal(rng: &mut RngStream) -> f64 {
    StandardNormal.sample(rng)
}

/// A point on the `n`-simplex: nonnegative entries summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    /// Tolerance on `|sum - 1|` for externally supplied weights.
    pub const SUM_TOL: f64 = 1e-12;

    pub fn new(weights: Vec<f64>) -> Result<Self, NumError> {
        if weights.is_empty() {
            return Err(NumError::InvalidArgument("empty weight vector".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(NumError::InvalidArgument(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let sum = compensated_sum(&weights);
        if (sum - 1.0).abs() > Self::SUM_TOL {
            return Err(NumError::InvalidArgument(format!(
                "weights sum to {sum}, not 1"
            )));
        }
        Ok(WeightVector(weights))
    }

    pub fn uniform(n: usize) -> Result<Self, NumError> {
        if n == 0 {
            return Err(NumError::InvalidArgument("n must be at least 1".into()));
        }
        Ok(WeightVector(vec![1.0 / n as f64; n]))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::Deref for WeightVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Draws one Dirichlet(1,...,1) weight vector by normalizing `n` unit-rate
/// exponentials.
pub fn dirichlet_uniform(n: usize, rng: &mut RngStream) -> Result<WeightVector, NumError> {
    if n == 0 {
        return Err(NumError::InvalidArgument("n must be at least 1".into()));
    }
    let mut g: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let sum = compensated_sum(&g);
    for v in &mut g {
        *v /= sum;
    }
    Ok(WeightVector(g))
}

/// Samples `mean + L eps` with `L L^T = cov` and `eps` standard normal.
pub fn mvn_sample(mean: &[f64], cov: &SpdMatrix, rng: &mut RngStream) -> Result<Vec<f64>, NumError> {
    if mean.len() != cov.dim() {
        return Err(NumError::DimensionMismatch(format!(
            "mean has length {}, covariance is {}x{}",
            mean.len(),
            cov.dim(),
            cov.dim()
        )));
    }
    let eps: Vec<f64> = (0..mean.len()).map(|_| standard_normal(rng)).collect();
    let mut out = cov.cholesky().mul_lower(&eps);
    for (o, m) in out.iter_mut().zip(mean) {
        *o += *m;
    }
    Ok(out)
}
