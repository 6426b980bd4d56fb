//! Monte-Carlo Lyapunov spectrum of i.i.d. transfer-matrix products.
//!
//! Each replica carries an orthonormal frame `Q` through the product: at every
//! step a matrix is drawn, `A·Q = Q′R` is factored, and `log Rᵢᵢ` is
//! accumulated once burn-in is over. Replicas are independent and the spread
//! of their results gives the standard error.
//!
//! # Random streams
//!
//! Replica `k` of a run seeded with `(seed, stream)` draws from ChaCha8 keyed
//! by SplitMix64 expansions of `seed` and `stream`, on ChaCha stream number
//! `k`. Draws are `f64` in `[0, 1)` mapped through the cumulative weights.
//! Identical `(seed, stream, k)` always reproduce the same path, regardless of
//! how replicas are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::GeneratorSet;
use crate::smallmat::{qr_4x4, Mat4};

pub const DEFAULT_STEPS: u64 = 1_000_000;
pub const DEFAULT_BURN_IN: u64 = 1_000;
pub const DEFAULT_REPLICAS: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct RngSeed {
    pub seed: u64,
    pub stream: u64,
}

impl RngSeed {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    fn replica_rng(&self, replica: u64) -> ChaCha8Rng {
        let mut state = self.seed;
        let mut key = [0u8; 32];
        for (k, chunk) in key.chunks_exact_mut(8).enumerate() {
            if k == 2 {
                state ^= self.stream.rotate_left(17) ^ 0xA076_1D64_78BD_642F;
            }
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(replica);
        rng
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A finite distribution over 4×4 matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub e: f64,
    matrices: Vec<Mat4>,
    cumulative: Vec<f64>,
}

impl Ensemble {
    pub fn new(e: f64, matrices: Vec<Mat4>, weights: &[f64]) -> Result<Self> {
        if matrices.is_empty() || matrices.len() != weights.len() {
            return Err(Error::InvalidParameter(
                "ensemble needs one weight per matrix and at least one matrix".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "weights must be nonnegative and sum to 1, got {weights:?}"
            )));
        }
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        // Draws are < 1, so pinning the last positive-weight entry to 1 makes
        // the inverse-CDF lookup total.
        let last = weights.iter().rposition(|w| *w > 0.0).unwrap();
        for c in &mut cumulative[last..] {
            *c = 1.0;
        }
        Ok(Self {
            e,
            matrices,
            cumulative,
        })
    }

    /// A single matrix drawn with probability one.
    pub fn single(e: f64, a: Mat4) -> Self {
        Self::new(e, vec![a], &[1.0]).unwrap()
    }

    pub fn matrices(&self) -> &[Mat4] {
        &self.matrices
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.gen();
        self.cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.cumulative.len() - 1)
    }
}

impl GeneratorSet {
    pub fn ensemble(&self) -> Ensemble {
        Ensemble::new(self.e, self.matrices.iter().map(|t| t.a).collect(), &self.weights)
            .expect("generator weights are validated on construction")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LyapunovParams {
    pub n_steps: u64,
    pub n_replicas: u64,
    pub burn_in: u64,
}

impl Default for LyapunovParams {
    fn default() -> Self {
        Self {
            n_steps: DEFAULT_STEPS,
            n_replicas: DEFAULT_REPLICAS,
            burn_in: DEFAULT_BURN_IN,
        }
    }
}

impl LyapunovParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_replicas < 1 {
            return Err(Error::InvalidParameter("n_replicas must be >= 1".into()));
        }
        if self.n_steps < 1 || self.n_steps < self.burn_in.saturating_mul(10) {
            return Err(Error::InvalidParameter(format!(
                "need n_steps >= max(1, 10 * burn_in), got n_steps = {}, burn_in = {}",
                self.n_steps, self.burn_in
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub e: f64,
    /// Sorted descending.
    pub gammas: [f64; 4],
    pub stderrs: [f64; 4],
    pub n_steps: u64,
    pub n_replicas: u64,
    pub burn_in: u64,
}

/// The matrix indices drawn by one replica.
pub fn sample_path(ens: &Ensemble, n_steps: u64, seed: RngSeed, replica: u64) -> Vec<usize> {
    let mut rng = seed.replica_rng(replica);
    (0..n_steps).map(|_| ens.draw(&mut rng)).collect()
}

/// Time-averaged `log Rᵢᵢ` of one replica, in frame order (unsorted).
pub fn replica_exponents(ens: &Ensemble, n_steps: u64, burn_in: u64, seed: RngSeed, replica: u64) -> Result<[f64; 4]> {
    let mut rng = seed.replica_rng(replica);
    let mut q = Mat4::IDENTITY;
    let mut sums = [0.0f64; 4];
    for step in 0..n_steps {
        let a = &ens.matrices[ens.draw(&mut rng)];
        let qr = qr_4x4(&(*a * q));
        if step >= burn_in {
            for (i, s) in sums.iter_mut().enumerate() {
                let d = qr.r[(i, i)];
                if !(d > 0.0) || !d.is_finite() {
                    return Err(Error::DegenerateFrame { replica, step });
                }
                *s += d.ln();
            }
        } else if (0..4).any(|i| !(qr.r[(i, i)] > 0.0)) {
            return Err(Error::DegenerateFrame { replica, step });
        }
        q = qr.q;
    }
    let n = (n_steps - burn_in) as f64;
    Ok(sums.map(|s| s / n))
}

/// Lyapunov spectrum of a generator set.
pub fn estimate_spectrum(gen: &GeneratorSet, params: LyapunovParams, seed: RngSeed) -> Result<LyapunovEstimate> {
    estimate_ensemble(&gen.ensemble(), params, seed)
}

pub fn estimate_ensemble(ens: &Ensemble, params: LyapunovParams, seed: RngSeed) -> Result<LyapunovEstimate> {
    params.validate()?;
    let per_replica: Vec<[f64; 4]> = (0..params.n_replicas)
        .into_par_iter()
        .map(|k| {
            replica_exponents(ens, params.n_steps, params.burn_in, seed, k).map(|mut g| {
                g.sort_by(|a, b| b.total_cmp(a));
                g
            })
        })
        .collect::<Result<_>>()?;

    let r = per_replica.len() as f64;
    let mut gammas = [0.0; 4];
    let mut stderrs = [0.0; 4];
    for i in 0..4 {
        let mean = per_replica.iter().map(|g| g[i]).sum::<f64>() / r;
        let var = if per_replica.len() > 1 {
            per_replica.iter().map(|g| (g[i] - mean).powi(2)).sum::<f64>() / (r - 1.0)
        } else {
            0.0
        };
        gammas[i] = mean;
        stderrs[i] = (var / r).sqrt();
    }
    Ok(LyapunovEstimate {
        e: ens.e,
        gammas,
        stderrs,
        n_steps: params.n_steps,
        n_replicas: params.n_replicas,
        burn_in: params.burn_in,
    })
}

/// `(|γ₁ + γ₄|, |γ₂ + γ₃|)`; both vanish for symplectic products.
pub fn symmetry_defect(est: &LyapunovEstimate) -> (f64, f64) {
    let g = &est.gammas;
    ((g[0] + g[3]).abs(), (g[1] + g[2]).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub gap12: f64,
    pub positivity_margin: f64,
    /// `γ₁ − γ₂ > 3(σ₁ + σ₂)` and `γ₂ > 3σ₂`.
    pub significant: bool,
}

pub fn separation_report(est: &LyapunovEstimate) -> SeparationReport {
    let (g, s) = (&est.gammas, &est.stderrs);
    let gap12 = g[0] - g[1];
    SeparationReport {
        gap12,
        positivity_margin: g[1],
        significant: gap12 > 3.0 * (s[0] + s[1]) && g[1] > 3.0 * s[1],
    }
}
