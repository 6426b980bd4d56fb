//! Simultaneous Diophantine approximation of the two channel wavenumbers.
//!
//! A power `A^m` of a transfer matrix is close to the identity exactly when
//! both `m·r₁` and `m·r₂` are close to multiples of 2π. The search here is
//! exhaustive in `m`, so the returned exponent is the smallest one that meets
//! the bound `2π·M^{-1/2}`; by Dirichlet's pigeonhole argument such an `m ≤ M`
//! always exists.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TransferMatrix;
use crate::smallmat::{op_norm, Mat4};

/// Default search horizon `M`.
pub const DEFAULT_BIG_M: u64 = 1_000_000;
/// Default operator-norm radius of the identity neighborhood.
pub const DEFAULT_DELTA: f64 = 0.1;
/// Default number of `M ← 4M` retries in [`power_in_neighborhood`].
pub const DEFAULT_RETRIES: u32 = 3;

const CHUNK: u64 = 1 << 18;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiophantineHit {
    pub m: u64,
    pub x1: u64,
    pub x2: u64,
    /// `m·r₁ − 2π·x₁`
    pub err1: f64,
    /// `m·r₂ − 2π·x₂`
    pub err2: f64,
    /// `2π·M^{-1/2}`
    pub bound: f64,
    /// Search horizon `M` that produced this hit.
    pub big_m: u64,
}

/// `2π·M^{-1/2}`.
pub fn approximation_bound(big_m: u64) -> f64 {
    TAU / (big_m as f64).sqrt()
}

/// Nearest multiple of 2π and the signed residual for `m·r`.
fn residual(m: u64, r: f64) -> (u64, f64) {
    let t = m as f64 * r;
    let x = (t / TAU).round();
    (x as u64, t - TAU * x)
}

fn scan(lo: u64, hi: u64, r1: f64, r2: f64, bound: f64) -> Option<u64> {
    let (a1, a2) = (r1 / TAU, r2 / TAU);
    // Prefilter in units of full turns, slightly relaxed; the exact residual
    // test below is authoritative.
    let loose = bound / TAU * (1.0 + 1e-9);
    (lo..hi).find(|&m| {
        let f1 = m as f64 * a1;
        if (f1 - f1.round()).abs() >= loose {
            return false;
        }
        let f2 = m as f64 * a2;
        if (f2 - f2.round()).abs() >= loose {
            return false;
        }
        residual(m, r1).1.abs() < bound && residual(m, r2).1.abs() < bound
    })
}

/// Smallest `m ∈ [1, big_m]` with `|m·rᵢ − 2π·round(m·rᵢ/2π)| < 2π·big_m^{-1/2}`
/// for both channels.
pub fn simultaneous_approx(r1: f64, r2: f64, big_m: u64) -> Result<DiophantineHit> {
    if big_m < 4 {
        return Err(Error::InvalidParameter(format!("big_m must be >= 4, got {big_m}")));
    }
    if !(r1 > 0.0 && r2 > 0.0 && r1.is_finite() && r2.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "wavenumbers must be positive and finite, got ({r1}, {r2})"
        )));
    }
    let bound = approximation_bound(big_m);
    let end = big_m + 1;
    // The first chunk serially: most hits land early and this avoids
    // spinning up the pool for them.
    let first_hi = end.min(1 + CHUNK);
    let found = scan(1, first_hi, r1, r2, bound).or_else(|| {
        let n_chunks = (end - first_hi).div_ceil(CHUNK);
        (0..n_chunks).into_par_iter().find_map_first(|c| {
            let lo = first_hi + c * CHUNK;
            scan(lo, end.min(lo + CHUNK), r1, r2, bound)
        })
    });
    let m = found.ok_or(Error::NoHitFound { big_m })?;
    let (x1, err1) = residual(m, r1);
    let (x2, err2) = residual(m, r2);
    Ok(DiophantineHit {
        m,
        x1,
        x2,
        err1,
        err2,
        bound,
        big_m,
    })
}

/// A power of a transfer matrix inside the identity neighborhood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodPower {
    pub hit: DiophantineHit,
    pub power: Mat4,
    /// `‖A^m − I‖₂`
    pub dist: f64,
}

/// Finds `m` with `‖A^m − I‖₂ < delta`, enlarging the horizon `M ← 4M` up to
/// `max_retries` times when the search or the distance test fails.
pub fn power_in_neighborhood(
    a: &TransferMatrix,
    big_m: u64,
    delta: f64,
    max_retries: u32,
) -> Result<NeighborhoodPower> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("delta must be > 0, got {delta}")));
    }
    let mut horizon = big_m;
    let mut last_dist = f64::INFINITY;
    for attempt in 0..=max_retries {
        match simultaneous_approx(a.r1, a.r2, horizon) {
            Ok(hit) => {
                let power = a.a.powu(hit.m);
                let dist = op_norm(&(power - Mat4::IDENTITY));
                if dist < delta {
                    return Ok(NeighborhoodPower { hit, power, dist });
                }
                last_dist = dist;
            }
            Err(Error::NoHitFound { .. }) => {}
            Err(e) => return Err(e),
        }
        if attempt < max_retries {
            horizon = horizon.saturating_mul(4);
        }
    }
    Err(Error::NeighborhoodMiss {
        dist: last_dist,
        delta,
        big_m: horizon,
    })
}

/// Replays a recorded hit: recomputes the power and its distance to `I`.
pub fn replay_hit(a: &TransferMatrix, hit: &DiophantineHit) -> NeighborhoodPower {
    let power = a.a.powu(hit.m);
    let dist = op_norm(&(power - Mat4::IDENTITY));
    NeighborhoodPower { hit: *hit, power, dist }
}
