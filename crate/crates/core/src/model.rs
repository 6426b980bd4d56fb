//! Potential matrices, closed-form one-cell transfer matrices and the
//! four-element generator set of the Bernoulli transfer-matrix group.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::smallmat::{sym_eigen_2x2, Mat2, Mat4};

/// Lowest energy (exclusive) for which every channel is oscillatory: the
/// largest eigenvalue of any potential matrix on the Bernoulli support.
pub const ENERGY_FLOOR: f64 = 2.0;

/// Default Bernoulli parameter of the single-site distribution.
pub const DEFAULT_P: f64 = 0.5;

/// Values `(ω₁, ω₂) ∈ {0,1}²` of the two coupling constants on one cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BernoulliConfig {
    omega1: u8,
    omega2: u8,
}

impl BernoulliConfig {
    pub const ZERO_ZERO: Self = Self { omega1: 0, omega2: 0 };
    pub const ONE_ZERO: Self = Self { omega1: 1, omega2: 0 };
    pub const ZERO_ONE: Self = Self { omega1: 0, omega2: 1 };
    pub const ONE_ONE: Self = Self { omega1: 1, omega2: 1 };

    /// All four configurations, in the canonical order used for indexing.
    pub const ALL: [Self; 4] = [Self::ZERO_ZERO, Self::ONE_ZERO, Self::ZERO_ONE, Self::ONE_ONE];

    pub fn new(omega1: u8, omega2: u8) -> Result<Self> {
        if omega1 > 1 || omega2 > 1 {
            return Err(Error::InvalidParameter(format!(
                "Bernoulli configuration must be in {{0,1}}², got ({omega1}, {omega2})"
            )));
        }
        Ok(Self { omega1, omega2 })
    }

    pub fn omega1(&self) -> u8 {
        self.omega1
    }

    pub fn omega2(&self) -> u8 {
        self.omega2
    }

    /// Position in [`BernoulliConfig::ALL`].
    pub fn index(&self) -> usize {
        (self.omega1 + 2 * self.omega2) as usize
    }

    /// Probability of this configuration when `ω₁, ω₂` are i.i.d. Bernoulli(p).
    pub fn weight(&self, p: f64) -> f64 {
        let w = |x: u8| if x == 1 { p } else { 1.0 - p };
        w(self.omega1) * w(self.omega2)
    }
}

impl fmt::Display for BernoulliConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.omega1, self.omega2)
    }
}

/// `[[ω₁, 1], [1, ω₂]]`: the constant hopping plus the on-cell coupling.
pub fn potential_matrix(omega: BernoulliConfig) -> Mat2 {
    Mat2::new(omega.omega1 as f64, 1.0, 1.0, omega.omega2 as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialEigen {
    pub lambda1: f64,
    pub lambda2: f64,
    pub s: Mat2,
}

pub fn potential_eigen(omega: BernoulliConfig) -> PotentialEigen {
    let eig = sym_eigen_2x2(&potential_matrix(omega)).expect("potential matrices are symmetric by construction");
    PotentialEigen {
        lambda1: eig.lambda1,
        lambda2: eig.lambda2,
        s: eig.s,
    }
}

/// The rotation-type block `[[cos r, sin r / r], [−r sin r, cos r]]` acting on
/// `(u, u′)` of one decoupled channel with wavenumber `r` over a unit cell.
pub fn channel_block(r: f64, angle: f64) -> Mat2 {
    let (s, c) = angle.sin_cos();
    Mat2::new(c, s / r, -r * s, c)
}

/// Embeds two channel blocks into the `(u₁, u₂, u₁′, u₂′)` ordering.
pub(crate) fn interleave_channels(ch1: Mat2, ch2: Mat2) -> Mat4 {
    let mut m = Mat4::ZERO;
    for (k, ch) in [ch1, ch2].into_iter().enumerate() {
        m[(k, k)] = ch[(0, 0)];
        m[(k, k + 2)] = ch[(0, 1)];
        m[(k + 2, k)] = ch[(1, 0)];
        m[(k + 2, k + 2)] = ch[(1, 1)];
    }
    m
}

/// `blockdiag(s, s) · inner · blockdiag(sᵀ, sᵀ)`.
pub(crate) fn conjugate_by_eigenbasis(s: Mat2, inner: &Mat4) -> Mat4 {
    Mat4::block_diag(s) * *inner * Mat4::block_diag(s.transpose())
}

/// One-cell transfer matrix at energy `e` for a fixed configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferMatrix {
    pub e: f64,
    pub omega: BernoulliConfig,
    pub a: Mat4,
    /// Wavenumber of the lower-eigenvalue channel, `√(e − λ₁)`.
    pub r1: f64,
    /// Wavenumber of the upper-eigenvalue channel, `√(e − λ₂)`.
    pub r2: f64,
    /// Orthogonal eigenbasis of the potential matrix.
    pub s: Mat2,
}

impl TransferMatrix {
    /// Builds the transfer matrix directly from an eigenbasis and the two
    /// channel wavenumbers. Used to construct synthetic generators.
    pub fn from_channels(e: f64, omega: BernoulliConfig, s: Mat2, r1: f64, r2: f64) -> Result<Self> {
        if !(r1.is_finite() && r2.is_finite() && r2 > 0.0 && r1 >= r2) {
            return Err(Error::InvalidParameter(format!(
                "wavenumbers must satisfy r1 >= r2 > 0, got ({r1}, {r2})"
            )));
        }
        let inner = interleave_channels(channel_block(r1, r1), channel_block(r2, r2));
        Ok(Self {
            e,
            omega,
            a: conjugate_by_eigenbasis(s, &inner),
            r1,
            r2,
            s,
        })
    }

    /// `A^m` from the closed form, reducing each channel angle modulo 2π first.
    pub fn closed_form_power(&self, m: u64) -> Mat4 {
        let tau = std::f64::consts::TAU;
        let angle = |r: f64| {
            let t = m as f64 * r;
            t - tau * (t / tau).round()
        };
        let inner = interleave_channels(
            channel_block(self.r1, angle(self.r1)),
            channel_block(self.r2, angle(self.r2)),
        );
        conjugate_by_eigenbasis(self.s, &inner)
    }
}

pub fn transfer_matrix(e: f64, omega: BernoulliConfig) -> Result<TransferMatrix> {
    if !(e > ENERGY_FLOOR) || !e.is_finite() {
        return Err(Error::EnergyOutOfRange { e });
    }
    let eig = potential_eigen(omega);
    let r1 = (e - eig.lambda1).sqrt();
    let r2 = (e - eig.lambda2).sqrt();
    TransferMatrix::from_channels(e, omega, eig.s, r1, r2)
}

/// The four transfer matrices generating the group at one energy, together
/// with the sampling weights of the single-cell distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSet {
    pub e: f64,
    pub p: f64,
    /// Indexed by [`BernoulliConfig::index`].
    pub matrices: [TransferMatrix; 4],
    pub weights: [f64; 4],
}

pub fn generator_set(e: f64, p: f64) -> Result<GeneratorSet> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("p must lie in (0, 1), got {p}")));
    }
    let weights = BernoulliConfig::ALL.map(|w| w.weight(p));
    let mut set = GeneratorSet::with_weights(e, weights)?;
    set.p = p;
    Ok(set)
}

impl GeneratorSet {
    /// Generator set with arbitrary configuration weights (nonnegative,
    /// summing to one). `p` is recorded as NaN since it no longer applies.
    pub fn with_weights(e: f64, weights: [f64; 4]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "weights must be nonnegative and sum to 1, got {weights:?}"
            )));
        }
        let mut matrices = Vec::with_capacity(4);
        for omega in BernoulliConfig::ALL {
            matrices.push(transfer_matrix(e, omega)?);
        }
        Ok(Self {
            e,
            p: f64::NAN,
            matrices: matrices.try_into().unwrap(),
            weights,
        })
    }

    pub fn get(&self, omega: BernoulliConfig) -> &TransferMatrix {
        &self.matrices[omega.index()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smallmat::{is_symplectic, op_norm};
    use std::f64::consts::PI;

    #[test]
    fn potential_matrices() {
        assert_eq!(
            potential_matrix(BernoulliConfig::ZERO_ZERO),
            Mat2::new(0.0, 1.0, 1.0, 0.0)
        );
        assert_eq!(
            potential_matrix(BernoulliConfig::ONE_ONE),
            Mat2::new(1.0, 1.0, 1.0, 1.0)
        );
        assert_eq!(
            potential_matrix(BernoulliConfig::ONE_ZERO),
            Mat2::new(1.0, 1.0, 1.0, 0.0)
        );
        assert_eq!(
            potential_matrix(BernoulliConfig::ZERO_ONE),
            Mat2::new(0.0, 1.0, 1.0, 1.0)
        );
    }

    #[test]
    fn config_indexing_and_validation() {
        for (k, w) in BernoulliConfig::ALL.iter().enumerate() {
            assert_eq!(w.index(), k);
        }
        assert!(BernoulliConfig::new(2, 0).is_err());
        assert_eq!(BernoulliConfig::new(1, 0).unwrap(), BernoulliConfig::ONE_ZERO);
    }

    #[test]
    fn eigenvalues_stay_below_floor() {
        for omega in BernoulliConfig::ALL {
            let eig = potential_eigen(omega);
            assert!(eig.lambda1 <= eig.lambda2);
            assert!(eig.lambda2 <= ENERGY_FLOOR + 1e-15);
            let back = eig.s * Mat2::diag(eig.lambda1, eig.lambda2) * eig.s.transpose();
            assert!((back - potential_matrix(omega)).max_abs() < 1e-10);
        }
    }

    #[test]
    fn wavenumbers_at_three() {
        let t = transfer_matrix(3.0, BernoulliConfig::ZERO_ZERO).unwrap();
        assert!((t.r1 - 2.0).abs() < 1e-14);
        assert!((t.r2 - 2f64.sqrt()).abs() < 1e-14);
        let t = transfer_matrix(3.0, BernoulliConfig::ONE_ONE).unwrap();
        assert!((t.r1 - 3f64.sqrt()).abs() < 1e-14);
        assert!((t.r2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn full_rotation_block_is_identity() {
        let e = 2.0 + 4.0 * PI * PI;
        let t = transfer_matrix(e, BernoulliConfig::ONE_ONE).unwrap();
        assert!((t.r2 - 2.0 * PI).abs() < 1e-12);
        let b = channel_block(t.r2, t.r2);
        assert!((b - Mat2::IDENTITY).max_abs() < 1e-12);
        // Undo the eigenbasis and check the channel-2 sub-block of the core.
        let core = Mat4::block_diag(t.s.transpose()) * t.a * Mat4::block_diag(t.s);
        for (i, j, want) in [(1, 1, 1.0), (1, 3, 0.0), (3, 1, 0.0), (3, 3, 1.0)] {
            assert!((core[(i, j)] - want).abs() < 1e-11, "({i},{j})");
        }
    }

    #[test]
    fn rejects_low_energy() {
        assert_eq!(
            transfer_matrix(2.0, BernoulliConfig::ZERO_ZERO).unwrap_err(),
            Error::EnergyOutOfRange { e: 2.0 }
        );
        assert!(transfer_matrix(f64::NAN, BernoulliConfig::ZERO_ZERO).is_err());
        assert!(generator_set(2.0, 0.5).is_err());
        assert!(generator_set(3.0, 0.0).is_err());
        assert!(generator_set(3.0, 1.0).is_err());
    }

    #[test]
    fn generator_weights() {
        let g = generator_set(3.0, 0.5).unwrap();
        assert_eq!(g.weights, [0.25; 4]);
        let g = generator_set(3.0, 0.9).unwrap();
        assert!((g.weights[BernoulliConfig::ONE_ONE.index()] - 0.81).abs() < 1e-15);
        assert!((g.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for omega in BernoulliConfig::ALL {
            assert_eq!(g.get(omega).omega, omega);
            assert_eq!(g.get(omega).e, 3.0);
        }
    }

    #[test]
    fn symplectic_at_three() {
        for omega in BernoulliConfig::ALL {
            let t = transfer_matrix(3.0, omega).unwrap();
            assert!(is_symplectic(&t.a, 1e-10));
            assert!((t.a.det() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn closed_form_power_matches_repeated_product() {
        let t = transfer_matrix(4.7, BernoulliConfig::ONE_ZERO).unwrap();
        for m in [1u64, 2, 7, 33, 1000] {
            let diff = t.closed_form_power(m) - t.a.powu(m);
            assert!(diff.max_abs() < 1e-9, "m = {m}: {}", diff.max_abs());
        }
    }

    #[test]
    fn continuity_in_energy() {
        let h = 1e-6;
        let mut e = 2.05;
        while e < 50.0 {
            for omega in BernoulliConfig::ALL {
                let a = transfer_matrix(e, omega).unwrap().a;
                let b = transfer_matrix(e + h, omega).unwrap().a;
                // derivative of the cell map is bounded by a modest multiple of 1/r
                let slope = op_norm(&(b - a)) / h;
                assert!(slope < 100.0, "slope {slope} at e={e}");
            }
            e += 0.37;
        }
    }
}
