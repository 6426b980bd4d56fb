//! The Lie algebra sp(2, ℝ) of 4×4 Hamiltonian matrices.
//!
//! Elements are `Z` with `ZᵀJ + JZ = 0`. The fixed basis splits the algebra
//! as `V₁ ⊕ V₂` with
//!
//! * `V₁ = {[[A, 0], [0, −Aᵀ]]}` (4-dimensional, coordinates `a, b, c, d` of `A`),
//! * `V₂ = {[[0, C], [B, 0]] : B, C symmetric}` (6-dimensional).
//!
//! Coordinate order is `(a, b, c, d, C₁₁, C₂₂, C₁₂, B₁₁, B₂₂, B₁₂)`. The
//! off-diagonal symmetric unit is `E₁₂ + E₂₁`, so `C₁₂` is the value of one
//! off-diagonal entry.
//!
//! Rank decisions use the Frobenius inner product of the matrices, which in
//! this basis is the coordinate inner product weighted by [`BASIS_NORMS`].

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::diophantine::DiophantineHit;
use crate::error::{Error, Result};
use crate::model::{conjugate_by_eigenbasis, interleave_channels, BernoulliConfig, TransferMatrix};
use crate::smallmat::{op_norm, Mat2, Mat4, J};

pub const DIM: usize = 10;

/// Absolute membership tolerance, scaled by `max(1, max|z|)`.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Bound on `‖exp(LA) − A^m‖∞` for a logarithm to be accepted.
pub const ROUNDTRIP_TOL: f64 = 1e-8;

/// Default relative singular-value threshold for rank decisions.
pub const DEFAULT_SVD_TOL: f64 = 1e-7;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Frobenius norms of the basis elements, in coordinate order.
pub const BASIS_NORMS: [f64; DIM] = [SQRT2, SQRT2, SQRT2, SQRT2, 1.0, 1.0, SQRT2, 1.0, 1.0, SQRT2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sp2Element {
    pub z: Mat4,
    pub coords: [f64; DIM],
}

/// `‖ZᵀJ + JZ‖∞`.
pub fn membership_defect(z: &Mat4) -> f64 {
    (z.transpose() * J + J * *z).max_abs()
}

fn coords_of(z: &Mat4) -> [f64; DIM] {
    [
        z[(0, 0)],
        z[(0, 1)],
        z[(1, 0)],
        z[(1, 1)],
        z[(0, 2)],
        z[(1, 3)],
        0.5 * (z[(0, 3)] + z[(1, 2)]),
        z[(2, 0)],
        z[(3, 1)],
        0.5 * (z[(2, 1)] + z[(3, 0)]),
    ]
}

impl Sp2Element {
    pub const ZERO: Sp2Element = Sp2Element {
        z: Mat4::ZERO,
        coords: [0.0; DIM],
    };

    pub fn from_matrix(z: Mat4) -> Result<Self> {
        if !z.is_finite() {
            return Err(Error::NonFinite("sp(2) element"));
        }
        let defect = membership_defect(&z);
        if defect > MEMBERSHIP_TOL * z.max_abs().max(1.0) {
            return Err(Error::NotInAlgebra { defect });
        }
        Ok(Self {
            z,
            coords: coords_of(&z),
        })
    }

    pub fn from_coords(c: [f64; DIM]) -> Self {
        let a = Mat2::new(c[0], c[1], c[2], c[3]);
        let upper = Mat2::new(c[4], c[6], c[6], c[5]);
        let lower = Mat2::new(c[7], c[9], c[9], c[8]);
        let z = Mat4::from_blocks(a, upper, lower, -1.0 * a.transpose());
        Self { z, coords: c }
    }

    /// Element of `V₁` built from the upper-left block `A`.
    pub fn from_v1(a: Mat2) -> Self {
        Self::from_coords([a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)], 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    }

    /// Coordinates scaled so the Euclidean inner product equals the
    /// Frobenius inner product of the matrices.
    pub fn frobenius_coords(&self) -> [f64; DIM] {
        std::array::from_fn(|k| self.coords[k] * BASIS_NORMS[k])
    }

    pub fn from_frobenius_coords(f: &[f64]) -> Self {
        Self::from_coords(std::array::from_fn(|k| f[k] / BASIS_NORMS[k]))
    }

    pub fn norm(&self) -> f64 {
        self.z.frobenius()
    }

    /// `(a, b, c, d)` of the `V₁` component.
    pub fn v1_coords(&self) -> [f64; 4] {
        [self.coords[0], self.coords[1], self.coords[2], self.coords[3]]
    }

    /// `(C₁₁, C₂₂, C₁₂, B₁₁, B₂₂, B₁₂)` of the `V₂` component.
    pub fn v2_coords(&self) -> [f64; 6] {
        std::array::from_fn(|k| self.coords[4 + k])
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            z: s * self.z,
            coords: self.coords.map(|c| s * c),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            z: self.z - other.z,
            coords: std::array::from_fn(|k| self.coords[k] - other.coords[k]),
        }
    }
}

/// The fixed basis: four elements of `V₁` followed by six of `V₂`.
pub fn basis() -> [Sp2Element; DIM] {
    std::array::from_fn(|k| {
        let mut c = [0.0; DIM];
        c[k] = 1.0;
        Sp2Element::from_coords(c)
    })
}

/// `[x, y] = xy − yx`.
pub fn bracket(x: &Sp2Element, y: &Sp2Element) -> Sp2Element {
    let z = x.z * y.z - y.z * x.z;
    Sp2Element {
        z,
        coords: coords_of(&z),
    }
}

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
pub fn expm(x: &Mat4) -> Mat4 {
    // ∞-norm (max row sum)
    let norm = (0..4)
        .map(|i| (0..4).map(|j| x[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm > 0.25 {
        (norm / 0.25).log2().ceil() as i32
    } else {
        0
    };
    let y = (0.5f64).powi(squarings) * *x;
    // ‖y‖ ≤ 1/4: 18 terms put the remainder far below 1e-16.
    let mut term = Mat4::IDENTITY;
    let mut sum = Mat4::IDENTITY;
    for k in 1..=18 {
        term = (1.0 / k as f64) * (term * y);
        sum = sum + term;
    }
    for _ in 0..squarings {
        sum = sum * sum;
    }
    sum
}

/// Principal logarithm of one channel's rotation block at angle `theta`:
/// `θ·[[0, 1/r], [−r, 0]]`.
pub fn channel_log_block(r: f64, theta: f64) -> Mat2 {
    Mat2::new(0.0, theta / r, -theta * r, 0.0)
}

/// Logarithm of a near-identity power together with its audit data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogWitness {
    pub omega: BernoulliConfig,
    pub hit: DiophantineHit,
    pub la: Sp2Element,
    /// `‖exp(la) − A^m‖∞`
    pub roundtrip_err: f64,
}

/// Closed-form principal logarithm of `A^m` for the hit's exponent.
///
/// In the eigenbasis each channel of `A^m` is a rotation-type block at angle
/// `θᵢ = m·rᵢ − 2π·xᵢ`, so the logarithm is `θᵢ·[[0, 1/rᵢ], [−rᵢ, 0]]` per
/// channel, conjugated back. The result is only accepted if exponentiating
/// it reproduces `A^m`.
pub fn principal_log_power(a: &TransferMatrix, hit: &DiophantineHit) -> Result<LogWitness> {
    let power = a.a.powu(hit.m);
    let dist = op_norm(&(power - Mat4::IDENTITY));
    if !(dist < 1.0) {
        return Err(Error::OutsideLogDomain { dist });
    }
    let theta1 = hit.m as f64 * a.r1 - std::f64::consts::TAU * hit.x1 as f64;
    let theta2 = hit.m as f64 * a.r2 - std::f64::consts::TAU * hit.x2 as f64;
    let inner = interleave_channels(channel_log_block(a.r1, theta1), channel_log_block(a.r2, theta2));
    let la = Sp2Element::from_matrix(conjugate_by_eigenbasis(a.s, &inner))?;
    let roundtrip_err = (expm(&la.z) - power).max_abs();
    if !(roundtrip_err < ROUNDTRIP_TOL) {
        return Err(Error::RoundtripFailure {
            err: roundtrip_err,
            tol: ROUNDTRIP_TOL,
        });
    }
    Ok(LogWitness {
        omega: a.omega,
        hit: *hit,
        la,
        roundtrip_err,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosureRank {
    pub rank: usize,
    /// Smallest retained singular value relative to the largest, minimized
    /// over all rounds that contributed to the rank.
    pub min_kept_sv: f64,
    /// Number of bracket rounds needed to reach the final rank.
    pub depth: usize,
}

/// Orthonormal basis (rows, Frobenius coordinates) of the span of `rows`,
/// keeping singular values above `svd_tol·σ_max`.
fn span(rows: &[[f64; DIM]], svd_tol: f64) -> (Vec<[f64; DIM]>, f64) {
    if rows.is_empty() {
        return (Vec::new(), 0.0);
    }
    let m = DMatrix::from_fn(rows.len(), DIM, |i, j| rows[i][j]);
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if sigma_max == 0.0 {
        return (Vec::new(), 0.0);
    }
    let mut kept = Vec::new();
    let mut min_rel = f64::INFINITY;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        let rel = s / sigma_max;
        if rel > svd_tol {
            kept.push(std::array::from_fn(|j| v_t[(k, j)]));
            min_rel = min_rel.min(rel);
        }
    }
    (kept, min_rel)
}

/// Dimension of the Lie algebra generated by `gens`.
///
/// Each round replaces the current set by an orthonormal basis of the span of
/// itself and all pairwise brackets, until the rank stops growing.
pub fn lie_closure_rank(gens: &[Sp2Element], svd_tol: f64) -> Result<ClosureRank> {
    if gens.is_empty() || gens.len() > 64 {
        return Err(Error::InvalidParameter(format!(
            "lie_closure_rank needs 1..=64 generators, got {}",
            gens.len()
        )));
    }
    if !(svd_tol > 0.0) {
        return Err(Error::InvalidParameter(format!("svd_tol must be > 0, got {svd_tol}")));
    }
    // Generator scale carries no information about the span.
    let rows: Vec<[f64; DIM]> = gens
        .iter()
        .filter_map(|g| {
            let f = g.frobenius_coords();
            let n = f.iter().map(|x| x * x).sum::<f64>().sqrt();
            (n > 0.0 && n.is_finite()).then(|| f.map(|x| x / n))
        })
        .collect();
    let (mut current, mut margin) = span(&rows, svd_tol);
    let mut depth = 0;
    if current.is_empty() {
        return Ok(ClosureRank {
            rank: 0,
            min_kept_sv: 0.0,
            depth: 0,
        });
    }
    while current.len() < DIM {
        let elems: Vec<Sp2Element> = current.iter().map(|f| Sp2Element::from_frobenius_coords(f)).collect();
        let mut candidates = current.clone();
        for i in 0..elems.len() {
            for j in i + 1..elems.len() {
                candidates.push(bracket(&elems[i], &elems[j]).frobenius_coords());
            }
        }
        let (next, rel) = span(&candidates, svd_tol);
        if next.len() <= current.len() {
            break;
        }
        depth += 1;
        margin = margin.min(rel);
        current = next;
    }
    Ok(ClosureRank {
        rank: current.len(),
        min_kept_sv: margin,
        depth,
    })
}

/// Determinant witnesses of the explicit 4 + 6 construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplicitCertificate {
    /// Determinant of the upper-left blocks of the four `V₁` brackets.
    pub det_v1: f64,
    /// Determinant of the `V₂` coordinates of the six-element family.
    pub det_v2: f64,
    /// `|det_v1|` divided by the product of its column norms (in `[0, 1]`).
    pub det_v1_rel: f64,
    /// `|det_v2|` divided by the product of its column norms (in `[0, 1]`).
    pub det_v2_rel: f64,
    pub independent: bool,
}

fn det_and_ratio<const N: usize>(cols: &[[f64; N]; N]) -> (f64, f64) {
    let m = DMatrix::from_fn(N, N, |i, j| cols[j][i]);
    let det = m.determinant();
    let norms: f64 = cols
        .iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .product();
    let rel = if norms > 0.0 { (det.abs() / norms).min(1.0) } else { 0.0 };
    (det, rel)
}

/// The hand-built certificate: four brackets spanning `V₁`, then six elements
/// spanning `V₂`. `logs` is indexed by [`BernoulliConfig::index`].
pub fn explicit_certificate_path(logs: &[LogWitness; 4], threshold: f64) -> ExplicitCertificate {
    let la = |w: BernoulliConfig| &logs[w.index()].la;
    let (l00, l10, l01, l11) = (
        la(BernoulliConfig::ZERO_ZERO),
        la(BernoulliConfig::ONE_ZERO),
        la(BernoulliConfig::ZERO_ONE),
        la(BernoulliConfig::ONE_ONE),
    );
    let v1_family = [
        bracket(l10, l00),
        bracket(l01, l00),
        bracket(l10, l11),
        bracket(l01, l11),
    ];
    let (det_v1, det_v1_rel) = det_and_ratio(&v1_family.map(|b| b.v1_coords()));

    let z1 = Sp2Element::from_v1(Mat2::new(1.0, 0.0, 0.0, 0.0));
    let z2 = Sp2Element::from_v1(Mat2::new(0.0, 0.0, 0.0, 1.0));
    let z3 = Sp2Element::from_v1(Mat2::new(1.0, 1.0, 1.0, 1.0));
    let d1 = l10.sub(l00);
    let d2 = l10.sub(l11);
    let d3 = l01.sub(l00);
    let v2_family = [d1, d2, d3, bracket(&d1, &z1), bracket(&d2, &z2), bracket(&d3, &z3)];
    let (det_v2, det_v2_rel) = det_and_ratio(&v2_family.map(|b| b.v2_coords()));

    ExplicitCertificate {
        det_v1,
        det_v2,
        det_v1_rel,
        det_v2_rel,
        independent: det_v1_rel > threshold && det_v2_rel > threshold,
    }
}
