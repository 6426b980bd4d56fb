//! Fixed-size real linear algebra on 2×2 and 4×4 matrices.
//!
//! Everything here works on plain row-major arrays held by value. The 4×4
//! routines are the hot loop of the Lyapunov estimator, so they avoid heap
//! allocation entirely.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on `m - mᵀ` accepted by [`sym_eigen_2x2`].
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Row-major 2×2 real matrix.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2(pub [f64; 4]);

/// Row-major 4×4 real matrix.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat4(pub [f64; 16]);

impl fmt::Debug for Mat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat2[")?;
        for i in 0..2 {
            writeln!(f, "  {:+.6e} {:+.6e}", self[(i, 0)], self[(i, 1)])?;
        }
        write!(f, "]")
    }
}

impl fmt::Debug for Mat4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat4[")?;
        for i in 0..4 {
            writeln!(
                f,
                "  {:+.6e} {:+.6e} {:+.6e} {:+.6e}",
                self[(i, 0)],
                self[(i, 1)],
                self[(i, 2)],
                self[(i, 3)]
            )?;
        }
        write!(f, "]")
    }
}

impl Mat2 {
    pub const ZERO: Mat2 = Mat2([0.0; 4]);
    pub const IDENTITY: Mat2 = Mat2([1.0, 0.0, 0.0, 1.0]);

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2([a, b, c, d])
    }

    pub fn diag(a: f64, d: f64) -> Self {
        Mat2([a, 0.0, 0.0, d])
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        Mat2([m[0], m[2], m[1], m[3]])
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0] * m[3] - m[1] * m[2]
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl Index<(usize, usize)> for Mat2 {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.0[2 * i + j]
    }
}

impl IndexMut<(usize, usize)> for Mat2 {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.0[2 * i + j]
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &rhs.0);
        Mat2([
            a[0] * b[0] + a[1] * b[2],
            a[0] * b[1] + a[1] * b[3],
            a[2] * b[0] + a[3] * b[2],
            a[2] * b[1] + a[3] * b[3],
        ])
    }
}

impl Mul<Mat2> for f64 {
    type Output = Mat2;
    fn mul(self, rhs: Mat2) -> Mat2 {
        Mat2(rhs.0.map(|x| self * x))
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, rhs: Mat2) -> Mat2 {
        Mat2(std::array::from_fn(|k| self.0[k] + rhs.0[k]))
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, rhs: Mat2) -> Mat2 {
        Mat2(std::array::from_fn(|k| self.0[k] - rhs.0[k]))
    }
}

impl Mat4 {
    pub const ZERO: Mat4 = Mat4([0.0; 16]);
    pub const IDENTITY: Mat4 = Mat4([
        1.0, 0.0, 0.0, 0.0, //
        0.0, 1.0, 0.0, 0.0, //
        0.0, 0.0, 1.0, 0.0, //
        0.0, 0.0, 0.0, 1.0,
    ]);

    pub fn from_rows(rows: [[f64; 4]; 4]) -> Self {
        Mat4(std::array::from_fn(|k| rows[k / 4][k % 4]))
    }

    pub fn diag(d: [f64; 4]) -> Self {
        let mut m = Mat4::ZERO;
        for (i, v) in d.into_iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Assembles `[[tl, tr], [bl, br]]` from 2×2 blocks.
    pub fn from_blocks(tl: Mat2, tr: Mat2, bl: Mat2, br: Mat2) -> Self {
        let mut m = Mat4::ZERO;
        for i in 0..2 {
            for j in 0..2 {
                m[(i, j)] = tl[(i, j)];
                m[(i, j + 2)] = tr[(i, j)];
                m[(i + 2, j)] = bl[(i, j)];
                m[(i + 2, j + 2)] = br[(i, j)];
            }
        }
        m
    }

    /// `blockdiag(s, s)`.
    pub fn block_diag(s: Mat2) -> Self {
        Mat4::from_blocks(s, Mat2::ZERO, Mat2::ZERO, s)
    }

    /// Returns the 2×2 block at block position `(bi, bj)`, each in `{0, 1}`.
    pub fn block(&self, bi: usize, bj: usize) -> Mat2 {
        let (r, c) = (2 * bi, 2 * bj);
        Mat2([self[(r, c)], self[(r, c + 1)], self[(r + 1, c)], self[(r + 1, c + 1)]])
    }

    pub fn transpose(&self) -> Self {
        Mat4(std::array::from_fn(|k| self.0[4 * (k % 4) + k / 4]))
    }

    /// Largest absolute entry (the entrywise ∞-norm).
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn column(&self, j: usize) -> [f64; 4] {
        std::array::from_fn(|i| self[(i, j)])
    }

    pub fn mul_vec(&self, v: &[f64; 4]) -> [f64; 4] {
        std::array::from_fn(|i| {
            let r = &self.0[4 * i..4 * i + 4];
            r[0] * v[0] + r[1] * v[1] + r[2] * v[2] + r[3] * v[3]
        })
    }

    /// Determinant by Gaussian elimination with partial pivoting.
    pub fn det(&self) -> f64 {
        let mut a = self.0;
        let mut det = 1.0;
        for k in 0..4 {
            let pivot = (k..4)
                .max_by(|&x, &y| a[4 * x + k].abs().total_cmp(&a[4 * y + k].abs()))
                .unwrap();
            if a[4 * pivot + k] == 0.0 {
                return 0.0;
            }
            if pivot != k {
                for j in 0..4 {
                    a.swap(4 * k + j, 4 * pivot + j);
                }
                det = -det;
            }
            let p = a[4 * k + k];
            det *= p;
            for i in k + 1..4 {
                let f = a[4 * i + k] / p;
                for j in k..4 {
                    a[4 * i + j] -= f * a[4 * k + j];
                }
            }
        }
        det
    }

    /// `self^n` by binary exponentiation.
    pub fn powu(&self, mut n: u64) -> Mat4 {
        let mut base = *self;
        let mut acc = Mat4::IDENTITY;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc * base;
            }
            n >>= 1;
            if n > 0 {
                base = base * base;
            }
        }
        acc
    }
}

impl Index<(usize, usize)> for Mat4 {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.0[4 * i + j]
    }
}

impl IndexMut<(usize, usize)> for Mat4 {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.0[4 * i + j]
    }
}

impl Mul for Mat4 {
    type Output = Mat4;
    #[inline]
    fn mul(self, rhs: Mat4) -> Mat4 {
        let (a, b) = (&self.0, &rhs.0);
        let mut out = [0.0; 16];
        for i in 0..4 {
            for k in 0..4 {
                let aik = a[4 * i + k];
                for j in 0..4 {
                    out[4 * i + j] += aik * b[4 * k + j];
                }
            }
        }
        Mat4(out)
    }
}

impl Mul<Mat4> for f64 {
    type Output = Mat4;
    fn mul(self, rhs: Mat4) -> Mat4 {
        Mat4(rhs.0.map(|x| self * x))
    }
}

impl Add for Mat4 {
    type Output = Mat4;
    fn add(self, rhs: Mat4) -> Mat4 {
        Mat4(std::array::from_fn(|k| self.0[k] + rhs.0[k]))
    }
}

impl Sub for Mat4 {
    type Output = Mat4;
    fn sub(self, rhs: Mat4) -> Mat4 {
        Mat4(std::array::from_fn(|k| self.0[k] - rhs.0[k]))
    }
}

impl Neg for Mat4 {
    type Output = Mat4;
    fn neg(self) -> Mat4 {
        Mat4(self.0.map(|x| -x))
    }
}

/// The standard symplectic form `J = [[0, I₂], [−I₂, 0]]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SymplecticForm;

impl SymplecticForm {
    pub fn matrix(&self) -> Mat4 {
        Mat4::from_blocks(Mat2::ZERO, Mat2::IDENTITY, -1.0 * Mat2::IDENTITY, Mat2::ZERO)
    }
}

/// `J` as a constant.
pub const J: Mat4 = Mat4([
    0.0, 0.0, 1.0, 0.0, //
    0.0, 0.0, 0.0, 1.0, //
    -1.0, 0.0, 0.0, 0.0, //
    0.0, -1.0, 0.0, 0.0,
]);

/// Eigen-decomposition of a symmetric 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymEigen2 {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Orthogonal; column `k` is the eigenvector of `lambda{k+1}`.
    pub s: Mat2,
}

/// Diagonalizes a symmetric 2×2 matrix as `s·diag(λ₁, λ₂)·sᵀ` with `λ₁ ≤ λ₂`.
///
/// Each eigenvector column is normalized so that its first nonzero component
/// is positive, which makes `s` a deterministic function of `m`.
pub fn sym_eigen_2x2(m: &Mat2) -> Result<SymEigen2> {
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    if !m.is_finite() {
        return Err(Error::NonFinite("sym_eigen_2x2 input"));
    }
    if (b - c).abs() > SYMMETRY_TOL {
        return Err(Error::NotSymmetric { defect: (b - c).abs() });
    }
    let b = 0.5 * (b + c);
    let mean = 0.5 * (a + d);
    let half_diff = 0.5 * (a - d);
    let rad = half_diff.hypot(b);
    let (lambda1, lambda2) = (mean - rad, mean + rad);

    // Eigenvector of lambda1, picked from whichever row of (m - λ₁I) is better
    // conditioned; the second column is its exact perpendicular.
    let v1 = if b == 0.0 {
        if a <= d {
            [1.0, 0.0]
        } else {
            [0.0, 1.0]
        }
    } else {
        let r1 = [b, lambda1 - a];
        let r2 = [lambda1 - d, b];
        let pick = if r1[0].hypot(r1[1]) >= r2[0].hypot(r2[1]) {
            r1
        } else {
            r2
        };
        let n = pick[0].hypot(pick[1]);
        [pick[0] / n, pick[1] / n]
    };
    let v1 = canonical_sign(v1);
    let v2 = canonical_sign([-v1[1], v1[0]]);
    Ok(SymEigen2 {
        lambda1,
        lambda2,
        s: Mat2::new(v1[0], v2[0], v1[1], v2[1]),
    })
}

fn canonical_sign(v: [f64; 2]) -> [f64; 2] {
    let first = if v[0] != 0.0 { v[0] } else { v[1] };
    if first < 0.0 {
        [-v[0], -v[1]]
    } else {
        v
    }
}

/// Householder QR factorization `a = q·r` with a nonnegative diagonal in `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Qr4 {
    pub q: Mat4,
    pub r: Mat4,
}

pub fn qr_4x4(a: &Mat4) -> Qr4 {
    let mut r = *a;
    let mut q = Mat4::IDENTITY;
    for k in 0..3 {
        let mut norm2 = 0.0;
        for i in k..4 {
            norm2 += r[(i, k)] * r[(i, k)];
        }
        let norm = norm2.sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if r[(k, k)] >= 0.0 { -norm } else { norm };
        // v = x - alpha e_k, stored in the trailing part of a length-4 array.
        let mut v = [0.0; 4];
        for i in k..4 {
            v[i] = r[(i, k)];
        }
        v[k] -= alpha;
        let vnorm2 = norm2 - r[(k, k)] * r[(k, k)] + v[k] * v[k];
        if vnorm2 == 0.0 {
            continue;
        }
        let tau = 2.0 / vnorm2;
        // r <- (I - tau v vᵀ) r
        for j in k..4 {
            let mut s = 0.0;
            for i in k..4 {
                s += v[i] * r[(i, j)];
            }
            s *= tau;
            for i in k..4 {
                r[(i, j)] -= s * v[i];
            }
        }
        // q <- q (I - tau v vᵀ)
        for i in 0..4 {
            let mut s = 0.0;
            for l in k..4 {
                s += q[(i, l)] * v[l];
            }
            s *= tau;
            for l in k..4 {
                q[(i, l)] -= s * v[l];
            }
        }
        for i in k + 1..4 {
            r[(i, k)] = 0.0;
        }
    }
    for k in 0..4 {
        if r[(k, k)] < 0.0 {
            for j in 0..4 {
                r[(k, j)] = -r[(k, j)];
                q[(j, k)] = -q[(j, k)];
            }
        }
    }
    Qr4 { q, r }
}

/// Spectral norm by power iteration on `aᵀa`.
pub fn op_norm(a: &Mat4) -> f64 {
    const MIN_ITERS: usize = 200;
    const MAX_ITERS: usize = 20_000;
    const CONVERGED: f64 = 1e-12;

    let ata = a.transpose() * *a;
    let scale = ata.max_abs();
    if scale == 0.0 {
        return 0.0;
    }
    // Start away from any coordinate hyperplane so the top eigenvector is
    // almost surely represented.
    let mut v = [0.8, 0.53, 0.61, 0.37];
    let mut lambda = 0.0;
    for it in 0..MAX_ITERS {
        let w = ata.mul_vec(&v);
        let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n == 0.0 {
            // Start vector landed in the null space; perturb deterministically.
            v = [0.1, -0.7, 0.3, 0.9];
            continue;
        }
        let next = v.iter().zip(&w).map(|(x, y)| x * y).sum::<f64>();
        v = w.map(|x| x / n);
        let converged = (next - lambda).abs() <= CONVERGED * next.abs();
        lambda = next;
        if it + 1 >= MIN_ITERS && converged {
            break;
        }
    }
    // Rayleigh quotient of the normalized vector.
    let w = ata.mul_vec(&v);
    let rq = v.iter().zip(&w).map(|(x, y)| x * y).sum::<f64>();
    rq.max(lambda).max(0.0).sqrt()
}

/// `‖aᵀJa − J‖∞` (largest absolute entry).
pub fn symplectic_defect(a: &Mat4) -> f64 {
    (a.transpose() * J * *a - J).max_abs()
}

pub fn is_symplectic(a: &Mat4, tol: f64) -> bool {
    symplectic_defect(a) <= tol
}
