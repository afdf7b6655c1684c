//! Dense symmetric matrices and the small eigen/factorization kernel the
//! rest of the crate is built on.
//!
//! Every constraint value in the crate is a [`SymMat`]. Construction
//! symmetrizes its input, so `entries[i][j] == entries[j][i]` holds bit-for-bit
//! for every live value.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Largest asymmetry, relative to the largest entry magnitude (floored at 1),
/// that construction silently absorbs.
pub const ASYMMETRY_TOL: f64 = 1e-9;

const JACOBI_REL_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct SymMat {
    m: DMatrix<f64>,
}

impl SymMat {
    /// Symmetrizes `m` as `(m + mᵀ)/2`. Rejects non-square, empty, non-finite,
    /// or visibly asymmetric input.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = m.shape();
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        if rows == 0 {
            return Err(Error::EmptyMatrix);
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        let scale = m.iter().fold(1.0_f64, |acc, x| acc.max(x.abs()));
        let mut asym = 0.0_f64;
        for i in 0..rows {
            for j in (i + 1)..rows {
                asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        if asym > ASYMMETRY_TOL * scale {
            return Err(Error::Asymmetric { asymmetry: asym });
        }
        Ok(Self::symmetrized(m))
    }

    /// Symmetrizes without any asymmetry check. Callers guarantee a square,
    /// nonempty matrix.
    pub(crate) fn symmetrized(m: DMatrix<f64>) -> Self {
        let n = m.nrows();
        debug_assert_eq!(n, m.ncols());
        let mut out = m;
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (out[(i, j)] + out[(j, i)]);
                out[(i, j)] = avg;
                out[(j, i)] = avg;
            }
        }
        Self { m: out }
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        Self::new(DMatrix::from_fn(n, n, f))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::NotSquare {
                rows: n,
                cols: rows.first().map_or(0, Vec::len),
            });
        }
        Self::from_fn(n, |i, j| rows[i][j])
    }

    pub fn identity(n: usize) -> Self {
        assert!(n >= 1, "SymMat dimension must be >= 1");
        Self {
            m: DMatrix::identity(n, n),
        }
    }

    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "SymMat dimension must be >= 1");
        Self {
            m: DMatrix::zeros(n, n),
        }
    }

    pub fn scalar(x: f64) -> Self {
        Self {
            m: DMatrix::from_element(1, 1, x),
        }
    }

    pub fn from_diag(d: &[f64]) -> Self {
        assert!(!d.is_empty(), "SymMat dimension must be >= 1");
        Self {
            m: DMatrix::from_diagonal(&DVector::from_column_slice(d)),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.m.amax()
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    /// `Tr(self · other)` for symmetric arguments, i.e. the Frobenius inner product.
    pub fn inner(&self, other: &SymMat) -> f64 {
        self.m.dot(&other.m)
    }

    pub fn scaled(&self, s: f64) -> SymMat {
        SymMat { m: &self.m * s }
    }

    pub fn is_zero(&self) -> bool {
        self.m.iter().all(|&x| x == 0.0)
    }

    /// Sub-block as a plain matrix.
    pub fn block(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> DMatrix<f64> {
        self.m.view((r0, c0), (nr, nc)).into_owned()
    }

    pub fn eig(&self) -> Result<EigenDecomp> {
        sym_eig(self)
    }

    pub fn max_eig(&self) -> f64 {
        max_eig(self)
    }

    pub fn min_eig(&self) -> f64 {
        min_eig(self)
    }
}

impl Add for &SymMat {
    type Output = SymMat;
    fn add(self, rhs: &SymMat) -> SymMat {
        SymMat {
            m: &self.m + &rhs.m,
        }
    }
}

impl Sub for &SymMat {
    type Output = SymMat;
    fn sub(self, rhs: &SymMat) -> SymMat {
        SymMat {
            m: &self.m - &rhs.m,
        }
    }
}

impl Neg for &SymMat {
    type Output = SymMat;
    fn neg(self) -> SymMat {
        SymMat { m: -&self.m }
    }
}

impl Mul<f64> for &SymMat {
    type Output = SymMat;
    fn mul(self, rhs: f64) -> SymMat {
        self.scaled(rhs)
    }
}

#[derive(Debug, Clone)]
pub struct EigenDecomp {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, in eigenvalue order.
    pub eigenvectors: DMatrix<f64>,
}

impl EigenDecomp {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(&self.eigenvalues));
        &self.eigenvectors * d * self.eigenvectors.transpose()
    }
}

/// Cyclic Jacobi rotations. Returns the decomposition and whether the
/// off-diagonal norm reached `1e-12·‖S‖_F` within the sweep cap.
fn jacobi(s: &SymMat) -> (EigenDecomp, bool) {
    let n = s.dim();
    let mut a = s.m.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let target = JACOBI_REL_TOL * s.frobenius_norm();

    let off_norm = |a: &DMatrix<f64>| -> f64 {
        let mut acc = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                acc += 2.0 * a[(i, j)] * a[(i, j)];
            }
        }
        acc.sqrt()
    };

    let mut converged = off_norm(&a) <= target;
    let mut sweeps = 0;
    while !converged && sweeps < JACOBI_MAX_SWEEPS {
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;

                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;

                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
        sweeps += 1;
        converged = off_norm(&a) <= target;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let eigenvalues = order.iter().map(|&i| a[(i, i)]).collect();
    let eigenvectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (
        EigenDecomp {
            eigenvalues,
            eigenvectors,
        },
        converged,
    )
}

pub fn sym_eig(s: &SymMat) -> Result<EigenDecomp> {
    let (dec, converged) = jacobi(s);
    if converged {
        Ok(dec)
    } else {
        Err(Error::Internal(
            "Jacobi eigensolver exceeded its sweep cap".into(),
        ))
    }
}

/// Closed form for the 1x1 and 2x2 cases; Jacobi otherwise.
fn extreme_eigs(s: &SymMat) -> (f64, f64) {
    match s.dim() {
        1 => (s.m[(0, 0)], s.m[(0, 0)]),
        2 => {
            let (a, b, c) = (s.m[(0, 0)], s.m[(0, 1)], s.m[(1, 1)]);
            let mid = 0.5 * (a + c);
            let rad = (0.5 * (a - c)).hypot(b);
            (mid - rad, mid + rad)
        }
        _ => {
            let (dec, _) = jacobi(s);
            (dec.eigenvalues[0], *dec.eigenvalues.last().unwrap())
        }
    }
}

pub fn max_eig(s: &SymMat) -> f64 {
    extreme_eigs(s).1
}

pub fn min_eig(s: &SymMat) -> f64 {
    extreme_eigs(s).0
}

/// `S ⪯ tol·I`.
pub fn is_nsd(s: &SymMat, tol: f64) -> bool {
    max_eig(s) <= tol
}

/// `S ⪰ −tol·I`.
pub fn is_psd(s: &SymMat, tol: f64) -> bool {
    min_eig(s) >= -tol
}

/// `X − Y Z⁻¹ Yᵀ` for `M = [[X, Y], [Yᵀ, Z]]` where `X` is the leading
/// `split × split` block.
pub fn schur_complement(m: &SymMat, split: usize) -> Result<SymMat> {
    let n = m.dim();
    if split == 0 || split >= n {
        return Err(Error::DimensionMismatch(format!(
            "split {split} must lie strictly inside dimension {n}"
        )));
    }
    let k = n - split;
    let x = m.block(0, 0, split, split);
    let y = m.block(0, split, split, k);
    let z = SymMat::symmetrized(m.block(split, split, k, k));

    let dec = sym_eig(&z)?;
    let znorm = z.frobenius_norm();
    let min_abs = dec
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |acc, l| acc.min(l.abs()));
    if znorm == 0.0 || min_abs <= 1e-12 * znorm {
        return Err(Error::SingularBlock);
    }
    let inv_diag = DMatrix::from_diagonal(&DVector::from_iterator(
        k,
        dec.eigenvalues.iter().map(|l| 1.0 / l),
    ));
    let z_inv = &dec.eigenvectors * inv_diag * dec.eigenvectors.transpose();
    Ok(SymMat::symmetrized(x - &y * z_inv * y.transpose()))
}

/// Lower-triangular factor `L` with `L Lᵀ = S`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DMatrix<f64>,
}

impl Cholesky {
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim()).map(|i| self.l[(i, i)].ln()).sum::<f64>()
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut y = b.clone();
        for i in 0..n {
            let mut acc = y[i];
            for k in 0..i {
                acc -= self.l[(i, k)] * y[k];
            }
            y[i] = acc / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut acc = y[i];
            for k in (i + 1)..n {
                acc -= self.l[(k, i)] * y[k];
            }
            y[i] = acc / self.l[(i, i)];
        }
        y
    }

    pub fn inverse(&self) -> SymMat {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        let mut e = DVector::zeros(n);
        for j in 0..n {
            e.fill(0.0);
            e[j] = 1.0;
            out.set_column(j, &self.solve(&e));
        }
        SymMat::symmetrized(out)
    }
}

pub fn cholesky(s: &SymMat) -> Result<Cholesky> {
    cholesky_raw(s.as_matrix()).ok_or(Error::NotPositiveDefinite)
}

pub(crate) fn cholesky_raw(a: &DMatrix<f64>) -> Option<Cholesky> {
    let n = a.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut acc = a[(i, j)];
            for k in 0..j {
                acc -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = acc / d;
        }
    }
    Some(Cholesky { l })
}
