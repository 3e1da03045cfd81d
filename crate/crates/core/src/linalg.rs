//! Small dense complex kernels shared by the contraction and update code:
//! Kronecker products, Hermitian pencil solves and rank-revealing linear
//! solves against positive-semidefinite norm matrices.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64;

use crate::error::{RageError, Result};

pub type C64 = Complex64;
pub type CMat = Array2<C64>;
pub type CVec = Array1<C64>;

pub const ONE: C64 = C64::new(1.0, 0.0);
pub const ZERO: C64 = C64::new(0.0, 0.0);

/// Relative eigenvalue cutoff below which norm-matrix directions are
/// treated as null and projected out.
pub const DEFAULT_PENCIL_CUTOFF: f64 = 1e-10;

/// Hermitian eigendecomposition with eigenvectors as matrix columns.
///
/// The backing LAPACK binding hands back the eigenvector matrix of the
/// elementwise-conjugated input when the array is row-major, so the raw
/// columns satisfy conj(h) v = w v rather than h v = w v. Conjugating the
/// result restores the usual column convention; all callers go through here.
fn eigh_cols(m: &CMat) -> Result<(Array1<f64>, CMat)> {
    let (w, v) = m.eigh(UPLO::Lower)?;
    Ok((w, v.mapv(|z| z.conj())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PencilSide {
    Min,
    Max,
}

/// A generalized Hermitian eigenproblem h x = lambda n x with
/// positive-semidefinite n.
#[derive(Debug, Clone)]
pub struct HermitianPencil {
    pub h_mat: CMat,
    pub n_mat: CMat,
}

impl HermitianPencil {
    pub fn new(h_mat: CMat, n_mat: CMat) -> Self {
        Self { h_mat, n_mat }
    }

    /// Max relative deviation from Hermiticity over both matrices.
    pub fn hermiticity_defect(&self) -> f64 {
        defect(&self.h_mat).max(defect(&self.n_mat))
    }
}

fn defect(m: &CMat) -> f64 {
    let scale = m.iter().map(|z| z.norm()).fold(0.0_f64, f64::max).max(1e-300);
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst / scale
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ra, ca) = a.dim();
    let (rb, cb) = b.dim();
    let mut out = CMat::zeros((ra * rb, ca * cb));
    for i in 0..ra {
        for p in 0..ca {
            let aip = a[(i, p)];
            if aip == ZERO {
                continue;
            }
            for j in 0..rb {
                for q in 0..cb {
                    out[(i * rb + j, p * cb + q)] = aip * b[(j, q)];
                }
            }
        }
    }
    out
}

pub fn dagger(m: &CMat) -> CMat {
    m.t().mapv(|z| z.conj())
}

pub fn trace(m: &CMat) -> C64 {
    m.diag().sum()
}

pub fn hermitize(m: &CMat) -> CMat {
    (m + &dagger(m)).mapv(|z| z * 0.5)
}

pub fn identity(n: usize) -> CMat {
    CMat::eye(n)
}

pub fn unitarity_defect(v: &CMat) -> f64 {
    let g = dagger(v).dot(v);
    let n = v.ncols();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            let want = if i == j { ONE } else { ZERO };
            worst = worst.max((g[(i, j)] - want).norm());
        }
    }
    worst
}

/// Eigendecomposition of the PSD norm matrix, truncated at
/// `cutoff * lambda_max`. Returns the whitening map B with n = (B^+)† B^+ on
/// the retained range, i.e. B = V_k diag(1/sqrt(w_k)).
fn whiten_psd(n_mat: &CMat, cutoff: f64) -> Result<CMat> {
    let (w, v) = eigh_cols(&hermitize(n_mat))?;
    let wmax = w.iter().cloned().fold(0.0_f64, f64::max);
    if wmax <= 0.0 {
        return Err(RageError::DegenerateNorm);
    }
    let keep: Vec<usize> = (0..w.len()).filter(|&i| w[i] > cutoff * wmax).collect();
    if keep.is_empty() {
        return Err(RageError::DegenerateNorm);
    }
    let dim = n_mat.nrows();
    let mut b = CMat::zeros((dim, keep.len()));
    for (col, &i) in keep.iter().enumerate() {
        let s = 1.0 / w[i].sqrt();
        for r in 0..dim {
            b[(r, col)] = v[(r, i)] * s;
        }
    }
    Ok(b)
}

/// Extremal eigenpair of h x = lambda n x, restricted to the numerical range
/// of n. Near-null directions of n (eigenvalue < cutoff * max) are projected
/// out before the solve.
pub fn solve_hermitian_pencil(
    pencil: &HermitianPencil,
    side: PencilSide,
    cutoff: f64,
) -> Result<(f64, CVec)> {
    solve_hermitian_pencil_with_incumbent(pencil, side, cutoff, None)
}

/// Like [`solve_hermitian_pencil`] but when the two extremal eigenvalues are
/// degenerate (within 1e-12 relative) prefers the eigenvector with the largest
/// overlap with `incumbent`, for trajectory stability in sweeps.
pub fn solve_hermitian_pencil_with_incumbent(
    pencil: &HermitianPencil,
    side: PencilSide,
    cutoff: f64,
    incumbent: Option<&CVec>,
) -> Result<(f64, CVec)> {
    let b = whiten_psd(&pencil.n_mat, cutoff)?;
    let hp = hermitize(&dagger(&b).dot(&pencil.h_mat).dot(&b));
    let (w, v) = eigh_cols(&hp)?;
    let m = w.len();
    let order: Vec<usize> = match side {
        PencilSide::Min => (0..m).collect(),
        PencilSide::Max => (0..m).rev().collect(),
    };
    let best = order[0];
    let mut pick = best;
    if let Some(x0) = incumbent {
        let scale = w.iter().cloned().fold(0.0_f64, |a, x| a.max(x.abs())).max(1.0);
        let mut best_ov = -1.0_f64;
        for &i in &order {
            if (w[i] - w[best]).abs() >= 1e-12 * scale {
                break;
            }
            let y = v.column(i);
            let x = b.dot(&y.to_owned());
            let ov = x
                .iter()
                .zip(x0.iter())
                .map(|(a, c)| a.conj() * c)
                .sum::<C64>()
                .norm()
                / (vec_norm(&x) * vec_norm(x0)).max(1e-300);
            if ov > best_ov {
                best_ov = ov;
                pick = i;
            }
        }
    }
    let x = b.dot(&v.column(pick).to_owned());
    Ok((w[pick], x))
}

pub fn vec_norm(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Least-squares solve n x = rhs for PSD n via truncated eigendecomposition.
/// Directions with eigenvalue below `cutoff * max` are dropped.
pub fn solve_psd_linear(n_mat: &CMat, rhs: &CVec, cutoff: f64) -> Result<CVec> {
    let (w, v) = eigh_cols(&hermitize(n_mat))?;
    let wmax = w.iter().cloned().fold(0.0_f64, f64::max);
    if wmax <= 0.0 {
        return Err(RageError::DegenerateNorm);
    }
    let dim = n_mat.nrows();
    let mut x = CVec::zeros(dim);
    for i in 0..w.len() {
        if w[i] <= cutoff * wmax {
            continue;
        }
        let coeff = v
            .column(i)
            .iter()
            .zip(rhs.iter())
            .map(|(a, b)| a.conj() * b)
            .sum::<C64>()
            / w[i];
        for r in 0..dim {
            x[r] += coeff * v[(r, i)];
        }
    }
    Ok(x)
}

/// Full eigendecomposition of a Hermitian matrix, ascending eigenvalues.
pub fn eigh_ascending(m: &CMat) -> Result<(Array1<f64>, CMat)> {
    eigh_cols(&hermitize(m))
}
