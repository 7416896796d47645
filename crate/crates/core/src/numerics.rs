//! Dense matrix primitives shared by every other module.
//!
//! Matrices are `nalgebra::DMatrix<f64>` (column-major). Random draws come
//! from ChaCha20 seeded through [`seeded_rng`], so a seed reproduces the same
//! bits on every platform.

use nalgebra::{DMatrix, SVD};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{StandardNormal, Uniform};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

/// Iteration cap handed to the implicit-shift QR sweep inside the SVD.
const SVD_MAX_ITERS: usize = 10_000;

/// Thin SVD `A = U diag(S) V^T` with `S` sorted non-increasing.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
}

impl Svd {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for (j, s) in self.s.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.transpose()
    }
}

pub fn seeded_rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Standard-normal matrix filled in column-major order.
pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Uniform `[lo, hi)` matrix filled in column-major order.
pub fn uniform_matrix<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> Matrix {
    let dist = Uniform::new(lo, hi).expect("uniform bounds must be finite and ordered");
    Matrix::from_fn(rows, cols, |_, _| rng.sample(dist))
}

pub fn svd(a: &Matrix) -> Result<Svd> {
    let (rows, cols) = a.shape();
    let raw = SVD::try_new(a.clone(), true, true, f64::EPSILON, SVD_MAX_ITERS)
        .ok_or(Error::DecompositionFailure { rows, cols })?;
    let u = raw.u.ok_or(Error::DecompositionFailure { rows, cols })?;
    let v_t = raw.v_t.ok_or(Error::DecompositionFailure { rows, cols })?;
    let s_raw: Vec<f64> = raw.singular_values.iter().map(|s| s.abs()).collect();

    let mut order: Vec<usize> = (0..s_raw.len()).collect();
    order.sort_by(|&i, &j| s_raw[j].total_cmp(&s_raw[i]));

    let r = order.len();
    let mut u_sorted = Matrix::zeros(rows, r);
    let mut v_sorted = Matrix::zeros(cols, r);
    let mut s = Vec::with_capacity(r);
    for (dst, &src) in order.iter().enumerate() {
        u_sorted.set_column(dst, &u.column(src));
        v_sorted.set_column(dst, &v_t.row(src).transpose());
        s.push(s_raw[src]);
    }
    Ok(Svd {
        u: u_sorted,
        s,
        v: v_sorted,
    })
}

/// Singular values only, sorted non-increasing.
pub fn singular_values(a: &Matrix) -> Result<Vec<f64>> {
    let (rows, cols) = a.shape();
    let raw = SVD::try_new(a.clone(), false, false, f64::EPSILON, SVD_MAX_ITERS)
        .ok_or(Error::DecompositionFailure { rows, cols })?;
    let mut s: Vec<f64> = raw.singular_values.iter().map(|s| s.abs()).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Haar-distributed orthogonal matrix drawn from `rng`.
///
/// QR of a standard-Gaussian matrix, with the columns of `Q` flipped so
/// that `R` has a non-negative diagonal.
pub fn haar_orthogonal_with<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Matrix {
    let g = gaussian_matrix(dim, dim, rng);
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

pub fn haar_orthogonal(dim: usize, seed: u64) -> Matrix {
    haar_orthogonal_with(dim, &mut seeded_rng(seed))
}

/// `I_K ⊗ 1_n^T`: the K×(Kn) one-hot label layout.
pub fn kron_identity_ones(k: usize, n: usize) -> Matrix {
    Matrix::from_fn(k, k * n, |row, col| if col / n == row { 1.0 } else { 0.0 })
}

pub fn frob_norm(a: &Matrix) -> f64 {
    a.norm()
}

pub fn spectral_norm(a: &Matrix) -> Result<f64> {
    Ok(singular_values(a)?.first().copied().unwrap_or(0.0))
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.ncols() != b.nrows() {
        return Err(Error::Dimension {
            op: "matmul",
            lhs: a.shape(),
            rhs: b.shape(),
        });
    }
    Ok(a * b)
}
