//! Nearly-orthonormal synthetic classification data.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::audit::InequalityCheck;
use crate::error::{Error, Result};
use crate::numerics::{self, kron_identity_ones, Matrix};

pub const DATA_MAGIC: &[u8; 8] = b"DLNDATA1";

/// Inputs `X` (d×N, columns grouped class by class) for `K` balanced classes
/// of `n` samples each. Labels are implied by the layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Matrix,
    k: usize,
    n: usize,
}

impl Dataset {
    pub fn new(x: Matrix, k: usize, n: usize) -> Result<Self> {
        if k == 0 || n == 0 {
            return Err(Error::Precondition(format!(
                "need K >= 1 and n >= 1, got K = {k}, n = {n}"
            )));
        }
        if x.ncols() != k * n {
            return Err(Error::Layout {
                columns: x.ncols(),
                classes: k,
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Precondition("dataset contains non-finite entries".into()));
        }
        Ok(Self { x, k, n })
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    /// Label matrix `I_K ⊗ 1_n^T`.
    pub fn y(&self) -> Matrix {
        kron_identity_ones(self.k, self.n)
    }

    pub fn classes(&self) -> usize {
        self.k
    }

    pub fn per_class(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.x.nrows()
    }

    pub fn samples(&self) -> usize {
        self.k * self.n
    }
}

/// Synthetic data: left singular vectors of a Gaussian matrix plus a
/// unit-Frobenius-norm uniform perturbation.
pub fn generate(d: usize, k: usize, n: usize, seed: u64) -> Result<Dataset> {
    generate_with_noise(d, k, n, seed, 1.0)
}

/// Same recipe as [`generate`] with the perturbation rescaled to Frobenius
/// norm `noise`. `noise = 1` is the standard recipe; smaller values give
/// tighter orthonormality.
pub fn generate_with_noise(d: usize, k: usize, n: usize, seed: u64, noise: f64) -> Result<Dataset> {
    let samples = k * n;
    if k == 0 || n == 0 {
        return Err(Error::Precondition(format!(
            "need K >= 1 and n >= 1, got K = {k}, n = {n}"
        )));
    }
    if d < samples {
        return Err(Error::Precondition(format!(
            "data dimension d = {d} must be at least N = K*n = {samples}"
        )));
    }
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(Error::Precondition(format!("noise scale must be >= 0, got {noise}")));
    }

    let mut rng = numerics::seeded_rng(seed);
    let a = numerics::gaussian_matrix(d, samples, &mut rng);
    let b = numerics::uniform_matrix(d, samples, 0.0, 1.0, &mut rng);

    let mut x = numerics::svd(&a)?.u;
    for mut col in x.column_iter_mut() {
        let pivot = col.iter().copied().fold(0.0f64, |best, v| {
            if v.abs() > best.abs() {
                v
            } else {
                best
            }
        });
        if pivot < 0.0 {
            col.neg_mut();
        }
    }

    let b_norm = b.norm();
    if b_norm > 0.0 {
        x += b * (noise / b_norm);
    }
    Dataset::new(x, k, n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalityAudit {
    pub theta_hat: f64,
    pub max_norm_dev: f64,
    pub max_inner: f64,
    pub compliant: bool,
}

/// Tightest θ with `|‖x_i‖² − 1| ≤ θ/N` and `|⟨x_i, x_j⟩| ≤ θ/N`.
pub fn measure_theta(ds: &Dataset) -> OrthogonalityAudit {
    let gram = ds.x.transpose() * &ds.x;
    let samples = ds.samples();
    let mut max_norm_dev = 0.0f64;
    let mut max_inner = 0.0f64;
    for j in 0..samples {
        for i in 0..samples {
            let g = gram[(i, j)];
            if i == j {
                max_norm_dev = max_norm_dev.max((g - 1.0).abs());
            } else {
                max_inner = max_inner.max(g.abs());
            }
        }
    }
    let theta_hat = samples as f64 * max_norm_dev.max(max_inner);
    OrthogonalityAudit {
        theta_hat,
        max_norm_dev,
        max_inner,
        compliant: theta_hat < 0.25 && ds.dim() >= samples,
    }
}

/// Class means as the columns of a d×K matrix.
pub fn class_mean_matrix(ds: &Dataset) -> Matrix {
    let (k, n) = (ds.k, ds.n);
    Matrix::from_fn(ds.dim(), k, |row, class| {
        (0..n).map(|i| ds.x[(row, class * n + i)]).sum::<f64>() / n as f64
    })
}

/// Class means repeated `n` times each, giving a d×N matrix aligned with `X`.
pub fn tiled_class_means(ds: &Dataset) -> Matrix {
    let means = class_mean_matrix(ds);
    let n = ds.n;
    Matrix::from_fn(ds.dim(), ds.samples(), |row, col| means[(row, col / n)])
}

/// `(Δ_W, Δ_B)`: per-sample deviations from the class mean (d×N) and class-mean
/// deviations from the global mean (d×K).
pub fn deviation_matrices(ds: &Dataset) -> (Matrix, Matrix) {
    let means = class_mean_matrix(ds);
    let delta_w = &ds.x - tiled_class_means(ds);
    let global = means.column_mean();
    let mut delta_b = means;
    for mut col in delta_b.column_iter_mut() {
        col -= &global;
    }
    (delta_w, delta_b)
}

/// Spectral facts about `X` and `X − X̄` that hold for θ-nearly orthonormal data.
pub fn audit_spectrum(ds: &Dataset) -> Result<Vec<InequalityCheck>> {
    let theta = measure_theta(ds).theta_hat;
    let samples = ds.samples() as f64;
    let k = ds.k as f64;

    let s = numerics::singular_values(&ds.x)?;
    let sigma_max = s.first().copied().unwrap_or(0.0);
    let sigma_min = s.last().copied().unwrap_or(0.0);

    let centered = &ds.x - tiled_class_means(ds);
    let centered_spec = numerics::spectral_norm(&centered)?;
    let centered_fro2 = centered.norm_squared();

    Ok(vec![
        InequalityCheck::le("sigma_min(X) >= sqrt(1-theta)", (1.0 - theta).max(0.0).sqrt(), sigma_min),
        InequalityCheck::le("sigma_max(X) <= sqrt(1+theta)", sigma_max, (1.0 + theta).sqrt()),
        InequalityCheck::le("||X-Xbar|| <= sqrt(1+4theta)", centered_spec, (1.0 + 4.0 * theta).sqrt()),
        InequalityCheck::le("||X-Xbar||_F^2 >= N-K-4theta", samples - k - 4.0 * theta, centered_fro2),
        InequalityCheck::le("||X-Xbar||_F^2 <= N-K+4theta", centered_fro2, samples - k + 4.0 * theta),
    ])
}

pub fn write_dataset<W: Write>(ds: &Dataset, mut out: W) -> Result<()> {
    out.write_all(DATA_MAGIC)?;
    for v in [ds.dim(), ds.samples(), ds.k, ds.n] {
        out.write_all(&(v as u64).to_le_bytes())?;
    }
    for v in ds.x.as_slice() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_dataset<R: Read>(mut input: R) -> Result<Dataset> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != DATA_MAGIC {
        return Err(Error::Format("missing DLNDATA1 header".into()));
    }
    let mut header = [0usize; 4];
    for slot in header.iter_mut() {
        *slot = read_u64(&mut input)? as usize;
    }
    let [d, samples, k, n] = header;
    if k.checked_mul(n) != Some(samples) {
        return Err(Error::Format(format!("N = {samples} does not equal K*n = {k}*{n}")));
    }
    let len = d
        .checked_mul(samples)
        .ok_or_else(|| Error::Format("dataset size overflows".into()))?;
    let mut values = Vec::with_capacity(len);
    for _ in 0..len {
        values.push(read_f64(&mut input)?);
    }
    Dataset::new(Matrix::from_vec(d, samples, values), k, n)
}

pub(crate) fn read_u64<R: Read>(input: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    input.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

pub(crate) fn read_f64<R: Read>(input: &mut R) -> Result<f64> {
    let mut buf = [0u8; 8];
    input.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}
