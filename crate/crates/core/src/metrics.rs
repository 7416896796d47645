//! Per-layer within-class compression `C_l`, between-class discrimination
//! `D_l`, and the 95%-nuclear-norm numerical rank.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::network::{self, Network};
use crate::numerics::{self, Matrix};

/// Guard for traces and norms that should never vanish on real features.
pub const DEGENERATE: f64 = 1e-30;

/// Fraction of the nuclear norm the leading singular values must exceed.
pub const RANK_ENERGY: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerMetrics {
    pub layer: usize,
    pub tr_sigma_w: f64,
    pub tr_sigma_b: f64,
    #[serde(rename = "C")]
    pub compression: f64,
    #[serde(rename = "D")]
    pub discrimination: f64,
    pub num_rank: usize,
}

fn check_layout(z: &Matrix, k: usize, n: usize) -> Result<()> {
    if k == 0 || n == 0 || z.ncols() != k * n {
        return Err(Error::Layout {
            columns: z.ncols(),
            classes: k,
        });
    }
    Ok(())
}

/// Per-class feature means (d′×K).
pub fn class_means(z: &Matrix, k: usize, n: usize) -> Result<Matrix> {
    check_layout(z, k, n)?;
    Ok(Matrix::from_fn(z.nrows(), k, |row, class| {
        (0..n).map(|i| z[(row, class * n + i)]).sum::<f64>() / n as f64
    }))
}

/// `(Tr Σ_W, Tr Σ_B)` from squared column norms; the d′×d′ scatter matrices
/// are never formed.
pub fn scatter_traces(z: &Matrix, k: usize, n: usize) -> Result<(f64, f64)> {
    let means = class_means(z, k, n)?;
    let global = means.column_mean();
    let samples = (k * n) as f64;

    let mut within = 0.0;
    for (col, sample) in z.column_iter().enumerate() {
        within += (sample - means.column(col / n)).norm_squared();
    }
    let between: f64 = means
        .column_iter()
        .map(|mu| (mu - &global).norm_squared() * n as f64)
        .sum();
    Ok((within / samples, between / samples))
}

pub fn compression(z: &Matrix, k: usize, n: usize) -> Result<f64> {
    let (tr_w, tr_b) = scatter_traces(z, k, n)?;
    if tr_b <= DEGENERATE {
        return Err(Error::DegenerateBetweenClass(tr_b));
    }
    Ok(tr_w / tr_b)
}

fn unit_means(z: &Matrix, k: usize, n: usize) -> Result<Matrix> {
    if k < 2 {
        return Err(Error::Precondition("discrimination needs at least two classes".into()));
    }
    let mut means = class_means(z, k, n)?;
    for (class, mut col) in means.column_iter_mut().enumerate() {
        let norm = col.norm();
        if norm <= DEGENERATE {
            return Err(Error::ZeroMean { class, norm });
        }
        col /= norm;
    }
    Ok(means)
}

/// `1 − max_{k≠k′} cos(μ_k, μ_k′)`.
pub fn discrimination(z: &Matrix, k: usize, n: usize) -> Result<f64> {
    let units = unit_means(z, k, n)?;
    let mut worst = f64::NEG_INFINITY;
    for a in 0..k {
        for b in a + 1..k {
            worst = worst.max(units.column(a).dot(&units.column(b)));
        }
    }
    Ok(1.0 - worst)
}

/// `½ min_{k≠k′} ‖μ_k/‖μ_k‖ − μ_k′/‖μ_k′‖‖²`, algebraically equal to
/// [`discrimination`].
pub fn discrimination_via_distance(z: &Matrix, k: usize, n: usize) -> Result<f64> {
    let units = unit_means(z, k, n)?;
    let mut closest = f64::INFINITY;
    for a in 0..k {
        for b in a + 1..k {
            closest = closest.min((units.column(a) - units.column(b)).norm_squared());
        }
    }
    Ok(0.5 * closest)
}

/// Smallest `m` whose leading `m` singular values hold strictly more than
/// 95% of the nuclear norm.
pub fn numerical_rank(a: &Matrix) -> Result<usize> {
    rank_from_spectrum(&numerics::singular_values(a)?)
}

/// Same as [`numerical_rank`] on a precomputed spectrum.
pub fn rank_from_spectrum(s: &[f64]) -> Result<usize> {
    let total: f64 = s.iter().sum();
    if !(total > 0.0) {
        return Err(Error::UndefinedRank);
    }
    // Relative slack keeps ties at exactly 95% (e.g. identity spectra) from
    // flipping on last-bit rounding in the singular values.
    let threshold = RANK_ENERGY * total + 1e-12 * total;
    let mut acc = 0.0;
    for (i, v) in s.iter().enumerate() {
        acc += v;
        if acc > threshold {
            return Ok(i + 1);
        }
    }
    Ok(s.len())
}

pub fn layer_metrics(layer: usize, z: &Matrix, k: usize, n: usize) -> Result<LayerMetrics> {
    let (tr_w, tr_b) = scatter_traces(z, k, n)?;
    if tr_b <= DEGENERATE {
        return Err(Error::DegenerateBetweenClass(tr_b));
    }
    Ok(LayerMetrics {
        layer,
        tr_sigma_w: tr_w,
        tr_sigma_b: tr_b,
        compression: tr_w / tr_b,
        discrimination: discrimination(z, k, n)?,
        num_rank: numerical_rank(z)?,
    })
}

/// Metrics at every layer `l = 0 … L−1`, with `Z⁰ = X`.
pub fn layer_sweep(net: &Network, ds: &Dataset) -> Result<Vec<LayerMetrics>> {
    let zs = network::features(net, ds.x())?;
    zs.iter()
        .enumerate()
        .map(|(l, z)| layer_metrics(l, z, ds.classes(), ds.per_class()))
        .collect()
}

/// CSV with header `layer,tr_sigma_w,tr_sigma_b,C,log10_C,D,num_rank`.
pub fn write_metrics_csv<W: Write>(rows: &[LayerMetrics], mut out: W) -> Result<()> {
    writeln!(out, "layer,tr_sigma_w,tr_sigma_b,C,log10_C,D,num_rank")?;
    for m in rows {
        writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{:e},{}",
            m.layer,
            m.tr_sigma_w,
            m.tr_sigma_b,
            m.compression,
            m.compression.log10(),
            m.discrimination,
            m.num_rank
        )?;
    }
    Ok(())
}
