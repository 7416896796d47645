//! Weight-assumption extraction and audits, and the explicit layerwise
//! compression and discrimination bounds for trained deep linear networks.
//!
//! The bounds use the fully explicit constants `c₁, c₂`; there are no
//! unspecified asymptotic slack terms.

use serde::{Deserialize, Serialize};

use crate::audit::{self, InequalityCheck};
use crate::dataset::{measure_theta, Dataset};
use crate::error::{Error, Result};
use crate::network::{self, Activation, Network};
use crate::numerics::{self, Matrix};
use crate::training::balancedness_residuals;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionParams {
    /// `‖W_LᵀW_L − W_{L−1}W_{L−1}ᵀ‖_F`.
    pub delta_hat: f64,
    /// Largest middle-band singular value `σ_i(W_l)`, `i ∈ [K+1, d−K]`, `l < L`.
    pub eps_hat: f64,
    /// `eps_hat` minus the smallest middle-band singular value.
    pub rho_hat: f64,
    pub theta_hat: f64,
    /// Largest balancedness residual over the interior pairs `1 … L−2`.
    pub interior_bal_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualMetrics {
    pub min_norm: f64,
    pub avg_bal: f64,
    pub sv_var: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryBounds {
    pub c1: f64,
    pub c2: f64,
    /// Interval for `C₁/C₀`.
    pub ratio_lower_first: f64,
    pub ratio_upper_first: f64,
    /// Interval for `C_{l+1}/C_l`, `l ∈ [1, L−2]`.
    pub ratio_lower: f64,
    pub ratio_upper: f64,
    /// Lower bound on `D_l` for `l = 1 … L−1` (index 0 is layer 1).
    pub d_lower: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub ok: bool,
    pub conditions: Vec<InequalityCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub params: AssumptionParams,
    pub min_norm_residual: f64,
    pub avg_balancedness: f64,
    pub sv_variance: f64,
    pub hypothesis_ok: bool,
    pub hypothesis: Vec<InequalityCheck>,
    pub spectra_ok: bool,
    pub spectra: Vec<InequalityCheck>,
}

fn require_linear(net: &Network, op: &'static str) -> Result<()> {
    if net.arch().activation != Activation::Linear {
        return Err(Error::Unsupported(op));
    }
    Ok(())
}

/// Middle-band singular values `σ_{K+1} … σ_{d−K}` of every hidden layer.
pub fn middle_band(net: &Network) -> Result<Vec<f64>> {
    let arch = net.arch();
    let (d, k) = (arch.width, arch.classes);
    if d <= 2 * k {
        return Err(Error::AuditUnsupported { d, k });
    }
    let mut band = Vec::with_capacity((arch.layers - 1) * (d - 2 * k));
    for w in &net.weights()[..arch.layers - 1] {
        let s = numerics::singular_values(w)?;
        band.extend_from_slice(&s[k..d - k]);
    }
    Ok(band)
}

pub fn extract_params(net: &Network, ds: &Dataset) -> Result<AssumptionParams> {
    require_linear(net, "extract_params")?;
    let band = middle_band(net)?;
    let eps_hat = band.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let low = band.iter().copied().fold(f64::INFINITY, f64::min);
    let bal = balancedness_residuals(net);
    let (last, interior) = bal.split_last().expect("L >= 2");
    Ok(AssumptionParams {
        delta_hat: *last,
        eps_hat,
        rho_hat: eps_hat - low,
        theta_hat: measure_theta(ds).theta_hat,
        interior_bal_max: interior.iter().copied().fold(0.0, f64::max),
    })
}

/// Minimum-norm interpolator `Y (XᵀX)⁻¹ Xᵀ`.
pub fn min_norm_solution(ds: &Dataset) -> Result<Matrix> {
    let x = ds.x();
    let gram = x.transpose() * x;
    let chol = gram.cholesky().ok_or(Error::IllConditionedData)?;
    // (XᵀX)⁻¹Xᵀ = solve(XᵀX, Xᵀ)
    let pinv = chol.solve(&x.transpose());
    if pinv.iter().any(|v| !v.is_finite()) {
        return Err(Error::IllConditionedData);
    }
    Ok(ds.y() * pinv)
}

/// Minimum-norm residual, averaged balancedness and the variance of the
/// middle-band singular values of all hidden layers.
pub fn residual_metrics(net: &Network, ds: &Dataset) -> Result<ResidualMetrics> {
    require_linear(net, "residual_metrics")?;
    let target = min_norm_solution(ds)?;
    let min_norm = (target - network::end_to_end(net)?).norm();
    let bal = balancedness_residuals(net);
    let avg_bal = bal.iter().sum::<f64>() / bal.len() as f64;
    let band = middle_band(net)?;
    let mean = band.iter().sum::<f64>() / band.len() as f64;
    let sv_var = band.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / band.len() as f64;
    Ok(ResidualMetrics {
        min_norm,
        avg_bal,
        sv_var,
    })
}

/// Admissibility conditions on `(δ, ε, ρ, θ)` under which the layerwise
/// bounds are proven. Each condition is reported with its margin.
pub fn hypothesis_check(p: &AssumptionParams, n: usize, k: usize, layers: usize) -> HypothesisCheck {
    let nf = n as f64;
    let kf = k as f64;
    let lf = layers as f64;
    let conditions = vec![
        InequalityCheck::le(
            "delta <= (2n)^(1/L)/(30L^2)",
            p.delta_hat,
            (2.0 * nf).powf(1.0 / lf) / (30.0 * lf * lf),
        ),
        InequalityCheck::le(
            "delta <= n^(1/L)/(128 sqrt(K))",
            p.delta_hat,
            nf.powf(1.0 / lf) / (128.0 * kf.sqrt()),
        ),
        InequalityCheck::le("delta <= 1/(16 sqrt(K))", p.delta_hat, 1.0 / (16.0 * kf.sqrt())),
        InequalityCheck::le("eps <= n^(1/(2L))/4", p.eps_hat, nf.powf(0.5 / lf) / 4.0),
        InequalityCheck::le("eps <= 1", p.eps_hat, 1.0),
        InequalityCheck::le(
            "rho <= eps/(2L sqrt(n))",
            p.rho_hat,
            p.eps_hat / (2.0 * lf * nf.sqrt()),
        ),
        InequalityCheck::lt("theta < 1/4", p.theta_hat, 0.25),
    ];
    HypothesisCheck {
        ok: audit::all_pass(&conditions),
        conditions,
    }
}

/// `c₁ = ((n−3)K−1)/((n−1)K+1)` and
/// `c₂ = (1+n^{−1/L}) / ((1−ε^{2(L−1)}/n)(1−n^{−1/2}))`.
pub fn constants(n: usize, k: usize, layers: usize, eps: f64) -> Result<(f64, f64)> {
    if n < 4 || k == 0 || layers < 2 {
        return Err(Error::Domain(format!(
            "constants need n >= 4, K >= 1, L >= 2 (n = {n}, K = {k}, L = {layers})"
        )));
    }
    let nf = n as f64;
    let kf = k as f64;
    let lf = layers as f64;
    let c1 = ((nf - 3.0) * kf - 1.0) / ((nf - 1.0) * kf + 1.0);
    if c1 <= 0.0 {
        return Err(Error::Domain(format!("c1 = {c1} is not positive")));
    }
    let tail = eps.powi(2 * (layers as i32 - 1));
    if !(eps >= 0.0) || tail >= nf {
        return Err(Error::Domain(format!(
            "need eps^(2(L-1)) < n, got eps = {eps}"
        )));
    }
    let c2 = (1.0 + nf.powf(-1.0 / lf)) / ((1.0 - tail / nf) * (1.0 - nf.powf(-0.5)));
    Ok((c1, c2))
}

/// Intervals for the first-layer ratio `C₁/C₀` and the later ratios
/// `C_{l+1}/C_l`. `d_lower` is left empty; see [`theory_bounds`].
pub fn compression_bounds(n: usize, k: usize, layers: usize, eps: f64) -> Result<TheoryBounds> {
    let (c1, c2) = constants(n, k, layers, eps)?;
    let nf = n as f64;
    let lf = layers as f64;
    let e2 = eps * eps;
    let grow = (2.0 * nf).powf(1.0 / lf);
    let shrink = (nf / 2.0).powf(1.0 / lf);
    let inv_root = nf.powf(-1.0 / lf);
    Ok(TheoryBounds {
        c1,
        c2,
        ratio_lower_first: c1 * e2 / (c2 * (grow + e2)),
        ratio_upper_first: 2.0 * c2 * e2 / (c1 * shrink),
        ratio_lower: c1 * e2 / (c2 * (grow + inv_root)),
        ratio_upper: c2 * (1.0 + inv_root) * e2 / (c1 * shrink),
        d_lower: Vec::new(),
    })
}

/// Explicit lower bound on `D_l`:
/// `1 − 32(θ+4δ)(2 − (l+1)/L) − 144√δ K^{1/4} n^{−1/(2L)} − 32 n^{−l/L}(1+θ/K) ε^{2l}`.
/// May be negative, in which case it says nothing.
pub fn discrimination_bound(
    theta: f64,
    delta: f64,
    eps: f64,
    n: usize,
    k: usize,
    layers: usize,
    l: usize,
) -> f64 {
    let nf = n as f64;
    let kf = k as f64;
    let lf = layers as f64;
    let lv = l as f64;
    1.0 - 32.0 * (theta + 4.0 * delta) * (2.0 - (lv + 1.0) / lf)
        - 144.0 * delta.sqrt() * kf.powf(0.25) * nf.powf(-0.5 / lf)
        - 32.0 * nf.powf(-lv / lf) * (1.0 + theta / kf) * eps.powi(2 * l as i32)
}

/// Compression intervals at `ε̂` plus the discrimination bound at `(θ̂, δ̂, ε̂)`
/// for every hidden layer.
pub fn theory_bounds(p: &AssumptionParams, n: usize, k: usize, layers: usize) -> Result<TheoryBounds> {
    let mut bounds = compression_bounds(n, k, layers, p.eps_hat)?;
    bounds.d_lower = (1..layers)
        .map(|l| discrimination_bound(p.theta_hat, p.delta_hat, p.eps_hat, n, k, layers, l))
        .collect();
    Ok(bounds)
}

fn sigma_range(m: &Matrix, k: usize) -> Result<(f64, f64)> {
    let s = numerics::singular_values(m)?;
    Ok((s[k - 1], s[0]))
}

/// Spectral consequences of the weight assumptions, evaluated with the
/// measured `θ̂` and `δ̂`: end-to-end singular values, the uniform per-layer
/// band, and the tighter hidden/classifier bands.
pub fn audit_spectra(net: &Network, ds: &Dataset) -> Result<Vec<InequalityCheck>> {
    require_linear(net, "audit_spectra")?;
    let theta = measure_theta(ds).theta_hat;
    let delta = *balancedness_residuals(net).last().expect("L >= 2");
    let k = net.arch().classes;
    let layers = net.depth();
    let nf = ds.per_class() as f64;
    let lf = layers as f64;
    let mut checks = Vec::new();

    let (e2e_k, e2e_1) = sigma_range(&network::end_to_end(net)?, k)?;
    let e2e_upper = if theta < 1.0 {
        nf.sqrt() / (1.0 - theta).sqrt()
    } else {
        f64::INFINITY
    };
    checks.push(InequalityCheck::le(
        "sigma_K(W_L:1) >= sqrt(n)/sqrt(1+theta)",
        nf.sqrt() / (1.0 + theta).sqrt(),
        e2e_k,
    ));
    checks.push(InequalityCheck::le("sigma_1(W_L:1) <= sqrt(n)/sqrt(1-theta)", e2e_1, e2e_upper));

    let per_layer: Vec<(f64, f64)> = net
        .weights()
        .iter()
        .map(|w| sigma_range(w, k))
        .collect::<Result<_>>()?;

    let band_lo = (nf / 2.0).powf(0.5 / lf);
    let band_hi = (2.0 * nf.sqrt()).powf(1.0 / lf);
    for (l, (sk, s1)) in per_layer.iter().enumerate() {
        let idx = l + 1;
        checks.push(InequalityCheck::le(
            format!("sigma_K(W_{idx}) >= (n/2)^(1/(2L))"),
            band_lo,
            *sk,
        ));
        checks.push(InequalityCheck::le(
            format!("sigma_1(W_{idx}) <= (2 sqrt(n))^(1/L)"),
            *s1,
            band_hi,
        ));
    }

    let tight_lo = ((1.0 / (1.0 + theta) - 4.0 * delta) * nf).max(0.0).powf(0.5 / lf);
    let tight_hi = if theta < 1.0 {
        ((1.0 / (1.0 - theta) + 4.0 * delta) * nf).powf(0.5 / lf)
    } else {
        f64::INFINITY
    };
    for (l, (sk, s1)) in per_layer[..layers - 1].iter().enumerate() {
        let idx = l + 1;
        checks.push(InequalityCheck::le(
            format!("sigma_K(W_{idx}) >= ((1/(1+theta)-4delta)n)^(1/(2L))"),
            tight_lo,
            *sk,
        ));
        checks.push(InequalityCheck::le(
            format!("sigma_1(W_{idx}) <= ((1/(1-theta)+4delta)n)^(1/(2L))"),
            *s1,
            tight_hi,
        ));
    }

    let (sk, s1) = per_layer[layers - 1];
    checks.push(InequalityCheck::le(
        "sigma_K(W_L) >= ((1/(1+theta)-4delta)n)^(1/(2L)) - sqrt(delta)",
        tight_lo - delta.sqrt(),
        sk,
    ));
    checks.push(InequalityCheck::le(
        "sigma_1(W_L) <= ((1/(1-theta)+4delta)n)^(1/(2L)) + sqrt(delta)",
        s1,
        tight_hi + delta.sqrt(),
    ));
    Ok(checks)
}

pub fn assumption_report(net: &Network, ds: &Dataset) -> Result<AssumptionReport> {
    let params = extract_params(net, ds)?;
    let residuals = residual_metrics(net, ds)?;
    let hyp = hypothesis_check(&params, ds.per_class(), ds.classes(), net.depth());
    let spectra = audit_spectra(net, ds)?;
    Ok(AssumptionReport {
        params,
        min_norm_residual: residuals.min_norm,
        avg_balancedness: residuals.avg_bal,
        sv_variance: residuals.sv_var,
        hypothesis_ok: hyp.ok,
        hypothesis: hyp.conditions,
        spectra_ok: audit::all_pass(&spectra),
        spectra,
    })
}
