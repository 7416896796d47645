//! Squared loss, exact gradients and full-batch gradient descent.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::network::{self, Activation, Network};
use crate::numerics::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub eta: f64,
    pub tol: f64,
    pub max_iters: usize,
    /// Trajectory sampling stride; step 0 and the last step are always kept.
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            eta: 0.01,
            tol: 1e-11,
            max_iters: 10_000_000,
            log_every: 1000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Precondition(format!("eta must be > 0, got {}", self.eta)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Precondition(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::Precondition("max_iters must be >= 1".into()));
        }
        if self.log_every == 0 {
            return Err(Error::Precondition("log_every must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub step: usize,
    pub loss: f64,
    pub balancedness: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    pub net: Network,
    pub final_loss: f64,
    pub iters: usize,
    pub converged: bool,
    pub trajectory: Vec<TrajectoryRecord>,
}

fn check_data(net: &Network, ds: &Dataset) -> Result<()> {
    let arch = net.arch();
    if ds.dim() != arch.width || ds.classes() != arch.classes {
        return Err(Error::Dimension {
            op: "network/dataset",
            lhs: (arch.width, arch.classes),
            rhs: (ds.dim(), ds.classes()),
        });
    }
    Ok(())
}

/// `½‖f(X) − Y‖_F²`.
pub fn loss(net: &Network, ds: &Dataset) -> Result<f64> {
    check_data(net, ds)?;
    let out = network::forward(net, ds.x())?;
    Ok(0.5 * (out - ds.y()).norm_squared())
}

/// Exact gradients `∂ℓ/∂W_l` for every layer, by reverse-mode accumulation.
/// ReLU uses subgradient 0 at exactly 0.
pub fn gradients(net: &Network, ds: &Dataset) -> Result<Vec<Matrix>> {
    check_data(net, ds)?;
    let zs = network::features(net, ds.x())?;
    let weights = net.weights();
    let depth = weights.len();
    let relu = net.arch().activation == Activation::Relu;

    let mut g = &weights[depth - 1] * &zs[depth - 1] - ds.y();
    let mut grads = vec![Matrix::zeros(0, 0); depth];
    for l in (0..depth).rev() {
        if relu && l + 1 < depth {
            mask_inactive(&mut g, &zs[l + 1]);
        }
        grads[l] = &g * zs[l].transpose();
        if l > 0 {
            g = weights[l].transpose() * &g;
        }
    }
    Ok(grads)
}

fn mask_inactive(g: &mut Matrix, activated: &Matrix) {
    for (gv, &zv) in g.iter_mut().zip(activated.iter()) {
        if zv <= 0.0 {
            *gv = 0.0;
        }
    }
}

/// `W_{l+1}ᵀW_{l+1} − W_l W_lᵀ` for each adjacent pair `l = 1..L−1`.
pub fn balance_gaps(net: &Network) -> Vec<Matrix> {
    net.weights()
        .windows(2)
        .map(|pair| pair[1].transpose() * &pair[1] - &pair[0] * pair[0].transpose())
        .collect()
}

/// Frobenius norms of [`balance_gaps`]; length `L − 1`.
pub fn balancedness_residuals(net: &Network) -> Vec<f64> {
    balance_gaps(net).iter().map(Matrix::norm).collect()
}

/// Total change `Σ_l ‖G_l(after) − G_l(before)‖_F` of the balance gaps. Zero
/// under gradient flow; O(η²) per step under gradient descent.
pub fn conservation_drift(before: &Network, after: &Network) -> f64 {
    balance_gaps(before)
        .iter()
        .zip(balance_gaps(after))
        .map(|(a, b)| (b - a).norm())
        .sum()
}

/// Full-batch gradient descent until `loss < tol` or `max_iters` updates.
pub fn train(net: Network, ds: &Dataset, cfg: &TrainConfig) -> Result<TrainResult> {
    cfg.validate()?;
    check_data(&net, ds)?;

    let mut net = net;
    let depth = net.depth();
    let relu = net.arch().activation == Activation::Relu;
    let y = ds.y();
    let samples = ds.samples();

    // zs[l] is the input of layer l+1; zs[0] = X.
    let mut zs: Vec<Matrix> = (0..depth)
        .map(|l| {
            if l == 0 {
                ds.x().clone()
            } else {
                Matrix::zeros(net.arch().width, samples)
            }
        })
        .collect();
    let mut residual = Matrix::zeros(net.arch().classes, samples);
    let mut back = Matrix::zeros(net.arch().width, samples);
    let mut back_next = Matrix::zeros(net.arch().width, samples);

    let mut trajectory = Vec::new();
    let mut step = 0usize;
    loop {
        {
            let weights = net.weights();
            for l in 0..depth - 1 {
                let (head, tail) = zs.split_at_mut(l + 1);
                weights[l].mul_to(&head[l], &mut tail[0]);
                if relu {
                    network::relu_in_place(&mut tail[0]);
                }
            }
            weights[depth - 1].mul_to(&zs[depth - 1], &mut residual);
        }
        residual -= &y;
        let current = 0.5 * residual.norm_squared();

        if !current.is_finite() {
            return Err(Error::Divergence { step, loss: current });
        }
        let converged = current < cfg.tol;
        let finished = converged || step == cfg.max_iters;
        if step.is_multiple_of(cfg.log_every) || finished {
            trajectory.push(TrajectoryRecord {
                step,
                loss: current,
                balancedness: balancedness_residuals(&net),
            });
        }
        if finished {
            return Ok(TrainResult {
                net,
                final_loss: current,
                iters: step,
                converged,
                trajectory,
            });
        }

        let weights = net.weights_mut();
        let last = depth - 1;
        weights[last].tr_mul_to(&residual, &mut back);
        weights[last].gemm(-cfg.eta, &residual, &zs[last].transpose(), 1.0);
        for l in (0..last).rev() {
            if relu {
                mask_inactive(&mut back, &zs[l + 1]);
            }
            if l > 0 {
                weights[l].tr_mul_to(&back, &mut back_next);
            }
            weights[l].gemm(-cfg.eta, &back, &zs[l].transpose(), 1.0);
            std::mem::swap(&mut back, &mut back_next);
        }
        step += 1;
    }
}

/// CSV with header `step,loss,bal_1,...,bal_{L-1}`.
pub fn write_trajectory_csv<W: Write>(result: &TrainResult, mut out: W) -> Result<()> {
    let pairs = result.net.depth() - 1;
    let mut header = String::from("step,loss");
    for l in 1..=pairs {
        header.push_str(&format!(",bal_{l}"));
    }
    writeln!(out, "{header}")?;
    for rec in &result.trajectory {
        let mut line = format!("{},{:e}", rec.step, rec.loss);
        for b in &rec.balancedness {
            line.push_str(&format!(",{b:e}"));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}
