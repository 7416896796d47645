#![allow(dead_code)]

use dlnlab::dataset::{self, Dataset};
use dlnlab::metrics;
use dlnlab::network::{self, Activation, Architecture, InitMode, Network};
use dlnlab::numerics::{self, Matrix};
use dlnlab::training;

/// Largest relative deviation between analytic gradients and central
/// differences with step `h`, measured per layer as ‖g_fd − g‖_F / ‖g‖_F.
pub fn finite_difference_error(net: &Network, ds: &Dataset, h: f64) -> f64 {
    let analytic = training::gradients(net, ds).unwrap();
    let arch = *net.arch();
    let mut worst: f64 = 0.0;
    for (l, g) in analytic.iter().enumerate() {
        let mut fd = Matrix::zeros(g.nrows(), g.ncols());
        for idx in 0..g.len() {
            let eval = |delta: f64| {
                let mut w = net.weights().to_vec();
                w[l][idx] += delta;
                training::loss(&Network::from_weights(arch, w).unwrap(), ds).unwrap()
            };
            fd[idx] = (eval(h) - eval(-h)) / (2.0 * h);
        }
        worst = worst.max((&fd - g).norm() / g.norm().max(1e-300));
    }
    worst
}

/// Relative gaps between the scatter traces at every layer and the
/// deviation-matrix forms (1/N)‖W_{l:1}Δ_W‖² and (1/K)‖W_{l:1}Δ_B‖².
pub fn trace_identity_error(net: &Network, ds: &Dataset) -> f64 {
    let (dw, db) = dataset::deviation_matrices(ds);
    let feats = network::features(net, ds.x()).unwrap();
    let (k, n) = (ds.classes(), ds.per_class());
    let mut worst: f64 = 0.0;
    for (l, z) in feats.iter().enumerate() {
        let (tw, tb) = metrics::scatter_traces(z, k, n).unwrap();
        let (pw, pb) = if l == 0 {
            (dw.clone(), db.clone())
        } else {
            let p = network::partial_product(net, l).unwrap();
            (&p * &dw, &p * &db)
        };
        let ow = pw.norm_squared() / ds.samples() as f64;
        let ob = pb.norm_squared() / k as f64;
        worst = worst.max((tw - ow).abs() / ow).max((tb - ob).abs() / ob);
    }
    worst
}

/// `‖AᵀA‖_F ≤ ‖A‖_F² ≤ √r ‖AᵀA‖_F` with `r = rank(A)`; returns both slacks.
pub fn gram_norm_slacks(a: &Matrix) -> (f64, f64) {
    let gram = (a.transpose() * a).norm();
    let fro2 = a.norm_squared();
    let s = numerics::singular_values(a).unwrap();
    let top = s.first().copied().unwrap_or(0.0);
    let rank = s.iter().filter(|&&v| v > 1e-12 * top).count() as f64;
    (fro2 - gram, rank.sqrt() * gram - fro2)
}

pub fn small_net(layers: usize, d: usize, k: usize, activation: Activation, seed: u64) -> Network {
    let arch = Architecture::new(layers, d, k, activation).unwrap();
    network::init(arch, InitMode::UniformKaiming, 0.0, seed).unwrap()
}
