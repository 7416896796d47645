//! L-layer networks `W_L σ(W_{L−1} ⋯ σ(W_1 x))` with uniform hidden width.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{read_f64, read_u64};
use crate::error::{Error, Result};
use crate::numerics::{self, Matrix};

pub const NET_MAGIC: &[u8; 8] = b"DLNNET01";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Linear,
    Relu,
}

impl Activation {
    pub fn code(self) -> u64 {
        match self {
            Activation::Linear => 0,
            Activation::Relu => 1,
        }
    }

    pub fn from_code(code: u64) -> Result<Self> {
        match code {
            0 => Ok(Activation::Linear),
            1 => Ok(Activation::Relu),
            other => Err(Error::Format(format!("unknown activation code {other}"))),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Linear => "linear",
            Activation::Relu => "relu",
        })
    }
}

impl FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(Activation::Linear),
            "relu" => Ok(Activation::Relu),
            other => Err(format!("unknown activation `{other}` (expected linear or relu)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    Orthogonal,
    /// Entries uniform on `[−1/√d, 1/√d]`. Not covered by the implicit-bias theory.
    UniformKaiming,
}

impl fmt::Display for InitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitMode::Orthogonal => "orthogonal",
            InitMode::UniformKaiming => "uniform_kaiming",
        })
    }
}

impl FromStr for InitMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "orthogonal" => Ok(InitMode::Orthogonal),
            "uniform_kaiming" | "uniform-kaiming" | "kaiming" => Ok(InitMode::UniformKaiming),
            other => Err(format!(
                "unknown init mode `{other}` (expected orthogonal or uniform_kaiming)"
            )),
        }
    }
}

/// `layers` weight matrices: `layers − 1` square d×d maps and a K×d classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub layers: usize,
    pub width: usize,
    pub classes: usize,
    pub activation: Activation,
}

impl Architecture {
    pub fn new(layers: usize, width: usize, classes: usize, activation: Activation) -> Result<Self> {
        if layers < 2 {
            return Err(Error::Precondition(format!("need L >= 2 layers, got {layers}")));
        }
        if classes == 0 || width < classes {
            return Err(Error::Precondition(format!(
                "need 1 <= K <= d, got K = {classes}, d = {width}"
            )));
        }
        Ok(Self {
            layers,
            width,
            classes,
            activation,
        })
    }

    pub fn shape_of(&self, layer: usize) -> (usize, usize) {
        if layer + 1 == self.layers {
            (self.classes, self.width)
        } else {
            (self.width, self.width)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    arch: Architecture,
    weights: Vec<Matrix>,
}

impl Network {
    pub fn from_weights(arch: Architecture, weights: Vec<Matrix>) -> Result<Self> {
        if weights.len() != arch.layers {
            return Err(Error::Precondition(format!(
                "expected {} weight matrices, got {}",
                arch.layers,
                weights.len()
            )));
        }
        for (l, w) in weights.iter().enumerate() {
            let expected = arch.shape_of(l);
            if w.shape() != expected {
                return Err(Error::Dimension {
                    op: "network weights",
                    lhs: w.shape(),
                    rhs: expected,
                });
            }
        }
        Ok(Self { arch, weights })
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn depth(&self) -> usize {
        self.arch.layers
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [Matrix] {
        &mut self.weights
    }

    pub fn into_weights(self) -> Vec<Matrix> {
        self.weights
    }
}

/// `W_l = ξ Q_l` for the hidden layers and `W_L = [ξ U | 0]`, all factors Haar.
pub fn init_orthogonal(arch: Architecture, xi: f64, seed: u64) -> Result<Network> {
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(Error::Precondition(format!("xi must be > 0, got {xi}")));
    }
    let mut rng = numerics::seeded_rng(seed);
    let d = arch.width;
    let k = arch.classes;
    let mut weights = Vec::with_capacity(arch.layers);
    for _ in 0..arch.layers - 1 {
        weights.push(numerics::haar_orthogonal_with(d, &mut rng) * xi);
    }
    let u = numerics::haar_orthogonal_with(k, &mut rng);
    let mut last = Matrix::zeros(k, d);
    last.columns_mut(0, k).copy_from(&(u * xi));
    weights.push(last);
    Network::from_weights(arch, weights)
}

pub fn init_uniform_kaiming(arch: Architecture, seed: u64) -> Result<Network> {
    let mut rng = numerics::seeded_rng(seed);
    let bound = 1.0 / (arch.width as f64).sqrt();
    let weights = (0..arch.layers)
        .map(|l| {
            let (r, c) = arch.shape_of(l);
            numerics::uniform_matrix(r, c, -bound, bound, &mut rng)
        })
        .collect();
    Network::from_weights(arch, weights)
}

pub fn init(arch: Architecture, mode: InitMode, xi: f64, seed: u64) -> Result<Network> {
    match mode {
        InitMode::Orthogonal => init_orthogonal(arch, xi, seed),
        InitMode::UniformKaiming => init_uniform_kaiming(arch, seed),
    }
}

pub(crate) fn relu_in_place(m: &mut Matrix) {
    for v in m.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

fn check_input(net: &Network, x: &Matrix) -> Result<()> {
    if x.nrows() != net.arch.width {
        return Err(Error::Dimension {
            op: "forward",
            lhs: net.weights[0].shape(),
            rhs: x.shape(),
        });
    }
    Ok(())
}

/// Network outputs (K×N).
pub fn forward(net: &Network, x: &Matrix) -> Result<Matrix> {
    check_input(net, x)?;
    let relu = net.arch.activation == Activation::Relu;
    let (last, hidden) = net.weights.split_last().expect("L >= 2");
    let mut z = x.clone();
    for w in hidden {
        z = w * z;
        if relu {
            relu_in_place(&mut z);
        }
    }
    Ok(last * z)
}

/// Layer features `[Z⁰ = X, Z¹, …, Z^{L−1}]`; `L` entries with the input first.
pub fn features(net: &Network, x: &Matrix) -> Result<Vec<Matrix>> {
    check_input(net, x)?;
    let relu = net.arch.activation == Activation::Relu;
    let mut out = Vec::with_capacity(net.arch.layers);
    out.push(x.clone());
    for w in &net.weights[..net.arch.layers - 1] {
        let mut z = w * out.last().expect("non-empty");
        if relu {
            relu_in_place(&mut z);
        }
        out.push(z);
    }
    Ok(out)
}

/// Product `W_{l:1} = W_l ⋯ W_1` for `l` in `1..=L`.
pub fn partial_product(net: &Network, l: usize) -> Result<Matrix> {
    if net.arch.activation != Activation::Linear {
        return Err(Error::Unsupported("partial_product"));
    }
    if l == 0 || l > net.arch.layers {
        return Err(Error::Precondition(format!(
            "layer index {l} outside 1..={}",
            net.arch.layers
        )));
    }
    let mut acc = net.weights[0].clone();
    for w in &net.weights[1..l] {
        acc = w * acc;
    }
    Ok(acc)
}

/// End-to-end map `W_{L:1}` (K×d).
pub fn end_to_end(net: &Network) -> Result<Matrix> {
    if net.arch.activation != Activation::Linear {
        return Err(Error::Unsupported("end_to_end"));
    }
    partial_product(net, net.arch.layers)
}

pub fn write_network<W: Write>(net: &Network, mut out: W) -> Result<()> {
    out.write_all(NET_MAGIC)?;
    let a = &net.arch;
    for v in [a.layers as u64, a.width as u64, a.classes as u64, a.activation.code()] {
        out.write_all(&v.to_le_bytes())?;
    }
    for w in &net.weights {
        for v in w.as_slice() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_network<R: Read>(mut input: R) -> Result<Network> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != NET_MAGIC {
        return Err(Error::Format("missing DLNNET01 header".into()));
    }
    let layers = read_u64(&mut input)? as usize;
    let width = read_u64(&mut input)? as usize;
    let classes = read_u64(&mut input)? as usize;
    let activation = Activation::from_code(read_u64(&mut input)?)?;
    let arch = Architecture::new(layers, width, classes, activation)?;
    let mut weights = Vec::with_capacity(layers);
    for l in 0..layers {
        let (r, c) = arch.shape_of(l);
        let mut values = Vec::with_capacity(r * c);
        for _ in 0..r * c {
            values.push(read_f64(&mut input)?);
        }
        weights.push(Matrix::from_vec(r, c, values));
    }
    Network::from_weights(arch, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{gaussian_matrix, seeded_rng, singular_values};

    fn linear(layers: usize, width: usize, classes: usize) -> Architecture {
        Architecture::new(layers, width, classes, Activation::Linear).unwrap()
    }

    #[test]
    fn architecture_rejects_bad_shapes() {
        assert!(Architecture::new(1, 5, 2, Activation::Linear).is_err());
        assert!(Architecture::new(3, 2, 3, Activation::Linear).is_err());
    }

    #[test]
    fn orthogonal_init_structure() {
        let xi = 0.3;
        let net = init_orthogonal(linear(4, 10, 3), xi, 5).unwrap();
        for w in &net.weights()[..3] {
            let gram = w.transpose() * w;
            let err = (gram - Matrix::identity(10, 10) * xi * xi).norm();
            assert!(err <= 1e-9 * xi * xi * 10.0);
        }
        let s = singular_values(&net.weights()[3]).unwrap();
        assert_eq!(s.len(), 3);
        for v in s {
            assert!((v - xi).abs() <= 1e-9);
        }
        assert!(net.weights()[3].columns(3, 7).iter().all(|&v| v == 0.0));
        let again = init_orthogonal(linear(4, 10, 3), xi, 5).unwrap();
        assert_eq!(net, again);
    }

    #[test]
    fn end_to_end_singular_values_are_xi_to_the_depth() {
        let xi: f64 = 0.7;
        let net = init_orthogonal(linear(5, 8, 2), xi, 1).unwrap();
        let s = singular_values(&end_to_end(&net).unwrap()).unwrap();
        for v in s {
            assert!((v - xi.powi(5)).abs() <= 1e-8);
        }
    }

    #[test]
    fn forward_truncates_with_identity_weights() {
        let arch = linear(2, 4, 2);
        let mut last = Matrix::zeros(2, 4);
        last[(0, 0)] = 1.0;
        last[(1, 1)] = 1.0;
        let net = Network::from_weights(arch, vec![Matrix::identity(4, 4), last]).unwrap();
        let e1 = Matrix::from_column_slice(4, 1, &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(forward(&net, &e1).unwrap().as_slice(), &[1.0, 0.0]);
        assert_eq!(
            end_to_end(&net).unwrap(),
            Matrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0])
        );
    }

    #[test]
    fn forward_matches_end_to_end_product() {
        let mut rng = seeded_rng(3);
        let arch = linear(4, 6, 2);
        let weights = (0..4)
            .map(|l| {
                let (r, c) = arch.shape_of(l);
                gaussian_matrix(r, c, &mut rng)
            })
            .collect();
        let net = Network::from_weights(arch, weights).unwrap();
        let x = gaussian_matrix(6, 5, &mut rng);
        let a = forward(&net, &x).unwrap();
        let b = end_to_end(&net).unwrap() * &x;
        assert!((&a - &b).norm() <= 1e-9 * b.norm());

        let zs = features(&net, &x).unwrap();
        assert_eq!(zs.len(), 4);
        assert_eq!(zs[0], x);
        assert_eq!(zs[1], &net.weights()[0] * &x);
        assert!((&net.weights()[3] * &zs[3] - &a).norm() <= 1e-12 * a.norm());
        assert_eq!(&net.weights()[1] * &net.weights()[0], partial_product(&net, 2).unwrap());
    }

    #[test]
    fn relu_matches_linear_when_inactive() {
        let mut rng = seeded_rng(8);
        let weights: Vec<Matrix> = [(5, 5), (5, 5), (2, 5)]
            .iter()
            .map(|&(r, c)| gaussian_matrix(r, c, &mut rng).map(f64::abs))
            .collect();
        let x = gaussian_matrix(5, 4, &mut rng).map(f64::abs);
        let lin = Network::from_weights(linear(3, 5, 2), weights.clone()).unwrap();
        let relu_arch = Architecture::new(3, 5, 2, Activation::Relu).unwrap();
        let relu = Network::from_weights(relu_arch, weights).unwrap();
        assert_eq!(forward(&lin, &x).unwrap(), forward(&relu, &x).unwrap());
        assert!(matches!(end_to_end(&relu), Err(Error::Unsupported(_))));
    }

    #[test]
    fn relu_features_are_non_negative() {
        let arch = Architecture::new(4, 6, 2, Activation::Relu).unwrap();
        let net = init_orthogonal(arch, 1.0, 2).unwrap();
        let x = gaussian_matrix(6, 10, &mut seeded_rng(4));
        for z in &features(&net, &x).unwrap()[1..] {
            assert!(z.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn kaiming_init_stays_in_range() {
        let net = init_uniform_kaiming(linear(3, 16, 3), 1).unwrap();
        for w in net.weights() {
            assert!(w.iter().all(|v| v.abs() <= 0.25));
        }
    }

    #[test]
    fn forward_rejects_wrong_input_rows() {
        let net = init_orthogonal(linear(2, 4, 2), 1.0, 0).unwrap();
        assert!(matches!(forward(&net, &Matrix::zeros(3, 2)), Err(Error::Dimension { .. })));
    }

    #[test]
    fn checkpoint_round_trip() {
        let arch = Architecture::new(3, 5, 2, Activation::Relu).unwrap();
        let net = init_orthogonal(arch, 0.4, 9).unwrap();
        let mut bytes = Vec::new();
        write_network(&net, &mut bytes).unwrap();
        assert_eq!(&bytes[..8], NET_MAGIC);
        assert_eq!(u64::from_le_bytes(bytes[32..40].try_into().unwrap()), 1);
        assert_eq!(read_network(bytes.as_slice()).unwrap(), net);
    }
}
