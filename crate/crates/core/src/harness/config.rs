use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Activation, Architecture, InitMode};
use crate::training::TrainConfig;

pub const OUT_ENV: &str = "DLNLAB_OUT";

pub const VALID_KEYS: &[&str] = &[
    "seed",
    "K",
    "n",
    "d",
    "L",
    "xi",
    "eta",
    "tol",
    "max_iters",
    "activation",
    "init",
    "out",
    "noise",
    "log_every",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(rename = "K")]
    pub classes: usize,
    pub n: usize,
    pub d: usize,
    #[serde(rename = "L")]
    pub layers: usize,
    pub xi: f64,
    pub eta: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub activation: Activation,
    pub init_mode: InitMode,
    pub out_dir: PathBuf,
    /// Frobenius norm of the uniform perturbation added to the orthonormal base.
    pub noise: f64,
    pub log_every: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let out_dir = std::env::var_os(OUT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("out"));
        Self {
            seed: 0,
            classes: 3,
            n: 10,
            d: 50,
            layers: 6,
            xi: 0.3,
            eta: 0.01,
            tol: 1e-11,
            max_iters: 10_000_000,
            activation: Activation::Linear,
            init_mode: InitMode::Orthogonal,
            out_dir,
            noise: 1.0,
            log_every: 1000,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value
        .parse::<T>()
        .map_err(|_| format!("invalid value `{value}` for `{key}`"))
}

impl ExperimentConfig {
    /// Assign one `key=value` pair. Keys follow the config-file spelling;
    /// `max-iters` and `log-every` are accepted as aliases.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let applied = match key {
            "seed" => parse_num(key, value).map(|v| self.seed = v),
            "K" => parse_num(key, value).map(|v| self.classes = v),
            "n" => parse_num(key, value).map(|v| self.n = v),
            "d" => parse_num(key, value).map(|v| self.d = v),
            "L" => parse_num(key, value).map(|v| self.layers = v),
            "xi" => parse_num(key, value).map(|v| self.xi = v),
            "eta" => parse_num(key, value).map(|v| self.eta = v),
            "tol" => parse_num(key, value).map(|v| self.tol = v),
            "max_iters" | "max-iters" => parse_num::<f64>(key, value).and_then(|v| {
                if v >= 0.0 && v.fract() == 0.0 {
                    self.max_iters = v as usize;
                    Ok(())
                } else {
                    Err(format!("invalid value `{value}` for `{key}`"))
                }
            }),
            "activation" => value.parse().map(|v| self.activation = v),
            "init" => value.parse().map(|v| self.init_mode = v),
            "out" => {
                self.out_dir = PathBuf::from(value);
                Ok(())
            }
            "noise" => parse_num(key, value).map(|v| self.noise = v),
            "log_every" | "log-every" => parse_num(key, value).map(|v| self.log_every = v),
            other => {
                return Err(Error::UnknownKey {
                    key: other.to_string(),
                    valid: VALID_KEYS.join(", "),
                })
            }
        };
        applied.map_err(|msg| Error::Parse { line: 0, msg })
    }

    pub fn architecture(&self) -> Result<Architecture> {
        Architecture::new(self.layers, self.d, self.classes, self.activation)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            eta: self.eta,
            tol: self.tol,
            max_iters: self.max_iters,
            log_every: self.log_every,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes == 0 || self.n == 0 {
            return Err(Error::Precondition("K and n must be >= 1".into()));
        }
        if self.d < self.classes * self.n {
            return Err(Error::Precondition(format!(
                "d = {} must be at least N = K*n = {}",
                self.d,
                self.classes * self.n
            )));
        }
        if !(self.xi > 0.0) {
            return Err(Error::Precondition(format!("xi must be > 0, got {}", self.xi)));
        }
        self.architecture()?;
        self.train_config().validate()
    }

    /// Seed for the weight initialization, derived from the run seed so the
    /// data and weight streams never coincide.
    pub fn init_seed(&self) -> u64 {
        self.seed ^ 0x9E37_79B9_7F4A_7C15
    }
}

/// Parse `key=value` lines over `base`; `#` starts a comment.
pub fn parse_config_str(text: &str, base: ExperimentConfig) -> Result<ExperimentConfig> {
    let mut cfg = base;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: line_no,
            msg: format!("expected key=value, got `{line}`"),
        })?;
        cfg.set(key.trim(), value).map_err(|e| match e {
            Error::Parse { msg, .. } => Error::Parse { line: line_no, msg },
            other => other,
        })?;
    }
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)?;
    parse_config_str(&text, ExperimentConfig::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_override_defaults() {
        let cfg = parse_config_str("L=9\nxi=0.3\n", ExperimentConfig::default()).unwrap();
        assert_eq!(cfg.layers, 9);
        assert_eq!(cfg.xi, 0.3);
        assert_eq!(cfg.d, 50);
        assert_eq!(cfg.classes, 3);
    }

    #[test]
    fn comments_and_blank_lines() {
        let text = "# header\n\nK = 4  # four classes\nactivation=relu\ninit=uniform_kaiming\nmax_iters=1e5\n";
        let cfg = parse_config_str(text, ExperimentConfig::default()).unwrap();
        assert_eq!(cfg.classes, 4);
        assert_eq!(cfg.activation, Activation::Relu);
        assert_eq!(cfg.init_mode, InitMode::UniformKaiming);
        assert_eq!(cfg.max_iters, 100_000);
    }

    #[test]
    fn malformed_value_reports_line() {
        match parse_config_str("L=abc", ExperimentConfig::default()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
        match parse_config_str("xi=0.1\nno equals sign", ExperimentConfig::default()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_key_lists_valid_keys() {
        match parse_config_str("width=3", ExperimentConfig::default()) {
            Err(Error::UnknownKey { key, valid }) => {
                assert_eq!(key, "width");
                assert!(valid.contains("xi") && valid.contains("max_iters"));
            }
            other => panic!("expected unknown key, got {other:?}"),
        }
    }

    #[test]
    fn later_assignment_wins() {
        let mut cfg = parse_config_str("eta=0.1", ExperimentConfig::default()).unwrap();
        cfg.set("eta", "0.05").unwrap();
        assert_eq!(cfg.eta, 0.05);
    }

    #[test]
    fn validation_catches_small_dimension() {
        let cfg = ExperimentConfig { d: 20, ..ExperimentConfig::default() };
        assert!(cfg.validate().is_err());
        assert!(ExperimentConfig::default().validate().is_ok());
    }
}
