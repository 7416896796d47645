use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dlnlab::audit;
use dlnlab::dataset::{self, Dataset};
use dlnlab::harness::config::{parse_config, ExperimentConfig, OUT_ENV};
use dlnlab::harness::{figure, pipeline, sweep};
use dlnlab::network::{self, Network};
use dlnlab::{metrics, theory, training, Result};

#[derive(Parser)]
#[command(name = "dlnlab", version, about = "Layerwise compression and discrimination in deep linear networks")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// key=value config file; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long = "K", global = true)]
    classes: Option<usize>,
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long, global = true)]
    d: Option<usize>,
    #[arg(long = "L", global = true)]
    layers: Option<usize>,
    #[arg(long, global = true)]
    xi: Option<f64>,
    #[arg(long, global = true)]
    eta: Option<f64>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long = "max-iters", global = true)]
    max_iters: Option<String>,
    /// linear | relu
    #[arg(long, global = true)]
    activation: Option<String>,
    /// orthogonal | uniform_kaiming
    #[arg(long, global = true)]
    init: Option<String>,
    /// Output directory (default: $DLNLAB_OUT or ./out)
    #[arg(long, global = true, env = OUT_ENV)]
    out: Option<PathBuf>,
    /// Frobenius norm of the data perturbation (1 = standard recipe)
    #[arg(long, global = true)]
    noise: Option<f64>,
    #[arg(long = "log-every", global = true)]
    log_every: Option<usize>,
    /// Concurrent runs for sweeps and figures
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset and write dataset.bin
    GenData,
    /// Train a network and write network.bin and trajectory.csv
    Train {
        /// Existing dataset file (otherwise generated from the config)
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Per-layer metrics for a trained network
    Metrics {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        net: PathBuf,
    },
    /// Data and weight audits as a JSON list of inequalities
    Audit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        net: PathBuf,
    },
    /// Evaluate the compression and discrimination bounds
    Bounds {
        /// Low-rank level (defaults to xi)
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        theta: f64,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
    },
    /// Full pipeline for one config
    Run,
    /// Assumption residuals over a width × depth × seed grid
    SweepAssumptions {
        #[arg(long, value_delimiter = ',', default_value = "50,100,200")]
        widths: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "3,4,5")]
        depths: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        num_seeds: u64,
    },
    /// Compression/discrimination bound figures for several xi values
    FigureBounds {
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.3,0.5")]
        xis: Vec<f64>,
    },
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => parse_config(path)?,
            None => ExperimentConfig::default(),
        };
        let pairs: [(&str, Option<String>); 14] = [
            ("seed", self.seed.map(|v| v.to_string())),
            ("K", self.classes.map(|v| v.to_string())),
            ("n", self.n.map(|v| v.to_string())),
            ("d", self.d.map(|v| v.to_string())),
            ("L", self.layers.map(|v| v.to_string())),
            ("xi", self.xi.map(|v| v.to_string())),
            ("eta", self.eta.map(|v| v.to_string())),
            ("tol", self.tol.map(|v| v.to_string())),
            ("max_iters", self.max_iters.clone()),
            ("activation", self.activation.clone()),
            ("init", self.init.clone()),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
            ("noise", self.noise.map(|v| v.to_string())),
            ("log_every", self.log_every.map(|v| v.to_string())),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        Ok(cfg)
    }
}

fn load_data(path: &Path) -> Result<Dataset> {
    dataset::read_dataset(BufReader::new(File::open(path)?))
}

fn load_net(path: &Path) -> Result<Network> {
    network::read_network(BufReader::new(File::open(path)?))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn run(cli: Cli) -> Result<()> {
    let common = &cli.common;
    let cfg = common.resolve()?;
    let stdout = io::stdout();
    let mut so = stdout.lock();
    match cli.command {
        Command::GenData => {
            cfg.validate()?;
            let ds = pipeline::build_dataset(&cfg)?;
            let mut w = create(&cfg.out_dir, "dataset.bin")?;
            dataset::write_dataset(&ds, &mut w)?;
            w.flush()?;
            let a = dataset::measure_theta(&ds);
            writeln!(so, "theta_hat={:e} compliant={}", a.theta_hat, a.compliant)?;
        }
        Command::Train { data } => {
            cfg.validate()?;
            let ds = match data {
                Some(p) => load_data(&p)?,
                None => pipeline::build_dataset(&cfg)?,
            };
            let net = network::init(cfg.architecture()?, cfg.init_mode, cfg.xi, cfg.init_seed())?;
            let res = training::train(net, &ds, &cfg.train_config())?;
            let mut w = create(&cfg.out_dir, "network.bin")?;
            network::write_network(&res.net, &mut w)?;
            w.flush()?;
            training::write_trajectory_csv(&res, create(&cfg.out_dir, "trajectory.csv")?)?;
            writeln!(
                so,
                "converged={} iters={} final_loss={:e}",
                res.converged, res.iters, res.final_loss
            )?;
        }
        Command::Metrics { data, net } => {
            let rows = metrics::layer_sweep(&load_net(&net)?, &load_data(&data)?)?;
            metrics::write_metrics_csv(&rows, create(&cfg.out_dir, "metrics.csv")?)?;
            metrics::write_metrics_csv(&rows, &mut so)?;
        }
        Command::Audit { data, net } => {
            let ds = load_data(&data)?;
            let net = load_net(&net)?;
            let mut checks = dataset::audit_spectrum(&ds)?;
            let report = theory::assumption_report(&net, &ds)?;
            checks.extend(report.hypothesis.iter().cloned());
            checks.extend(report.spectra.iter().cloned());
            let text = audit::to_json(&checks)?;
            let mut w = create(&cfg.out_dir, "audit.json")?;
            writeln!(w, "{text}")?;
            writeln!(so, "{text}")?;
        }
        Command::Bounds { eps, theta, delta } => {
            let eps = eps.unwrap_or(cfg.xi);
            let params = theory::AssumptionParams {
                delta_hat: delta,
                eps_hat: eps,
                rho_hat: 0.0,
                theta_hat: theta,
                interior_bal_max: 0.0,
            };
            let bounds = theory::theory_bounds(&params, cfg.n, cfg.classes, cfg.layers)?;
            writeln!(so, "{}", serde_json::to_string_pretty(&bounds)?)?;
        }
        Command::Run => {
            let report = pipeline::run_single(&cfg)?;
            writeln!(
                so,
                "converged={} iters={} final_loss={:e} out={}",
                report.train.converged,
                report.train.iters,
                report.train.final_loss,
                cfg.out_dir.display()
            )?;
            for v in &report.verdicts {
                writeln!(so, "{:?} l={} value={:e} [{:e}, {:e}] {:?}", v.kind, v.layer, v.value, v.lower, v.upper, v.status)?;
            }
        }
        Command::SweepAssumptions { widths, depths, num_seeds } => {
            let seeds: Vec<u64> = (0..num_seeds).map(|s| cfg.seed + s).collect();
            let out = sweep::run_assumption_sweep(&cfg, &widths, &depths, cfg.xi, &seeds, common.jobs)?;
            sweep::write_sweep(&cfg.out_dir, &out)?;
            sweep::write_assumptions_csv(&out.rows, &mut so)?;
        }
        Command::FigureBounds { xis } => {
            let cfgs: Vec<ExperimentConfig> = xis
                .iter()
                .map(|&xi| ExperimentConfig { xi, ..cfg.clone() })
                .collect();
            for path in figure::run_bound_figure(&cfgs, &cfg.out_dir)? {
                writeln!(so, "{}", path.display())?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
