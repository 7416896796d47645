//! Single-run pipeline: data → audit → init → train → metrics → assumptions →
//! bounds → verdicts, with CSV/JSON artifacts written to the run directory.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::audit::InequalityCheck;
use crate::dataset::{self, Dataset, OrthogonalityAudit};
use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::metrics::{self, LayerMetrics};
use crate::network::{self, Activation};
use crate::theory::{self, AssumptionReport, TheoryBounds};
use crate::training::{self, TrainResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictStatus {
    Contained,
    Violated,
    HypothesesUnmet,
    NotConverged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictKind {
    /// `C_{l+1}/C_l` inside its compression interval.
    CompressionRatio,
    /// `D_l` above the explicit discrimination bound.
    Discrimination,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundVerdict {
    pub kind: VerdictKind,
    /// Layer `l` for ratios `C_{l+1}/C_l`, or `l` for `D_l`.
    pub layer: usize,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    /// The measured value lies in `[lower, upper]`, regardless of hypotheses.
    pub inside: bool,
    pub status: VerdictStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub final_loss: f64,
    pub iters: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub data: OrthogonalityAudit,
    pub data_spectrum: Vec<InequalityCheck>,
    pub train: TrainSummary,
    pub metrics: Vec<LayerMetrics>,
    pub assumptions: Option<AssumptionReport>,
    pub bounds: Option<TheoryBounds>,
    pub verdicts: Vec<BoundVerdict>,
}

impl RunReport {
    pub fn compression_ratios(&self) -> Vec<f64> {
        self.metrics
            .windows(2)
            .map(|w| w[1].compression / w[0].compression)
            .collect()
    }

    /// Every audited inequality in the run, in one flat list.
    pub fn inequalities(&self) -> Vec<InequalityCheck> {
        let mut all = self.data_spectrum.clone();
        if let Some(a) = &self.assumptions {
            all.extend(a.hypothesis.iter().cloned());
            all.extend(a.spectra.iter().cloned());
        }
        all
    }
}

/// Everything a run produces before it is written to disk.
pub struct RunOutput {
    pub report: RunReport,
    pub dataset: Dataset,
    pub result: TrainResult,
}

pub fn build_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    dataset::generate_with_noise(cfg.d, cfg.classes, cfg.n, cfg.seed, cfg.noise)
}

/// Ratio and discrimination verdicts. A verdict only counts as
/// contained/violated when the run converged and the hypotheses hold.
pub fn verdicts(
    metrics: &[LayerMetrics],
    bounds: &TheoryBounds,
    hypotheses_ok: bool,
    converged: bool,
) -> Vec<BoundVerdict> {
    let status = |inside: bool| {
        if !converged {
            VerdictStatus::NotConverged
        } else if !hypotheses_ok {
            VerdictStatus::HypothesesUnmet
        } else if inside {
            VerdictStatus::Contained
        } else {
            VerdictStatus::Violated
        }
    };
    let mut out = Vec::new();
    for (l, pair) in metrics.windows(2).enumerate() {
        let ratio = pair[1].compression / pair[0].compression;
        let (lower, upper) = if l == 0 {
            (bounds.ratio_lower_first, bounds.ratio_upper_first)
        } else {
            (bounds.ratio_lower, bounds.ratio_upper)
        };
        let inside = lower <= ratio && ratio <= upper;
        out.push(BoundVerdict {
            kind: VerdictKind::CompressionRatio,
            layer: l,
            value: ratio,
            lower,
            upper,
            inside,
            status: status(inside),
        });
    }
    for (m, &lower) in metrics.iter().skip(1).zip(&bounds.d_lower) {
        let inside = m.discrimination >= lower;
        out.push(BoundVerdict {
            kind: VerdictKind::Discrimination,
            layer: m.layer,
            value: m.discrimination,
            lower,
            upper: 2.0,
            inside,
            status: status(inside),
        });
    }
    out
}

pub fn execute(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate().map_err(Error::at_stage("config"))?;
    let ds = build_dataset(cfg).map_err(Error::at_stage("generate"))?;
    let data = dataset::measure_theta(&ds);
    let data_spectrum = dataset::audit_spectrum(&ds).map_err(Error::at_stage("audit-data"))?;

    let arch = cfg.architecture().map_err(Error::at_stage("init"))?;
    let net = network::init(arch, cfg.init_mode, cfg.xi, cfg.init_seed())
        .map_err(Error::at_stage("init"))?;
    let result = training::train(net, &ds, &cfg.train_config()).map_err(Error::at_stage("train"))?;
    let layer_metrics =
        metrics::layer_sweep(&result.net, &ds).map_err(Error::at_stage("metrics"))?;

    let (assumptions, bounds, verdict_list) = if cfg.activation == Activation::Linear {
        let report =
            theory::assumption_report(&result.net, &ds).map_err(Error::at_stage("assumptions"))?;
        // Out-of-domain constants (e.g. ε^{2(L−1)} ≥ n) leave the run without bounds.
        let bounds = theory::theory_bounds(&report.params, cfg.n, cfg.classes, cfg.layers).ok();
        let list = bounds
            .as_ref()
            .map(|b| verdicts(&layer_metrics, b, report.hypothesis_ok, result.converged))
            .unwrap_or_default();
        (Some(report), bounds, list)
    } else {
        (None, None, Vec::new())
    };

    let report = RunReport {
        config: cfg.clone(),
        data,
        data_spectrum,
        train: TrainSummary {
            final_loss: result.final_loss,
            iters: result.iters,
            converged: result.converged,
        },
        metrics: layer_metrics,
        assumptions,
        bounds,
        verdicts: verdict_list,
    };
    Ok(RunOutput {
        report,
        dataset: ds,
        result,
    })
}

/// Run the pipeline and write `metrics.csv`, `bounds.csv`, `report.json`
/// and `trajectory.csv` into `cfg.out_dir`.
pub fn run_single(cfg: &ExperimentConfig) -> Result<RunReport> {
    let out = execute(cfg)?;
    write_run(&cfg.out_dir, &out).map_err(Error::at_stage("write"))?;
    Ok(out.report)
}

pub fn write_run(dir: &Path, out: &RunOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    metrics::write_metrics_csv(&out.report.metrics, create(dir, "metrics.csv")?)?;
    write_bounds_csv(&out.report, create(dir, "bounds.csv")?)?;
    training::write_trajectory_csv(&out.result, create(dir, "trajectory.csv")?)?;
    let mut json = create(dir, "report.json")?;
    serde_json::to_writer_pretty(&mut json, &ReportFile::from(&out.report))?;
    writeln!(json)?;
    Ok(())
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

#[derive(Serialize)]
struct ReportFile<'a> {
    #[serde(flatten)]
    report: &'a RunReport,
    inequalities: Vec<InequalityCheck>,
}

impl<'a> From<&'a RunReport> for ReportFile<'a> {
    fn from(report: &'a RunReport) -> Self {
        Self {
            inequalities: report.inequalities(),
            report,
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

/// Per-layer bound table:
/// `layer,C,C_env_lower,C_env_upper,ratio,ratio_lower,ratio_upper,D,D_lower`.
///
/// The envelope columns chain the ratio intervals from `C_0`; the ratio
/// columns compare `C_l/C_{l−1}` with its own interval.
pub fn write_bounds_csv<W: Write>(report: &RunReport, mut out: W) -> Result<()> {
    writeln!(out, "layer,C,C_env_lower,C_env_upper,ratio,ratio_lower,ratio_upper,D,D_lower")?;
    let envelope = report.bounds.as_ref().map(|b| envelope(&report.metrics, b));
    for (l, m) in report.metrics.iter().enumerate() {
        let (env_lo, env_hi) = match &envelope {
            Some(env) => (Some(env[l].0), Some(env[l].1)),
            None => (None, None),
        };
        let (ratio, r_lo, r_hi) = match (&report.bounds, l) {
            (Some(b), l) if l >= 1 => {
                let (lo, hi) = if l == 1 {
                    (b.ratio_lower_first, b.ratio_upper_first)
                } else {
                    (b.ratio_lower, b.ratio_upper)
                };
                let r = m.compression / report.metrics[l - 1].compression;
                (Some(r), Some(lo), Some(hi))
            }
            _ => (None, None, None),
        };
        let d_lo = match (&report.bounds, l) {
            (Some(b), l) if l >= 1 => b.d_lower.get(l - 1).copied(),
            _ => None,
        };
        writeln!(
            out,
            "{},{:e},{},{},{},{},{},{:e},{}",
            l,
            m.compression,
            opt(env_lo),
            opt(env_hi),
            opt(ratio),
            opt(r_lo),
            opt(r_hi),
            m.discrimination,
            opt(d_lo)
        )?;
    }
    Ok(())
}

/// `C_0` carried forward through the ratio intervals, one `(lower, upper)`
/// pair per layer.
pub fn envelope(metrics: &[LayerMetrics], bounds: &TheoryBounds) -> Vec<(f64, f64)> {
    let mut env = Vec::with_capacity(metrics.len());
    let Some(first) = metrics.first() else {
        return env;
    };
    let (mut lo, mut hi) = (first.compression, first.compression);
    env.push((lo, hi));
    for l in 1..metrics.len() {
        if l == 1 {
            lo *= bounds.ratio_lower_first;
            hi *= bounds.ratio_upper_first;
        } else {
            lo *= bounds.ratio_lower;
            hi *= bounds.ratio_upper;
        }
        env.push((lo, hi));
    }
    env
}
