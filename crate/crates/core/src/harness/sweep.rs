//! Multi-seed sweeps of the weight-assumption residuals.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::pipeline;
use crate::dataset;
use crate::network::{self, Activation};
use crate::theory;
use crate::training;

/// Apply `f` to every item on up to `jobs` threads; results keep input order.
pub fn parallel_map<T, R, F>(items: &[T], jobs: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let jobs = jobs.max(1).min(items.len().max(1));
    if jobs == 1 {
        return items.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().expect("result slots poisoned")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("result slots poisoned")
        .into_iter()
        .map(|r| r.expect("every item produces a result"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionRun {
    pub d: usize,
    pub layers: usize,
    pub seed: u64,
    pub converged: bool,
    pub iters: usize,
    pub theta_hat: f64,
    pub min_norm: f64,
    pub avg_bal: f64,
    pub sv_var: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionRow {
    pub d: usize,
    pub layers: usize,
    pub min_norm_mean: f64,
    pub avg_bal_mean: f64,
    pub sv_var_mean: f64,
    /// Converged runs contributing to the means.
    pub runs: usize,
    /// Runs dropped because they did not reach the tolerance.
    pub excluded: usize,
}

/// Train one linear network per `(d, L, seed)` and record the three
/// assumption residuals.
pub fn assumption_run(base: &ExperimentConfig, d: usize, layers: usize, seed: u64) -> Result<AssumptionRun> {
    let cfg = ExperimentConfig {
        d,
        layers,
        seed,
        activation: Activation::Linear,
        ..base.clone()
    };
    cfg.validate()?;
    let ds = pipeline::build_dataset(&cfg)?;
    let net = network::init(cfg.architecture()?, cfg.init_mode, cfg.xi, cfg.init_seed())?;
    let result = training::train(net, &ds, &cfg.train_config())?;
    let residuals = theory::residual_metrics(&result.net, &ds)?;
    Ok(AssumptionRun {
        d,
        layers,
        seed,
        converged: result.converged,
        iters: result.iters,
        theta_hat: dataset::measure_theta(&ds).theta_hat,
        min_norm: residuals.min_norm,
        avg_bal: residuals.avg_bal,
        sv_var: residuals.sv_var,
    })
}

pub fn aggregate(runs: &[AssumptionRun], widths: &[usize], depths: &[usize]) -> Vec<AssumptionRow> {
    let mut rows = Vec::new();
    for &d in widths {
        for &layers in depths {
            let group: Vec<&AssumptionRun> =
                runs.iter().filter(|r| r.d == d && r.layers == layers).collect();
            let kept: Vec<&&AssumptionRun> = group.iter().filter(|r| r.converged).collect();
            let count = kept.len();
            let mean = |f: fn(&AssumptionRun) -> f64| {
                if count == 0 {
                    f64::NAN
                } else {
                    kept.iter().map(|r| f(r)).sum::<f64>() / count as f64
                }
            };
            rows.push(AssumptionRow {
                d,
                layers,
                min_norm_mean: mean(|r| r.min_norm),
                avg_bal_mean: mean(|r| r.avg_bal),
                sv_var_mean: mean(|r| r.sv_var),
                runs: count,
                excluded: group.len() - count,
            });
        }
    }
    rows
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub runs: Vec<AssumptionRun>,
    pub rows: Vec<AssumptionRow>,
}

/// Every `(d, L, seed)` combination at scale `xi`; independent runs execute on
/// up to `jobs` threads, aggregation happens after all of them finish.
pub fn run_assumption_sweep(
    base: &ExperimentConfig,
    widths: &[usize],
    depths: &[usize],
    xi: f64,
    seeds: &[u64],
    jobs: usize,
) -> Result<SweepOutput> {
    let base = ExperimentConfig { xi, ..base.clone() };
    let mut grid = Vec::new();
    for &d in widths {
        for &layers in depths {
            for &seed in seeds {
                grid.push((d, layers, seed));
            }
        }
    }
    let results = parallel_map(&grid, jobs, |&(d, layers, seed)| {
        assumption_run(&base, d, layers, seed)
    });
    let runs = results
        .into_iter()
        .collect::<Result<Vec<_>>>()
        .map_err(Error::at_stage("sweep"))?;
    let rows = aggregate(&runs, widths, depths);
    Ok(SweepOutput { runs, rows })
}

pub fn write_assumptions_csv<W: Write>(rows: &[AssumptionRow], mut out: W) -> Result<()> {
    writeln!(out, "d,L,min_norm_mean,avg_bal_mean,sv_var_mean,runs")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{:e},{:e},{:e},{}",
            r.d, r.layers, r.min_norm_mean, r.avg_bal_mean, r.sv_var_mean, r.runs
        )?;
    }
    Ok(())
}

pub fn write_runs_csv<W: Write>(runs: &[AssumptionRun], mut out: W) -> Result<()> {
    writeln!(out, "d,L,seed,converged,iters,theta_hat,min_norm,avg_bal,sv_var")?;
    for r in runs {
        writeln!(
            out,
            "{},{},{},{},{},{:e},{:e},{:e},{:e}",
            r.d, r.layers, r.seed, r.converged, r.iters, r.theta_hat, r.min_norm, r.avg_bal, r.sv_var
        )?;
    }
    Ok(())
}

/// Writes `assumptions.csv` (aggregated) and `assumption_runs.csv` (per run).
pub fn write_sweep(dir: &Path, out: &SweepOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_assumptions_csv(&out.rows, BufWriter::new(File::create(dir.join("assumptions.csv"))?))?;
    write_runs_csv(&out.runs, BufWriter::new(File::create(dir.join("assumption_runs.csv"))?))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(d: usize, layers: usize, seed: u64, converged: bool, v: f64) -> AssumptionRun {
        AssumptionRun {
            d,
            layers,
            seed,
            converged,
            iters: 1,
            theta_hat: 0.0,
            min_norm: v,
            avg_bal: 2.0 * v,
            sv_var: 3.0 * v,
        }
    }

    #[test]
    fn aggregation_groups_and_excludes() {
        let runs = vec![
            run(50, 3, 0, true, 1.0),
            run(50, 3, 1, true, 3.0),
            run(50, 4, 0, false, 100.0),
            run(50, 4, 1, true, 5.0),
        ];
        let rows = aggregate(&runs, &[50], &[3, 4]);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].runs, 2);
        assert_eq!(rows[0].min_norm_mean, 2.0);
        assert_eq!(rows[0].sv_var_mean, 6.0);
        assert_eq!(rows[1].runs, 1);
        assert_eq!(rows[1].excluded, 1);
        assert_eq!(rows[1].avg_bal_mean, 10.0);
    }

    #[test]
    fn parallel_map_preserves_order() {
        let items: Vec<u64> = (0..37).collect();
        let serial = parallel_map(&items, 1, |x| x * x);
        let threaded = parallel_map(&items, 4, |x| x * x);
        assert_eq!(serial, threaded);
    }

    #[test]
    fn csv_header() {
        let mut out = Vec::new();
        write_assumptions_csv(&aggregate(&[run(50, 3, 0, true, 1.0)], &[50], &[3]), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("d,L,min_norm_mean,avg_bal_mean,sv_var_mean,runs\n50,3,"));
    }
}
