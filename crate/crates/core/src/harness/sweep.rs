use std::fmt;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{EpisodeConfig, ExperimentConfig, Policy};
use super::episode::{run_episode, EpisodeRecord};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepJob {
    pub cell: usize,
    pub policy: Policy,
    pub seed: u64,
}

/// Runs every (budget, σ_s, policy, seed) combination, in parallel, and
/// returns the records in that nesting order.
pub fn sweep(cfg: &ExperimentConfig) -> Result<Vec<EpisodeRecord>> {
    cfg.validate()?;
    let mut cells: Vec<EpisodeConfig> = Vec::new();
    for &b in &cfg.budgets {
        for &s in &cfg.sigma_s {
            cells.push(cfg.episode(b, s)?);
        }
    }
    let seeds = cfg.episode_seeds();
    let mut jobs = Vec::new();
    for cell in 0..cells.len() {
        for &policy in &cfg.policies {
            for &seed in &seeds {
                jobs.push(SweepJob { cell, policy, seed });
            }
        }
    }
    let run = || {
        jobs.par_iter()
            .map(|j| run_episode(&cells[j.cell], j.policy, j.seed))
            .collect::<Result<Vec<_>>>()
    };
    match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    }
}

pub const CSV_COLUMNS: [&str; 11] = [
    "policy",
    "seed",
    "budget",
    "sigma_s",
    "step",
    "trace_sigma",
    "rmse",
    "expected_improvement_mean",
    "cost_spent",
    "drilled",
    "frac_along_trajectory",
];

#[derive(Serialize)]
struct CsvRow<'a> {
    policy: &'a str,
    seed: u64,
    budget: f64,
    sigma_s: f64,
    step: i64,
    trace_sigma: f64,
    rmse: f64,
    expected_improvement_mean: f64,
    cost_spent: f64,
    drilled: u8,
    frac_along_trajectory: f64,
}

/// One row per executed reading, then a summary row (`step = -1`,
/// `drilled` = any drill, fraction 1).
pub fn write_csv<W: Write>(records: &[EpisodeRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        let policy = r.policy.name();
        for s in &r.steps {
            w.serialize(CsvRow {
                policy,
                seed: r.seed,
                budget: r.budget,
                sigma_s: r.sigma_s,
                step: s.step as i64,
                trace_sigma: s.trace,
                rmse: s.rmse,
                expected_improvement_mean: s.ei_mean,
                cost_spent: s.cost_spent,
                drilled: u8::from(s.sensor == crate::environment::SensorKind::Drill),
                frac_along_trajectory: r.fraction_along(s),
            })?;
        }
        let f = r.final_metrics();
        w.serialize(CsvRow {
            policy,
            seed: r.seed,
            budget: r.budget,
            sigma_s: r.sigma_s,
            step: -1,
            trace_sigma: f.trace,
            rmse: f.rmse,
            expected_improvement_mean: f.ei_mean,
            cost_spent: r.total_cost,
            drilled: u8::from(r.drills() > 0),
            frac_along_trajectory: 1.0,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(records: &[EpisodeRecord], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(records, std::io::BufWriter::new(file)).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub sd: f64,
}

pub fn mean_sd(xs: &[f64]) -> Stat {
    let n = xs.len();
    if n == 0 {
        return Stat { mean: f64::NAN, sd: f64::NAN };
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Stat { mean, sd }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellSummary {
    pub policy: Policy,
    pub budget: f64,
    pub sigma_s: f64,
    pub runs: usize,
    pub final_trace: Stat,
    pub variance_reduction: Stat,
    pub final_rmse: Stat,
    pub ei_mean: Stat,
    pub total_cost: Stat,
    pub drills: Stat,
    pub steps: Stat,
    pub planning_time_s: Stat,
}

impl fmt::Display for CellSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<15} b={:<6} sigma_s={:<5} runs={:<3} trace={:.3}±{:.3} vr={:.1}%±{:.1} rmse={:.3}±{:.3} ei={:.4} cost={:.2} drills={:.1} time={:.2}s",
            self.policy.name(),
            self.budget,
            self.sigma_s,
            self.runs,
            self.final_trace.mean,
            self.final_trace.sd,
            100.0 * self.variance_reduction.mean,
            100.0 * self.variance_reduction.sd,
            self.final_rmse.mean,
            self.final_rmse.sd,
            self.ei_mean.mean,
            self.total_cost.mean,
            self.drills.mean,
            self.planning_time_s.mean,
        )
    }
}

/// Mean and sd per (policy, budget, σ_s) cell, in order of first appearance.
pub fn summarize(records: &[EpisodeRecord]) -> Vec<CellSummary> {
    let mut keys: Vec<(Policy, f64, f64)> = Vec::new();
    for r in records {
        let k = (r.policy, r.budget, r.sigma_s);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(policy, budget, sigma_s)| {
            let rs: Vec<&EpisodeRecord> = records
                .iter()
                .filter(|r| r.policy == policy && r.budget == budget && r.sigma_s == sigma_s)
                .collect();
            let stat = |f: &dyn Fn(&EpisodeRecord) -> f64| mean_sd(&rs.iter().map(|r| f(r)).collect::<Vec<_>>());
            CellSummary {
                policy,
                budget,
                sigma_s,
                runs: rs.len(),
                final_trace: stat(&|r| r.final_metrics().trace),
                variance_reduction: stat(&|r| r.variance_reduction_fraction()),
                final_rmse: stat(&|r| r.final_metrics().rmse),
                ei_mean: stat(&|r| r.final_metrics().ei_mean),
                total_cost: stat(&|r| r.total_cost),
                drills: stat(&|r| r.drills() as f64),
                steps: stat(&|r| r.steps.len() as f64),
                planning_time_s: stat(&|r| r.planning_time_s),
            }
        })
        .collect()
}
