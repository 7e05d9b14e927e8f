//! Scenario orchestration: mobility traces, feature maps, the per-slot
//! loop over every arm, run outputs and parameter sweeps.

pub mod features;
pub mod output;
pub mod scenario;
pub mod trace;

use std::path::Path;

use rayon::prelude::*;

use crate::config::{Arm, ScenarioConfig};
use crate::error::{Error, Result};

pub use output::{write_link_dump, write_run};
pub use scenario::{
    evaluate, run_scenario, train_scenario, ArmReport, LedgerRow, ScenarioOutcome, TrainedScenario, TrainingReport,
    UserModels,
};
pub use trace::{generate_traces, MobilityParams, UserTrace};

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub param: String,
    pub value: String,
    pub arm: Arm,
    pub mean_bip: f64,
    /// Sample std over seeds, 0 for a single seed.
    pub std_bip: f64,
    pub mean_nrmse: Option<f64>,
    pub seeds: usize,
}

/// Per-seed totals of one sweep point, `[seed][arm]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub value: String,
    pub seeds: Vec<u64>,
    pub totals: Vec<Vec<(Arm, f64)>>,
    pub nrmse: Vec<Vec<(Arm, f64)>>,
}

/// Replicate `r` of every point runs with seed `base.seed + r`, so points
/// of one sweep share traces and channels.
pub fn sweep_seeds(base: &ScenarioConfig, n_seeds: usize) -> Vec<u64> {
    (0..n_seeds as u64).map(|r| base.seed.wrapping_add(r)).collect()
}

/// Runs `key = value` for every value over `n_seeds` seeds.
pub fn run_sweep(base: &ScenarioConfig, key: &str, values: &[String], n_seeds: usize) -> Result<Vec<SweepPoint>> {
    if values.is_empty() || n_seeds == 0 {
        return Err(Error::config("sweep", "need at least one value and one seed"));
    }
    let seeds = sweep_seeds(base, n_seeds);
    let configs = values
        .iter()
        .map(|v| {
            let mut c = base.clone();
            c.set(key, v, "sweep")?;
            c.validate()?;
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, u64)> = (0..values.len()).flat_map(|p| seeds.iter().map(move |&s| (p, s))).collect();
    let runs = jobs
        .par_iter()
        .map(|&(p, s)| {
            let mut c = configs[p].clone();
            c.seed = s;
            let out = run_scenario(&c)?;
            let nrmse = out.arms.iter().filter_map(|a| a.nrmse.map(|v| (a.arm, v))).collect::<Vec<_>>();
            Ok((output::totals(&out), nrmse))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut points = Vec::with_capacity(values.len());
    let mut it = runs.into_iter();
    for v in values {
        let (totals, nrmse): (Vec<_>, Vec<_>) = it.by_ref().take(n_seeds).unzip();
        points.push(SweepPoint {
            value: v.clone(),
            seeds: seeds.clone(),
            totals,
            nrmse,
        });
    }
    Ok(points)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, var.sqrt())
}

pub fn summarize_sweep(key: &str, points: &[SweepPoint]) -> Vec<SweepRow> {
    let mut rows = Vec::new();
    for p in points {
        let arms: Vec<Arm> = p.totals.first().map_or(Vec::new(), |t| t.iter().map(|x| x.0).collect());
        for (a, &arm) in arms.iter().enumerate() {
            let vals: Vec<f64> = p.totals.iter().map(|t| t[a].1).collect();
            let (mean_bip, std_bip) = mean_std(&vals);
            let nr: Vec<f64> = p
                .nrmse
                .iter()
                .filter_map(|n| n.iter().find(|x| x.0 == arm).map(|x| x.1))
                .collect();
            rows.push(SweepRow {
                param: key.to_string(),
                value: p.value.clone(),
                arm,
                mean_bip,
                std_bip,
                mean_nrmse: (!nr.is_empty()).then(|| mean_std(&nr).0),
                seeds: vals.len(),
            });
        }
    }
    rows
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["param", "value", "arm", "mean_bip", "std_bip", "mean_nrmse", "seeds"])?;
    for r in rows {
        w.write_record([
            r.param.clone(),
            r.value.clone(),
            r.arm.to_string(),
            r.mean_bip.to_string(),
            r.std_bip.to_string(),
            r.mean_nrmse.map_or(String::new(), |v| v.to_string()),
            r.seeds.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
