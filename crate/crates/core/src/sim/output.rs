//! CSV files of a run directory.

use std::path::Path;

use crate::config::Arm;
use crate::error::{Error, Result};
use crate::sim::scenario::{ScenarioOutcome, TrainedScenario, TrainingReport};

pub const RUN_FILES: [&str; 6] = [
    "traces.csv",
    "residuals.csv",
    "nrmse.csv",
    "bip_ledger.csv",
    "summary.csv",
    "user_bip.csv",
];

fn writer(dir: &Path, name: &str) -> Result<csv::Writer<std::fs::File>> {
    let path = dir.join(name);
    let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    Ok(csv::Writer::from_writer(file))
}

/// Writes every run file plus `config.txt`, the fully resolved config.
pub fn write_run(dir: &Path, out: &ScenarioOutcome) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let cfg_path = dir.join("config.txt");
    std::fs::write(&cfg_path, out.config.render()).map_err(|e| Error::io(&cfg_path, e))?;

    let mut w = writer(dir, "traces.csv")?;
    w.write_record(["slot", "user", "x", "y", "chi_deg", "uplink_bs"])?;
    for (i, tr) in out.traces.iter().enumerate() {
        for t in 0..tr.len() {
            let obs = out.observer[i].get(t).map_or(String::new(), |j| j.to_string());
            w.write_record([
                t.to_string(),
                i.to_string(),
                tr.positions[t].0.to_string(),
                tr.positions[t].1.to_string(),
                tr.orientations[t].to_string(),
                obs,
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(dir.join("traces.csv"), e))?;

    write_residuals(dir, &out.training)?;

    let mut w = writer(dir, "nrmse.csv")?;
    w.write_record(["arm", "user", "nrmse"])?;
    for a in out.arms.iter().filter(|a| a.nrmse.is_some()) {
        for (i, v) in a.user_nrmse.iter().enumerate() {
            w.write_record([a.arm.to_string(), i.to_string(), v.to_string()])?;
        }
        w.write_record([a.arm.to_string(), "all".into(), a.nrmse.unwrap().to_string()])?;
    }
    w.flush().map_err(|e| Error::io(dir.join("nrmse.csv"), e))?;

    let mut w = writer(dir, "bip_ledger.csv")?;
    w.write_record([
        "arm",
        "slot",
        "user",
        "ul_bs",
        "dl_bs",
        "predicted_omega",
        "realized_omega",
        "uplink_ms",
        "downlink_ms",
        "quality",
    ])?;
    for a in &out.arms {
        for r in &a.ledger {
            w.write_record([
                a.arm.to_string(),
                r.slot.to_string(),
                r.user.to_string(),
                r.uplink.to_string(),
                r.downlink.to_string(),
                r.predicted_omega.map_or(String::new(), |o| u8::from(o).to_string()),
                u8::from(r.outcome.omega).to_string(),
                (r.outcome.uplink_s * 1e3).to_string(),
                (r.outcome.downlink_s * 1e3).to_string(),
                r.outcome.quality.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(dir.join("bip_ledger.csv"), e))?;

    let mut w = writer(dir, "summary.csv")?;
    w.write_record(["arm", "seed", "users", "base_stations", "total_bip", "mean_omega", "nrmse"])?;
    for a in &out.arms {
        w.write_record([
            a.arm.to_string(),
            out.config.seed.to_string(),
            out.config.n_users.to_string(),
            out.config.n_bs.to_string(),
            a.total_bip().to_string(),
            a.mean_omega().to_string(),
            a.nrmse.map_or(String::new(), |v| v.to_string()),
        ])?;
    }
    w.flush().map_err(|e| Error::io(dir.join("summary.csv"), e))?;

    // per-user scores sorted per arm, ready for an empirical CDF
    let mut w = writer(dir, "user_bip.csv")?;
    w.write_record(["arm", "user", "bip", "cdf"])?;
    for a in &out.arms {
        let mut order: Vec<usize> = (0..a.user_bip.len()).collect();
        order.sort_by(|&x, &y| a.user_bip[x].total_cmp(&a.user_bip[y]).then(x.cmp(&y)));
        let n = order.len() as f64;
        for (rank, &i) in order.iter().enumerate() {
            w.write_record([
                a.arm.to_string(),
                i.to_string(),
                a.user_bip[i].to_string(),
                ((rank + 1) as f64 / n).to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(dir.join("user_bip.csv"), e))?;
    Ok(())
}

fn write_residuals(dir: &Path, reports: &[TrainingReport]) -> Result<()> {
    let mut w = writer(dir, "residuals.csv")?;
    w.write_record(["user", "stage", "round", "max_primal", "dual", "shards", "converged"])?;
    for r in reports {
        for res in &r.trace {
            w.write_record([
                r.user.to_string(),
                r.stage.to_string(),
                res.round.to_string(),
                res.max_primal.to_string(),
                res.dual.to_string(),
                r.shards.len().to_string(),
                r.converged.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(dir.join("residuals.csv"), e))
}

/// `config.txt` and `residuals.csv` of a training-only run.
pub fn write_training(dir: &Path, trained: &TrainedScenario) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let cfg_path = dir.join("config.txt");
    std::fs::write(&cfg_path, trained.config.render()).map_err(|e| Error::io(&cfg_path, e))?;
    let reports: Vec<TrainingReport> = trained.reports().cloned().collect();
    write_residuals(dir, &reports)
}

/// Rates and geometry of every (user, BS) pair in one evaluation slot.
pub fn write_link_dump(dir: &Path, out: &ScenarioOutcome, slot: usize) -> Result<()> {
    use crate::assoc::LinkTable;
    use crate::radio::Geometry;
    use crate::sim::scenario::channel_draws;

    let cfg = &out.config;
    if slot >= out.traces.first().map_or(0, |t| t.len()) {
        return Err(Error::config("links", format!("slot {slot} outside the trace")));
    }
    let g = Geometry::steered(
        out.bs.clone(),
        out.traces.iter().map(|t| t.positions[slot]).collect(),
        out.traces.iter().map(|t| t.orientation_rad(slot)).collect(),
    );
    let draws = channel_draws(cfg.seed, slot, cfg.n_users, cfg.n_bs, cfg.ul_subcarriers);
    let table = LinkTable::compute(&g, &g.users, &draws, &cfg.radio)?;
    let mut w = writer(dir, "links.csv")?;
    w.write_record(["slot", "user", "bs", "distance_m", "los", "ul_mbps", "dl_mbps"])?;
    for i in 0..table.n_users() {
        for j in 0..table.n_bs() {
            w.write_record([
                slot.to_string(),
                i.to_string(),
                j.to_string(),
                table.distance[i][j].to_string(),
                table.los[i][j].to_string(),
                (table.ul_rate[i][j] / 1e6).to_string(),
                (table.dl_rate[i][j] / 1e6).to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(dir.join("links.csv"), e))
}

/// Totals per arm in `arms` order, the row shape of `summary.csv`.
pub fn totals(out: &ScenarioOutcome) -> Vec<(Arm, f64)> {
    out.arms.iter().map(|a| (a.arm, a.total_bip())).collect()
}
