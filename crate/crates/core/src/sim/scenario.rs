//! One seeded scenario: traces, sharded data collection, per-user training,
//! then a slot-by-slot evaluation of every arm on the true geometry.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;

use crate::assoc::{
    evaluate_plan, random_association, select_association, AssociationPlan, ChannelDraws, LinkContext, LinkTable,
};
use crate::bip::{bip_score_seeded, SlotOutcome, VideoFrameModel};
use crate::capacity::nrmse;
use crate::config::{Arm, ScenarioConfig};
use crate::error::{Error, Result};
use crate::esn::EsnModel;
use crate::federated::{predict_rows, run_features, train_federated, LocalDataset, RoundResiduals};
use crate::linalg;
use crate::radio::{Geometry, Point};
use crate::sim::features::{build_inputs, build_targets, decode_step};
use crate::sim::trace::{generate_traces, MobilityParams, UserTrace};

/// SplitMix64 over a tag list, for independent per-purpose seeds.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    let mut s = seed;
    for &t in tags {
        s ^= t.wrapping_add(0x9E37_79B9_7F4A_7C15);
        s = s.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = s;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        s = z ^ (z >> 31);
    }
    s
}

/// BSs on a sunflower spiral, which spreads any count evenly over the disc.
pub fn bs_layout(n_bs: usize, radius: f64) -> Vec<Point> {
    if n_bs == 1 {
        return vec![(0.0, 0.0)];
    }
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n_bs)
        .map(|k| {
            let r = radius * ((k as f64 + 0.5) / n_bs as f64).sqrt();
            let a = k as f64 * golden;
            (r * a.cos(), r * a.sin())
        })
        .collect()
}

/// Fading and shadowing of one slot. Draws for BS `j` do not depend on how
/// many BSs follow it, so sweeps over `B` share channels.
pub fn channel_draws(seed: u64, slot: usize, n_users: usize, n_bs: usize, subcarriers: usize) -> ChannelDraws {
    let mut fading = Vec::with_capacity(n_users);
    let mut shadow = Vec::with_capacity(n_users);
    for i in 0..n_users {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[5, slot as u64, i as u64]));
        let mut f = Vec::with_capacity(n_bs);
        let mut s = Vec::with_capacity(n_bs);
        for _ in 0..n_bs {
            f.push(Exp1.sample(&mut rng));
            s.push(StandardNormal.sample(&mut rng));
        }
        fading.push(f);
        shadow.push(s);
    }
    let subcarrier = (0..n_users)
        .map(|i| if subcarriers == 0 { i } else { i % subcarriers })
        .collect();
    ChannelDraws {
        fading,
        shadow,
        subcarrier,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LedgerRow {
    pub slot: usize,
    pub user: usize,
    pub uplink: usize,
    pub downlink: usize,
    /// `None` for arms that plan without a snapshot.
    pub predicted_omega: Option<bool>,
    pub outcome: SlotOutcome,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArmReport {
    pub arm: Arm,
    /// Held-out NRMSE on normalized targets, for the predicting arms.
    pub nrmse: Option<f64>,
    pub user_nrmse: Vec<f64>,
    pub user_bip: Vec<f64>,
    /// `[user][eval slot]`
    pub omegas: Vec<Vec<bool>>,
    pub ledger: Vec<LedgerRow>,
}

impl ArmReport {
    pub fn total_bip(&self) -> f64 {
        self.user_bip.iter().sum()
    }

    pub fn mean_omega(&self) -> f64 {
        let n: usize = self.omegas.iter().map(Vec::len).sum();
        let hits: usize = self.omegas.iter().flatten().filter(|&&w| w).count();
        hits as f64 / n.max(1) as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingReport {
    pub user: usize,
    pub stage: usize,
    /// BSs holding at least one row of this user.
    pub shards: Vec<usize>,
    pub trace: Vec<RoundResiduals>,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct ScenarioOutcome {
    pub config: ScenarioConfig,
    pub bs: Vec<Point>,
    pub traces: Vec<UserTrace>,
    /// Uplink BS per user and slot, for every slot that has inputs.
    pub observer: Vec<Vec<usize>>,
    pub training: Vec<TrainingReport>,
    pub arms: Vec<ArmReport>,
}

impl ScenarioOutcome {
    pub fn arm(&self, arm: Arm) -> Option<&ArmReport> {
        self.arms.iter().find(|a| a.arm == arm)
    }

    pub fn non_converged(&self) -> usize {
        self.training.iter().filter(|r| !r.converged).count()
    }
}

fn in_phase(phase: &'static str, seed: u64) -> impl Fn(Error) -> Error {
    move |e| Error::Phase {
        phase,
        seed,
        source: Box::new(e),
    }
}

fn best_uplink(table: &LinkTable, i: usize) -> usize {
    let row = &table.ul_rate[i];
    (0..row.len()).fold(0, |b, j| if row[j] > row[b] { j } else { b })
}

fn geometry_at(bs: &[Point], traces: &[UserTrace], t: usize) -> Geometry {
    Geometry::steered(
        bs.to_vec(),
        traces.iter().map(|u| u.positions[t]).collect(),
        traces.iter().map(|u| u.orientation_rad(t)).collect(),
    )
}

fn rows_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let c = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(rows.len(), c, |r, k| rows[r][k])
}

/// Models trained for one user.
#[derive(Clone, Debug)]
pub struct UserModels {
    /// Consensus readout per stage.
    pub readouts: Vec<DMatrix<f64>>,
    /// Consensus predictions for every evaluation slot.
    pub federated: Vec<Vec<f64>>,
    /// Local predictions `[bs][eval slot]`; `None` where the BS holds no rows.
    pub local: Vec<Option<Vec<Vec<f64>>>>,
    pub reports: Vec<TrainingReport>,
}

/// Everything up to and including training.
#[derive(Clone, Debug)]
pub struct TrainedScenario {
    pub config: ScenarioConfig,
    pub bs: Vec<Point>,
    pub traces: Vec<UserTrace>,
    /// Uplink BS per user and slot, for every slot that has inputs.
    pub observer: Vec<Vec<usize>>,
    /// Normalized targets per user and slot.
    pub targets: Vec<Vec<Vec<f64>>>,
    pub models: Vec<UserModels>,
}

impl TrainedScenario {
    pub fn reports(&self) -> impl Iterator<Item = &TrainingReport> {
        self.models.iter().flat_map(|m| &m.reports)
    }
}

struct UserData<'a> {
    user: usize,
    inputs: &'a [Vec<f64>],
    targets: &'a DMatrix<f64>,
    /// Training rows per BS.
    shards: Vec<Vec<usize>>,
}

fn eval_predictions(model: &mut EsnModel, inputs: &[Vec<f64>], eval: std::ops::Range<usize>) -> Result<Vec<Vec<f64>>> {
    let last = model.n_stages() - 1;
    let h = run_features(model, inputs, last)?;
    let rows = h.rows(eval.start, eval.len()).into_owned();
    let pred = predict_rows(model.readout(last), &rows);
    Ok((0..pred.nrows()).map(|r| pred.row(r).iter().copied().collect()).collect())
}

fn train_user(cfg: &ScenarioConfig, template: &EsnModel, d: &UserData, eval: std::ops::Range<usize>) -> Result<UserModels> {
    let mut fed = template.clone();
    let mut reports = Vec::new();
    let owners: Vec<usize> = (0..d.shards.len()).filter(|&j| !d.shards[j].is_empty()).collect();
    if owners.is_empty() {
        return Err(Error::Empty("training rows for a user"));
    }
    for stage in 0..fed.n_stages() {
        let h = run_features(&mut fed, d.inputs, stage)?;
        let full = LocalDataset::new(0, h.rows(0, d.targets.nrows()).into_owned(), d.targets.clone())?;
        let datasets = owners
            .iter()
            .map(|&j| full.select(j, &d.shards[j]))
            .collect::<Result<Vec<_>>>()?;
        let out = train_federated(&datasets, cfg.trainer)?;
        if !out.converged {
            let r = out.final_residuals();
            log::debug!(
                "user {} stage {stage}: no consensus after {} rounds (max |r| {:.2e}, |s| {:.2e})",
                d.user,
                out.rounds,
                r.max_primal,
                r.dual
            );
        }
        reports.push(TrainingReport {
            user: d.user,
            stage,
            shards: owners.clone(),
            trace: out.trace.clone(),
            converged: out.converged,
        });
        fed.set_readout(stage, out.weights)?;
    }
    let federated = eval_predictions(&mut fed, d.inputs, eval.clone())?;
    let readouts = (0..fed.n_stages()).map(|l| fed.readout(l).clone()).collect();

    let mut local = vec![None; d.shards.len()];
    for &j in &owners {
        let mut m = template.clone();
        for stage in 0..m.n_stages() {
            let h = run_features(&mut m, d.inputs, stage)?;
            let rows = &d.shards[j];
            let hs = h.select_rows(rows.iter());
            let es = d.targets.select_rows(rows.iter());
            m.set_readout(stage, linalg::ridge(&hs, &es, cfg.trainer.lambda)?)?;
        }
        local[j] = Some(eval_predictions(&mut m, d.inputs, eval.clone())?);
    }
    Ok(UserModels {
        readouts,
        federated,
        local,
        reports,
    })
}

pub fn frame_model(cfg: &ScenarioConfig) -> Result<VideoFrameModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[3]));
    VideoFrameModel::profile(
        cfg.frame_groups,
        cfg.frame_uncompressible,
        &mut rng,
        cfg.frame_full_bits,
        cfg.frame_tracking_bits,
        cfg.frame_delay_budget,
        cfg.frame_quality,
    )
}

pub fn mobility(cfg: &ScenarioConfig) -> MobilityParams {
    MobilityParams {
        radius: cfg.radius,
        speed_min: cfg.speed_min,
        speed_max: cfg.speed_max,
        pause_max_slots: cfg.pause_max_slots,
        orientation_std_deg: cfg.orientation_std_deg,
        slot_duration: cfg.slot_duration,
    }
}

struct Plan {
    plan: AssociationPlan,
    predicted: Option<Vec<SlotOutcome>>,
    realized: Vec<SlotOutcome>,
}

/// Traces, sharded data collection and per-user training.
pub fn train_scenario(cfg: &ScenarioConfig) -> Result<TrainedScenario> {
    cfg.validate()?;
    let seed = cfg.seed;
    let (u, b) = (cfg.n_users, cfg.n_bs);
    let n_in = cfg.t_train + cfg.t_eval;
    let eval = cfg.t_train..n_in;

    let traces = generate_traces(&mobility(cfg), u, n_in + cfg.horizon + 1, seed).map_err(in_phase("trace", seed))?;
    let bs = bs_layout(b, cfg.radius);
    frame_model(cfg).map_err(in_phase("trace", seed))?;

    // observation assignment: the best instantaneous uplink in every slot
    let observer_by_slot = (0..n_in)
        .into_par_iter()
        .map(|t| {
            let g = geometry_at(&bs, &traces, t);
            let draws = channel_draws(seed, t, u, b, cfg.ul_subcarriers);
            let table = LinkTable::compute(&g, &g.users, &draws, &cfg.radio)?;
            Ok((0..u).map(|i| best_uplink(&table, i)).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()
        .map_err(in_phase("collect", seed))?;
    let observer: Vec<Vec<usize>> = (0..u).map(|i| observer_by_slot.iter().map(|s| s[i]).collect()).collect();

    let inputs: Vec<Vec<Vec<f64>>> = traces
        .iter()
        .map(|t| build_inputs(t, cfg.history, cfg.radius, cfg.app_feature, n_in))
        .collect();
    let targets: Vec<Vec<Vec<f64>>> = traces
        .iter()
        .map(|t| build_targets(t, cfg.horizon, cfg.radius, n_in))
        .collect();
    let train_targets: Vec<DMatrix<f64>> = targets.iter().map(|t| rows_matrix(t)).collect();

    let template = EsnModel::build(cfg.reservoir_spec(), cfg.topology).map_err(in_phase("train", seed))?;
    let models = (0..u)
        .into_par_iter()
        .map(|i| {
            let mut shards = vec![Vec::new(); b];
            for t in cfg.washout()..cfg.t_train {
                shards[observer[i][t]].push(t);
            }
            let data = UserData {
                user: i,
                inputs: &inputs[i],
                targets: &train_targets[i],
                shards,
            };
            train_user(cfg, &template, &data, eval.clone())
        })
        .collect::<Result<Vec<_>>>()
        .map_err(in_phase("train", seed))?;

    let unconverged = models.iter().flat_map(|m| &m.reports).filter(|r| !r.converged).count();
    if unconverged > 0 {
        log::warn!(
            "seed {seed}: {unconverged} of {} consensus fits stopped at {} rounds before the tolerance",
            models.iter().map(|m| m.reports.len()).sum::<usize>(),
            cfg.trainer.max_rounds
        );
    }
    Ok(TrainedScenario {
        config: cfg.clone(),
        bs,
        traces,
        observer,
        targets,
        models,
    })
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let trained = train_scenario(cfg)?;
    evaluate(trained)
}

/// Evaluation of every configured arm on a trained scenario.
pub fn evaluate(trained: TrainedScenario) -> Result<ScenarioOutcome> {
    let TrainedScenario {
        config,
        bs,
        traces,
        observer,
        targets,
        models,
    } = trained;
    let cfg = &config;
    let seed = cfg.seed;
    let (u, b) = (cfg.n_users, cfg.n_bs);
    let eval = cfg.t_train..cfg.t_train + cfg.t_eval;
    let frame = frame_model(cfg).map_err(in_phase("associate", seed))?;
    let ctx = LinkContext {
        radio: &cfg.radio,
        frame: &frame,
        slot_duration: cfg.slot_duration,
    };

    // centralized arm: the serving BS's own model, zeros if it holds none
    let zero = vec![0.0; cfg.n_outputs()];
    let centralized: Vec<Vec<Vec<f64>>> = (0..u)
        .map(|i| {
            eval.clone()
                .enumerate()
                .map(|(e, t)| match &models[i].local[observer[i][t]] {
                    Some(p) => p[e].clone(),
                    None => zero.clone(),
                })
                .collect()
        })
        .collect();

    let held_out = |pred: Vec<&Vec<Vec<f64>>>| -> Result<(f64, Vec<f64>)> {
        let mut all_p = Vec::new();
        let mut all_t = Vec::new();
        let mut per_user = Vec::with_capacity(u);
        for i in 0..u {
            let p = pred[i];
            let tg = &targets[i][eval.clone()];
            per_user.push(nrmse(p, tg)?);
            all_p.extend(p.iter().cloned());
            all_t.extend(tg.iter().cloned());
        }
        Ok((nrmse(&all_p, &all_t)?, per_user))
    };
    let fed_nrmse = held_out(models.iter().map(|m| &m.federated).collect()).map_err(in_phase("score", seed))?;
    let cen_nrmse = held_out(centralized.iter().collect()).map_err(in_phase("score", seed))?;

    let arms: Vec<Arm> = cfg.arms.0.clone();
    let slot_plans = eval
        .clone()
        .enumerate()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(e, t)| {
            let s = t + 1;
            let truth = geometry_at(&bs, &traces, s);
            let draws = channel_draws(seed, s, u, b, cfg.ul_subcarriers);
            let bandit_seed = derive_seed(seed, &[7, s as u64]);
            let snapshot_plan = |pred: Vec<&Vec<f64>>| -> Result<Plan> {
                let steps: Vec<(Point, f64)> = (0..u).map(|i| decode_step(pred[i], 1, cfg.radius)).collect();
                let aim: Vec<Point> = steps.iter().map(|s| s.0).collect();
                let snap = Geometry::steered(bs.clone(), aim.clone(), steps.iter().map(|s| s.1.to_radians()).collect());
                let predicted_table = LinkTable::compute(&snap, &aim, &draws, &cfg.radio)?;
                let plan = select_association(&predicted_table, &ctx, cfg.v_cap, &cfg.bandit, bandit_seed)?;
                let real = LinkTable::compute(&truth, &aim, &draws, &cfg.radio)?;
                Ok(Plan {
                    predicted: Some(evaluate_plan(&predicted_table, &plan, &ctx)),
                    realized: evaluate_plan(&real, &plan, &ctx),
                    plan,
                })
            };
            arms.iter()
                .map(|&arm| match arm {
                    Arm::Perfect => {
                        let table = LinkTable::compute(&truth, &truth.users, &draws, &cfg.radio)?;
                        let plan = select_association(&table, &ctx, cfg.v_cap, &cfg.bandit, bandit_seed)?;
                        let realized = evaluate_plan(&table, &plan, &ctx);
                        Ok(Plan {
                            predicted: Some(realized.clone()),
                            realized,
                            plan,
                        })
                    }
                    Arm::Federated => snapshot_plan(models.iter().map(|m| &m.federated[e]).collect()),
                    Arm::Centralized => snapshot_plan(centralized.iter().map(|c| &c[e]).collect()),
                    Arm::Random => {
                        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[11, s as u64]));
                        let plan = random_association(u, b, cfg.v_cap, &mut rng)?;
                        let last: Vec<Point> = traces.iter().map(|tr| tr.positions[t]).collect();
                        let real = LinkTable::compute(&truth, &last, &draws, &cfg.radio)?;
                        Ok(Plan {
                            predicted: None,
                            realized: evaluate_plan(&real, &plan, &ctx),
                            plan,
                        })
                    }
                })
                .collect::<Result<Vec<Plan>>>()
        })
        .collect::<Result<Vec<_>>>()
        .map_err(in_phase("associate", seed))?;

    let mut reports = Vec::with_capacity(arms.len());
    for (a, &arm) in arms.iter().enumerate() {
        let mut omegas = vec![Vec::with_capacity(cfg.t_eval); u];
        let mut ledger = Vec::with_capacity(cfg.t_eval * u);
        for (e, plans) in slot_plans.iter().enumerate() {
            let p = &plans[a];
            for i in 0..u {
                omegas[i].push(p.realized[i].omega);
                ledger.push(LedgerRow {
                    slot: cfg.t_train + e + 1,
                    user: i,
                    uplink: p.plan.uplink[i],
                    downlink: p.plan.downlink[i],
                    predicted_omega: p.predicted.as_ref().map(|o| o[i].omega),
                    outcome: p.realized[i],
                });
            }
        }
        // awareness noise is keyed by user only, so arms differ only through ω
        let user_bip = (0..u)
            .map(|i| bip_score_seeded(&omegas[i], &cfg.awareness, derive_seed(seed, &[13, i as u64])))
            .collect::<Result<Vec<_>>>()
            .map_err(in_phase("score", seed))?;
        let (nrmse, user_nrmse) = match arm {
            Arm::Federated => (Some(fed_nrmse.0), fed_nrmse.1.clone()),
            Arm::Centralized => (Some(cen_nrmse.0), cen_nrmse.1.clone()),
            _ => (None, Vec::new()),
        };
        reports.push(ArmReport {
            arm,
            nrmse,
            user_nrmse,
            user_bip,
            omegas,
            ledger,
        });
    }

    Ok(ScenarioOutcome {
        config: config.clone(),
        bs,
        traces,
        observer,
        training: models.into_iter().flat_map(|m| m.reports).collect(),
        arms: reports,
    })
}
