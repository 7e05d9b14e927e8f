//! User association: uplink by an epsilon-greedy bandit over predicted BIP,
//! downlink by feasibility of the remaining delay budget, and an exhaustive
//! oracle for small instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bip::{evaluate_slot, SlotOutcome, VideoFrameModel};
use crate::error::{Error, Result};
use crate::radio::{self, bearing, Geometry, Point, RadioParams};

/// One uplink and one downlink BS per user.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AssociationPlan {
    pub uplink: Vec<usize>,
    pub downlink: Vec<usize>,
    pub n_bs: usize,
}

impl AssociationPlan {
    pub fn n_users(&self) -> usize {
        self.uplink.len()
    }

    pub fn downlink_loads(&self) -> Vec<usize> {
        let mut loads = vec![0; self.n_bs];
        for &k in &self.downlink {
            loads[k] += 1;
        }
        loads
    }

    /// One-hot `U × B` matrix of the uplink choice.
    pub fn uplink_matrix(&self) -> Vec<Vec<u8>> {
        one_hot(&self.uplink, self.n_bs)
    }

    pub fn downlink_matrix(&self) -> Vec<Vec<u8>> {
        one_hot(&self.downlink, self.n_bs)
    }

    /// Rows one-hot and every downlink load within `v_cap`.
    pub fn is_valid(&self, v_cap: usize) -> bool {
        self.uplink.len() == self.downlink.len()
            && self.uplink.iter().chain(&self.downlink).all(|&j| j < self.n_bs)
            && self.downlink_loads().iter().all(|&l| l <= v_cap)
    }
}

fn one_hot(choice: &[usize], n_bs: usize) -> Vec<Vec<u8>> {
    choice
        .iter()
        .map(|&j| (0..n_bs).map(|k| u8::from(k == j)).collect())
        .collect()
}

pub fn check_capacity(n_users: usize, n_bs: usize, v_cap: usize) -> Result<()> {
    if n_bs == 0 || n_users == 0 {
        return Err(Error::config("association", "need at least one user and one BS"));
    }
    if v_cap * n_bs < n_users {
        return Err(Error::config(
            "association",
            format!("V·B = {} cannot host {n_users} users", v_cap * n_bs),
        ));
    }
    Ok(())
}

/// Random draws for one slot, shared by every evaluation of that slot.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelDraws {
    /// Rayleigh power gain `g_ij`, `[user][bs]`.
    pub fading: Vec<Vec<f64>>,
    /// Standard normal shadowing draw, `[user][bs]`.
    pub shadow: Vec<Vec<f64>>,
    /// Uplink subcarrier per user; equal indices interfere.
    pub subcarrier: Vec<usize>,
}

impl ChannelDraws {
    /// Unit fading, no shadowing, no co-channel users.
    pub fn calm(n_users: usize, n_bs: usize) -> Self {
        Self {
            fading: vec![vec![1.0; n_bs]; n_users],
            shadow: vec![vec![0.0; n_bs]; n_users],
            subcarrier: (0..n_users).collect(),
        }
    }
}

/// Everything needed to turn geometry into per-link rates.
#[derive(Clone, Copy, Debug)]
pub struct LinkContext<'a> {
    pub radio: &'a RadioParams,
    pub frame: &'a VideoFrameModel,
    pub slot_duration: f64,
}

/// Uplink and downlink rate of every (user, BS) pair for one slot.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkTable {
    pub ul_rate: Vec<Vec<f64>>,
    pub dl_rate: Vec<Vec<f64>>,
    /// Distance of every pair, used for the nearest-BS fallback.
    pub distance: Vec<Vec<f64>>,
    pub los: Vec<Vec<bool>>,
}

impl LinkTable {
    /// Rates on `geometry`, with the beam of BS `j` for user `i` aimed at
    /// `aim[i]` (the true position for perfect knowledge, a prediction
    /// otherwise).
    pub fn compute(geometry: &Geometry, aim: &[Point], draws: &ChannelDraws, radio: &RadioParams) -> Result<Self> {
        let (u, b) = (geometry.users.len(), geometry.bs.len());
        if aim.len() != u || draws.fading.len() != u || draws.shadow.len() != u || draws.subcarrier.len() != u {
            return Err(Error::Dimension {
                expected: u,
                got: aim.len(),
                context: "per-user inputs of the link table",
            });
        }
        let mut ul_rate = vec![vec![0.0; b]; u];
        let mut dl_rate = vec![vec![0.0; b]; u];
        let mut distance = vec![vec![0.0; b]; u];
        let mut los = vec![vec![false; b]; u];
        let mut interferers = Vec::with_capacity(u);
        for i in 0..u {
            for j in 0..b {
                interferers.clear();
                for k in 0..u {
                    if k != i && draws.subcarrier[k] == draws.subcarrier[i] {
                        interferers.push((draws.fading[k][j], radio::distance(geometry.users[k], geometry.bs[j])));
                    }
                }
                let link = radio::link_state(geometry, i, j, radio)?;
                ul_rate[i][j] = radio::uplink_rate(radio, draws.fading[i][j], link.distance, &interferers)?;
                let boresight = bearing(geometry.bs[j], aim[i]);
                let h = radio::path_loss_db(link.distance, link.los, radio, draws.shadow[i][j]);
                let gain = radio::antenna_gain(link.bs_angle, boresight, radio);
                dl_rate[i][j] = radio::downlink_rate(radio, h, gain);
                distance[i][j] = link.distance;
                los[i][j] = link.los;
            }
        }
        Ok(Self {
            ul_rate,
            dl_rate,
            distance,
            los,
        })
    }

    pub fn n_users(&self) -> usize {
        self.ul_rate.len()
    }

    pub fn n_bs(&self) -> usize {
        self.ul_rate.first().map_or(0, |r| r.len())
    }

    pub fn outcome(&self, i: usize, ul: usize, dl: usize, ctx: &LinkContext) -> SlotOutcome {
        evaluate_slot(self.ul_rate[i][ul], self.dl_rate[i][dl], ctx.slot_duration, ctx.frame)
    }
}

/// Downlink feasibility for user `i` on BS `k` given its uplink BS: the
/// predicted downlink must finish within what the uplink leaves of `γ_D`
/// and reach `γ_Q`. Both tests are non-strict.
pub fn downlink_feasible(table: &LinkTable, i: usize, k: usize, uplink: usize, ctx: &LinkContext) -> bool {
    let o = table.outcome(i, uplink, k, ctx);
    o.downlink_s <= ctx.frame.delay_budget - o.uplink_s && o.quality >= ctx.frame.quality_threshold
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BanditPolicy {
    pub epsilon: f64,
    /// `ε_t = ε / (1 + decay·t)`.
    pub decay: f64,
    pub pulls: usize,
}

impl Default for BanditPolicy {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            decay: 0.1,
            pulls: 20,
        }
    }
}

/// Predicted slot reward of uplink arm `j`: `−1` when no downlink is
/// feasible behind it, else `0`.
fn uplink_reward(table: &LinkTable, i: usize, j: usize, ctx: &LinkContext) -> f64 {
    if (0..table.n_bs()).any(|k| downlink_feasible(table, i, k, j, ctx)) {
        0.0
    } else {
        -1.0
    }
}

/// Epsilon-greedy over uplink arms. Estimates start at 0, above any reward,
/// so greedy pulls sweep untried arms in index order.
fn bandit_uplink<R: Rng>(table: &LinkTable, i: usize, ctx: &LinkContext, policy: &BanditPolicy, rng: &mut R) -> usize {
    let b = table.n_bs();
    let mut value = vec![0.0; b];
    let mut pulls = vec![0usize; b];
    for t in 0..policy.pulls.max(1) {
        let eps = policy.epsilon / (1.0 + policy.decay * t as f64);
        let arm = if rng.random::<f64>() < eps {
            rng.random_range(0..b)
        } else {
            argmax(&value)
        };
        let r = uplink_reward(table, i, arm, ctx);
        pulls[arm] += 1;
        value[arm] += (r - value[arm]) / pulls[arm] as f64;
    }
    // arms never pulled keep their optimistic prior; only trust pulled ones
    let scored: Vec<f64> = value
        .iter()
        .zip(&pulls)
        .map(|(v, &n)| if n > 0 { *v } else { f64::NEG_INFINITY })
        .collect();
    argmax(&scored)
}

/// First index of the maximum.
fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (k, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = k;
        }
    }
    best
}

/// Uplink by bandit, then downlink: among feasible BSs the highest predicted
/// rate (lowest index on ties), admitted greedily under the V cap; users
/// with no feasible BS, or whose feasible BSs are full, fall back to the
/// nearest BS with room. `table` is built from the prediction snapshot.
pub fn select_association(
    table: &LinkTable,
    ctx: &LinkContext,
    v_cap: usize,
    policy: &BanditPolicy,
    seed: u64,
) -> Result<AssociationPlan> {
    let (u, b) = (table.n_users(), table.n_bs());
    check_capacity(u, b, v_cap)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let uplink: Vec<usize> = (0..u).map(|i| bandit_uplink(table, i, ctx, policy, &mut rng)).collect();

    let feasible: Vec<Vec<usize>> = (0..u)
        .map(|i| {
            let mut ks: Vec<usize> = (0..b).filter(|&k| downlink_feasible(table, i, k, uplink[i], ctx)).collect();
            ks.sort_by(|&x, &y| table.dl_rate[i][y].total_cmp(&table.dl_rate[i][x]).then(x.cmp(&y)));
            ks
        })
        .collect();
    // users who gain from admission first, the most constrained of them first
    let mut order: Vec<usize> = (0..u).collect();
    order.sort_by_key(|&i| (feasible[i].is_empty(), feasible[i].len(), i));

    let mut loads = vec![0usize; b];
    let mut downlink = vec![usize::MAX; u];
    for &i in &order {
        let pick = feasible[i].iter().copied().find(|&k| loads[k] < v_cap).or_else(|| {
            let mut near: Vec<usize> = (0..b).collect();
            near.sort_by(|&x, &y| table.distance[i][x].total_cmp(&table.distance[i][y]).then(x.cmp(&y)));
            near.into_iter().find(|&k| loads[k] < v_cap)
        });
        let k = pick.expect("capacity checked above");
        loads[k] += 1;
        downlink[i] = k;
    }
    Ok(AssociationPlan {
        uplink,
        downlink,
        n_bs: b,
    })
}

/// Uniform random association under the V cap.
pub fn random_association<R: Rng>(n_users: usize, n_bs: usize, v_cap: usize, rng: &mut R) -> Result<AssociationPlan> {
    check_capacity(n_users, n_bs, v_cap)?;
    let uplink = (0..n_users).map(|_| rng.random_range(0..n_bs)).collect();
    let mut loads = vec![0usize; n_bs];
    let mut downlink = Vec::with_capacity(n_users);
    for _ in 0..n_users {
        let open: Vec<usize> = (0..n_bs).filter(|&k| loads[k] < v_cap).collect();
        let k = open[rng.random_range(0..open.len())];
        loads[k] += 1;
        downlink.push(k);
    }
    Ok(AssociationPlan {
        uplink,
        downlink,
        n_bs,
    })
}

pub fn evaluate_plan(table: &LinkTable, plan: &AssociationPlan, ctx: &LinkContext) -> Vec<SlotOutcome> {
    (0..plan.n_users())
        .map(|i| table.outcome(i, plan.uplink[i], plan.downlink[i], ctx))
        .collect()
}

/// Sum of noise-free per-user scores `G_A + (1 + G_A)·ω` for one slot.
pub fn plan_objective(outcomes: &[SlotOutcome], app_effect: f64) -> f64 {
    outcomes
        .iter()
        .map(|o| app_effect + (1.0 + app_effect) * f64::from(u8::from(o.omega)))
        .sum()
}

pub const ORACLE_MAX_USERS: usize = 4;
pub const ORACLE_MAX_BS: usize = 3;

/// Exhaustive search over all `B^{2U}` plans on true rates. The first plan in
/// lexicographic order attaining the minimum wins.
pub fn oracle_association(
    table: &LinkTable,
    ctx: &LinkContext,
    v_cap: usize,
    app_effect: f64,
) -> Result<(AssociationPlan, f64)> {
    let (u, b) = (table.n_users(), table.n_bs());
    check_capacity(u, b, v_cap)?;
    if u > ORACLE_MAX_USERS || b > ORACLE_MAX_BS {
        return Err(Error::config(
            "association",
            format!("oracle limited to U ≤ {ORACLE_MAX_USERS}, B ≤ {ORACLE_MAX_BS}"),
        ));
    }
    let total = b.pow(2 * u as u32);
    let mut best: Option<(AssociationPlan, f64)> = None;
    let mut digits = vec![0usize; 2 * u];
    for code in 0..total {
        let mut c = code;
        for d in digits.iter_mut().rev() {
            *d = c % b;
            c /= b;
        }
        let plan = AssociationPlan {
            uplink: digits[..u].to_vec(),
            downlink: digits[u..].to_vec(),
            n_bs: b,
        };
        if !plan.is_valid(v_cap) {
            continue;
        }
        let obj = plan_objective(&evaluate_plan(table, &plan, ctx), app_effect);
        if best.as_ref().is_none_or(|(_, o)| obj < *o) {
            best = Some((plan, obj));
        }
    }
    Ok(best.expect("at least one plan satisfies the cap"))
}
