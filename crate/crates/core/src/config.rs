//! Scenario configuration and its flat `key = value` file format.
//!
//! ```text
//! # comment
//! users = 20
//! esn.topology = parallel-3
//! ```
//!
//! Keys are listed in [`ScenarioConfig::keys`]; unknown keys, repeated keys
//! and unparsable values are errors carrying `path:line`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::assoc::BanditPolicy;
use crate::bip::AwarenessProfile;
use crate::capacity::{CapacityQuery, EmpiricalMcConfig};
use crate::error::{Error, Result};
use crate::esn::{ReservoirSpec, Topology};
use crate::federated::{FederatedConfig, StopRule};
use crate::radio::{RadioParams, SelfBlockage};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arm {
    /// Consensus-trained predictor.
    Federated,
    /// Each BS predicts from its own shard.
    Centralized,
    /// Snapshot equals the truth.
    Perfect,
    /// Random association, beams on the last reported position.
    Random,
}

impl Arm {
    pub const ALL: [Arm; 4] = [Arm::Perfect, Arm::Federated, Arm::Centralized, Arm::Random];
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arm::Federated => "federated",
            Arm::Centralized => "centralized",
            Arm::Perfect => "perfect",
            Arm::Random => "random",
        })
    }
}

impl FromStr for Arm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "federated" => Ok(Arm::Federated),
            "centralized" => Ok(Arm::Centralized),
            "perfect" => Ok(Arm::Perfect),
            "random" => Ok(Arm::Random),
            other => Err(format!("unknown arm `{other}`")),
        }
    }
}

/// Comma-separated arm list, kept sorted and unique.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArmSet(pub Vec<Arm>);

impl ArmSet {
    pub fn contains(&self, arm: Arm) -> bool {
        self.0.contains(&arm)
    }
}

impl fmt::Display for ArmSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = self.0.iter().map(|a| a.to_string()).collect();
        f.write_str(&names.join(","))
    }
}

impl FromStr for ArmSet {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let mut arms = s
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(str::parse)
            .collect::<std::result::Result<Vec<Arm>, _>>()?;
        arms.sort();
        arms.dedup();
        if arms.is_empty() {
            return Err("at least one arm required".into());
        }
        Ok(ArmSet(arms))
    }
}

fn stop_name(s: StopRule) -> &'static str {
    match s {
        StopRule::Either => "either",
        StopRule::Primal => "primal",
    }
}

fn parse_stop(s: &str) -> std::result::Result<StopRule, String> {
    match s {
        "either" => Ok(StopRule::Either),
        "primal" => Ok(StopRule::Primal),
        other => Err(format!("unknown stop rule `{other}` (either|primal)")),
    }
}

fn blockage_name(s: SelfBlockage) -> &'static str {
    match s {
        SelfBlockage::AsPrinted => "facing",
        SelfBlockage::Behind => "behind",
        SelfBlockage::Off => "off",
    }
}

fn parse_blockage(s: &str) -> std::result::Result<SelfBlockage, String> {
    match s {
        "facing" => Ok(SelfBlockage::AsPrinted),
        "behind" => Ok(SelfBlockage::Behind),
        "off" => Ok(SelfBlockage::Off),
        other => Err(format!("unknown self-blockage rule `{other}` (facing|behind|off)")),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub radius: f64,
    pub n_users: usize,
    pub n_bs: usize,
    pub v_cap: usize,
    pub t_train: usize,
    pub t_eval: usize,
    /// `Y`, predicted slots per output.
    pub horizon: usize,
    /// `T`, past slots per input.
    pub history: usize,
    pub slot_duration: f64,
    /// Uplink subcarriers shared round-robin; 0 gives every user its own.
    pub ul_subcarriers: usize,
    pub arms: ArmSet,

    pub speed_min: f64,
    pub speed_max: f64,
    pub pause_max_slots: usize,
    pub orientation_std_deg: f64,

    pub n_neurons: usize,
    pub ring_weight: f64,
    pub topology: Topology,
    /// Value of the application-id input.
    pub app_feature: f64,

    pub trainer: FederatedConfig,
    pub radio: RadioParams,

    pub frame_groups: usize,
    pub frame_uncompressible: f64,
    pub frame_full_bits: f64,
    pub frame_tracking_bits: f64,
    pub frame_delay_budget: f64,
    pub frame_quality: f64,

    pub awareness: AwarenessProfile,
    pub bandit: BanditPolicy,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            radius: 500.0,
            n_users: 20,
            n_bs: 5,
            v_cap: 10,
            t_train: 400,
            t_eval: 100,
            horizon: 10,
            history: 5,
            slot_duration: 0.020,
            ul_subcarriers: 5,
            arms: ArmSet(Arm::ALL.to_vec()).normalized(),
            speed_min: 0.5,
            speed_max: 1.5,
            pause_max_slots: 10,
            orientation_std_deg: 10.0,
            n_neurons: 30,
            ring_weight: 0.98,
            topology: Topology::Single,
            app_feature: 0.5,
            trainer: FederatedConfig::default(),
            radio: RadioParams::default(),
            frame_groups: 10,
            frame_uncompressible: 0.3,
            frame_full_bits: 0.3e6,
            frame_tracking_bits: 50e3,
            frame_delay_budget: 0.010,
            frame_quality: 0.8,
            awareness: AwarenessProfile::default(),
            bandit: BanditPolicy::default(),
        }
    }
}

impl ArmSet {
    fn normalized(mut self) -> Self {
        self.0.sort();
        self.0.dedup();
        self
    }
}

type Getter = fn(&ScenarioConfig) -> String;
type Setter = fn(&mut ScenarioConfig, &str) -> std::result::Result<(), String>;

struct Field {
    key: &'static str,
    get: Getter,
    set: Setter,
}

macro_rules! field {
    ($key:literal, $($path:ident).+) => {
        Field {
            key: $key,
            get: |c| c.$($path).+.to_string(),
            set: |c, v| {
                c.$($path).+ = v.parse().map_err(|e| format!("{e}"))?;
                Ok(())
            },
        }
    };
    // stored = written · scale
    ($key:literal, $($path:ident).+, scale $s:expr) => {
        Field {
            key: $key,
            get: |c| (c.$($path).+ / $s).to_string(),
            set: |c, v| {
                c.$($path).+ = v.parse::<f64>().map_err(|e| format!("{e}"))? * $s;
                Ok(())
            },
        }
    };
}

fn fields() -> Vec<Field> {
    vec![
        field!("seed", seed),
        field!("radius_m", radius),
        field!("users", n_users),
        field!("base_stations", n_bs),
        field!("v_cap", v_cap),
        field!("t_train", t_train),
        field!("t_eval", t_eval),
        field!("horizon", horizon),
        field!("history", history),
        field!("slot_ms", slot_duration, scale 1e-3),
        field!("ul_subcarriers", ul_subcarriers),
        field!("arms", arms),
        field!("mobility.speed_min", speed_min),
        field!("mobility.speed_max", speed_max),
        field!("mobility.pause_max_slots", pause_max_slots),
        field!("mobility.orientation_std_deg", orientation_std_deg),
        field!("esn.neurons", n_neurons),
        field!("esn.ring_weight", ring_weight),
        field!("esn.topology", topology),
        field!("esn.app_feature", app_feature),
        field!("train.lambda", trainer.lambda),
        field!("train.penalty", trainer.penalty),
        field!("train.dual_step", trainer.dual_step),
        field!("train.tolerance", trainer.tolerance),
        field!("train.max_rounds", trainer.max_rounds),
        Field {
            key: "train.stop",
            get: |c| stop_name(c.trainer.stop).to_string(),
            set: |c, v| {
                c.trainer.stop = parse_stop(v)?;
                Ok(())
            },
        },
        field!("radio.user_power_dbm", radio.user_power_dbm),
        field!("radio.bs_power_dbm", radio.bs_power_dbm),
        field!("radio.noise_dbm", radio.noise_dbm),
        field!("radio.ul_bandwidth_hz", radio.ul_bandwidth_hz),
        field!("radio.dl_bandwidth_hz", radio.dl_bandwidth_hz),
        field!("radio.ul_exponent", radio.ul_exponent),
        field!("radio.ref_distance_m", radio.ref_distance_m),
        field!("radio.carrier_hz", radio.carrier_hz),
        field!("radio.light_speed", radio.light_speed),
        field!("radio.los_exponent", radio.los_exponent),
        field!("radio.nlos_exponent", radio.nlos_exponent),
        field!("radio.los_shadow_db", radio.los_shadow_db),
        field!("radio.nlos_shadow_db", radio.nlos_shadow_db),
        field!("radio.main_lobe_db", radio.main_lobe_db),
        field!("radio.side_lobe_db", radio.side_lobe_db),
        field!("radio.beamwidth_deg", radio.beamwidth, scale std::f64::consts::PI / 180.0),
        field!("radio.blockage_half_angle_rad", radio.blockage_half_angle),
        field!("radio.body_radius_m", radio.body_radius_m),
        Field {
            key: "radio.self_blockage",
            get: |c| blockage_name(c.radio.self_blockage).to_string(),
            set: |c, v| {
                c.radio.self_blockage = parse_blockage(v)?;
                Ok(())
            },
        },
        field!("frame.groups", frame_groups),
        field!("frame.uncompressible", frame_uncompressible),
        field!("frame.full_bits", frame_full_bits),
        field!("frame.tracking_bits", frame_tracking_bits),
        field!("frame.delay_ms", frame_delay_budget, scale 1e-3),
        field!("frame.quality", frame_quality),
        field!("bip.app_effect", awareness.app_effect),
        field!("bip.user_var", awareness.user_var),
        field!("bip.app_var", awareness.app_var),
        field!("bip.slot_var", awareness.slot_var),
        field!("bandit.epsilon", bandit.epsilon),
        field!("bandit.decay", bandit.decay),
        field!("bandit.pulls", bandit.pulls),
    ]
}

impl ScenarioConfig {
    pub fn keys() -> Vec<&'static str> {
        fields().iter().map(|f| f.key).collect()
    }

    /// Sets one key; `location` labels errors.
    pub fn set(&mut self, key: &str, value: &str, location: &str) -> Result<()> {
        let f = fields()
            .into_iter()
            .find(|f| f.key == key)
            .ok_or_else(|| Error::config(location, format!("unknown key `{key}`")))?;
        (f.set)(self, value).map_err(|m| Error::config(location, format!("bad value for `{key}`: {m}")))
    }

    pub fn get(&self, key: &str) -> Option<String> {
        fields().into_iter().find(|f| f.key == key).map(|f| (f.get)(self))
    }

    /// Parses `text` on top of the defaults and validates the result.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (n, raw) in text.lines().enumerate() {
            let loc = format!("{origin}:{}", n + 1);
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(&loc, "expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::config(&loc, format!("key `{key}` set twice")));
            }
            cfg.set(key, value, &loc)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Every key with its current value, in schema order.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for f in fields() {
            out.push_str(f.key);
            out.push_str(" = ");
            out.push_str(&(f.get)(self));
            out.push('\n');
        }
        out
    }

    pub fn n_inputs(&self) -> usize {
        2 * self.history + 1
    }

    pub fn n_outputs(&self) -> usize {
        3 * self.horizon
    }

    pub fn washout(&self) -> usize {
        2 * self.n_neurons
    }

    pub fn reservoir_spec(&self) -> ReservoirSpec {
        ReservoirSpec::new(self.n_neurons, self.ring_weight, self.n_inputs(), self.n_outputs(), self.seed)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::config("scenario", m));
        if !(self.radius > 0.0) {
            return bad("radius must be positive".into());
        }
        crate::assoc::check_capacity(self.n_users, self.n_bs, self.v_cap)?;
        if self.horizon == 0 || self.history == 0 || self.t_eval == 0 {
            return bad("horizon, history and t_eval must be at least 1".into());
        }
        if self.t_train <= self.washout() {
            return bad(format!(
                "t_train = {} must exceed the washout of {} slots",
                self.t_train,
                self.washout()
            ));
        }
        if !(self.slot_duration > 0.0) {
            return bad("slot duration must be positive".into());
        }
        if !(0.0 <= self.speed_min && self.speed_min <= self.speed_max) {
            return bad("need 0 ≤ speed_min ≤ speed_max".into());
        }
        if !(self.orientation_std_deg >= 0.0) {
            return bad("orientation std must be non-negative".into());
        }
        if self.frame_groups == 0 {
            return bad("frame needs at least one pixel group".into());
        }
        if self.topology.layers() == 0 {
            return bad("topology needs at least one layer".into());
        }
        if !(self.bandit.epsilon >= 0.0 && self.bandit.epsilon <= 1.0 && self.bandit.decay >= 0.0) {
            return bad("bandit epsilon must lie in [0, 1] with non-negative decay".into());
        }
        self.reservoir_spec().validate()?;
        self.trainer.validate()?;
        self.radio.validate()?;
        self.awareness.validate()?;
        Ok(())
    }
}

/// Grid of memory-capacity cells, read from the same flat format:
///
/// ```text
/// topology = single, parallel-3, inputs
/// neurons = 5, 10, 20
/// ring_weight = 0.7, 0.9
/// rho = 0, 0.9          # inputs only: two unit-variance inputs
/// length = 100000
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct CapacitySpec {
    /// `None` marks the two-input family.
    pub topologies: Vec<Option<Topology>>,
    pub neurons: Vec<usize>,
    pub ring_weights: Vec<f64>,
    pub rho: Vec<f64>,
    pub estimator: EmpiricalMcConfig,
}

impl Default for CapacitySpec {
    fn default() -> Self {
        Self {
            topologies: vec![Some(Topology::Single)],
            neurons: vec![5, 10, 20],
            ring_weights: vec![0.7, 0.9],
            rho: vec![0.0, 0.9],
            estimator: EmpiricalMcConfig::default(),
        }
    }
}

fn parse_list<T: FromStr>(v: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    let out: Vec<T> = v
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<T>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    if out.is_empty() {
        return Err("empty list".into());
    }
    Ok(out)
}

impl CapacitySpec {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut spec = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let loc = format!("{origin}:{}", n + 1);
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(&loc, "expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |m: String| Error::config(&loc, format!("bad value for `{key}`: {m}"));
            let num = |v: &str| v.parse::<f64>().map_err(|e| bad(e.to_string()));
            let int = |v: &str| v.parse::<usize>().map_err(|e| bad(e.to_string()));
            match key {
                "topology" => {
                    spec.topologies = value
                        .split(',')
                        .map(str::trim)
                        .filter(|p| !p.is_empty())
                        .map(|p| if p == "inputs" { Ok(None) } else { p.parse::<Topology>().map(Some) })
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|e| bad(e.to_string()))?
                }
                "neurons" => spec.neurons = parse_list(value).map_err(bad)?,
                "ring_weight" => spec.ring_weights = parse_list(value).map_err(bad)?,
                "rho" => spec.rho = parse_list(value).map_err(bad)?,
                "length" => spec.estimator.length = int(value)?,
                "washout" => spec.estimator.washout = int(value)?,
                "seed" => spec.estimator.seed = value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
                "ridge" => spec.estimator.ridge = num(value)?,
                "train_fraction" => spec.estimator.train_fraction = num(value)?,
                "max_delay" => spec.estimator.max_delay = Some(int(value)?).filter(|&k| k > 0),
                other => return Err(Error::config(&loc, format!("unknown key `{other}`"))),
            }
        }
        if spec.topologies.is_empty() {
            return Err(Error::config(origin, "no topology given"));
        }
        for q in spec.queries() {
            q.validate()?;
        }
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Every cell of the grid, topology-major.
    pub fn queries(&self) -> Vec<CapacityQuery> {
        let mut out = Vec::new();
        for t in &self.topologies {
            for &n in &self.neurons {
                for &w in &self.ring_weights {
                    match t {
                        Some(Topology::Single) => out.push(CapacityQuery::single(n, w)),
                        Some(Topology::Parallel { layers }) => out.push(CapacityQuery::parallel(n, w, *layers)),
                        Some(Topology::Series { layers }) => out.push(CapacityQuery::series(n, w, *layers)),
                        None => out.extend(self.rho.iter().map(|&r| CapacityQuery::two_inputs(n, w, r))),
                    }
                }
            }
        }
        out
    }
}
