//! Link models: sub-6 GHz uplink SINR, sectored mmWave downlink with body
//! blockage and LoS/NLoS path loss.

use std::f64::consts::PI;

use crate::error::{Error, Result};

pub type Point = (f64, f64);

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Wraps to `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Wraps to `[0, 2π)`.
pub fn wrap_positive(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r >= 2.0 * PI {
        0.0
    } else {
        r
    }
}

/// Direction of `to` seen from `from`, in `[0, 2π)`.
pub fn bearing(from: Point, to: Point) -> f64 {
    wrap_positive((to.1 - from.1).atan2(to.0 - from.0))
}

pub fn distance(a: Point, b: Point) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// How the user's own body shadows the downlink.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelfBlockage {
    /// Blocked when `|φ′ − χ| ≤ ϑ`.
    AsPrinted,
    /// Blocked when `|φ′ − χ| > ϑ`, i.e. the BS is behind the user.
    Behind,
    Off,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadioParams {
    pub user_power_dbm: f64,
    pub bs_power_dbm: f64,
    pub noise_dbm: f64,
    pub ul_bandwidth_hz: f64,
    pub dl_bandwidth_hz: f64,
    /// Uplink path-loss exponent β.
    pub ul_exponent: f64,
    pub ref_distance_m: f64,
    pub carrier_hz: f64,
    pub light_speed: f64,
    pub los_exponent: f64,
    pub nlos_exponent: f64,
    pub los_shadow_db: f64,
    pub nlos_shadow_db: f64,
    pub main_lobe_db: f64,
    pub side_lobe_db: f64,
    /// Full beamwidth φ, radians.
    pub beamwidth: f64,
    /// Self-blockage half angle ϑ, radians.
    pub blockage_half_angle: f64,
    pub body_radius_m: f64,
    pub self_blockage: SelfBlockage,
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            user_power_dbm: 10.0,
            bs_power_dbm: 30.0,
            noise_dbm: -94.0,
            ul_bandwidth_hz: 10e6,
            dl_bandwidth_hz: 10e6,
            ul_exponent: 2.0,
            ref_distance_m: 5.0,
            carrier_hz: 28e9,
            light_speed: 3e8,
            los_exponent: 2.0,
            nlos_exponent: 2.4,
            los_shadow_db: 5.3,
            nlos_shadow_db: 5.27,
            main_lobe_db: 15.0,
            side_lobe_db: 0.7,
            beamwidth: 30f64.to_radians(),
            blockage_half_angle: 2.0,
            body_radius_m: 0.3,
            self_blockage: SelfBlockage::AsPrinted,
        }
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.user_power_dbm,
            self.bs_power_dbm,
            self.noise_dbm,
            self.ul_bandwidth_hz,
            self.dl_bandwidth_hz,
            self.ul_exponent,
            self.ref_distance_m,
            self.carrier_hz,
            self.light_speed,
            self.los_exponent,
            self.nlos_exponent,
            self.los_shadow_db,
            self.nlos_shadow_db,
            self.main_lobe_db,
            self.side_lobe_db,
            self.beamwidth,
            self.blockage_half_angle,
            self.body_radius_m,
        ];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err(Error::config("radio", "all radio parameters must be finite"));
        }
        if self.ul_bandwidth_hz <= 0.0 || self.dl_bandwidth_hz <= 0.0 {
            return Err(Error::config("radio", "bandwidths must be positive"));
        }
        if self.main_lobe_db <= self.side_lobe_db {
            return Err(Error::config("radio", "main lobe gain must exceed side lobe gain"));
        }
        if self.los_shadow_db < 0.0 || self.nlos_shadow_db < 0.0 || self.body_radius_m < 0.0 {
            return Err(Error::config("radio", "shadowing std and body radius must be non-negative"));
        }
        if self.beamwidth <= 0.0 || self.ref_distance_m <= 0.0 || self.carrier_hz <= 0.0 {
            return Err(Error::config("radio", "beamwidth, reference distance and carrier must be positive"));
        }
        Ok(())
    }
}

/// `P_u·g·d^{−β}` in watts.
pub fn uplink_rx_power(p: &RadioParams, fading: f64, d: f64) -> f64 {
    dbm_to_watts(p.user_power_dbm) * fading * d.powf(-p.ul_exponent)
}

/// Uplink SINR; `interferers` holds `(fading, distance)` of every co-channel user.
pub fn uplink_sinr(p: &RadioParams, fading: f64, d: f64, interferers: &[(f64, f64)]) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::Numerical(format!("uplink distance must be positive, got {d}")));
    }
    let mut interference = 0.0;
    for &(g, dk) in interferers {
        if !(dk > 0.0) {
            return Err(Error::Numerical(format!("interferer distance must be positive, got {dk}")));
        }
        interference += uplink_rx_power(p, g, dk);
    }
    Ok(uplink_rx_power(p, fading, d) / (interference + dbm_to_watts(p.noise_dbm)))
}

pub fn uplink_rate(p: &RadioParams, fading: f64, d: f64, interferers: &[(f64, f64)]) -> Result<f64> {
    Ok(p.ul_bandwidth_hz * (1.0 + uplink_sinr(p, fading, d, interferers)?).log2())
}

/// Sectored pattern: main lobe within half the beamwidth (inclusive), side
/// lobe elsewhere. Linear gain.
pub fn antenna_gain(bs_to_user: f64, boresight: f64, p: &RadioParams) -> f64 {
    if wrap_angle(bs_to_user - boresight).abs() <= p.beamwidth / 2.0 {
        db_to_linear(p.main_lobe_db)
    } else {
        db_to_linear(p.side_lobe_db)
    }
}

pub fn self_blockage(user_to_bs: f64, orientation: f64, half_angle: f64, rule: SelfBlockage) -> bool {
    let delta = wrap_angle(user_to_bs - orientation).abs();
    match rule {
        SelfBlockage::AsPrinted => delta <= half_angle,
        SelfBlockage::Behind => delta > half_angle,
        SelfBlockage::Off => false,
    }
}

/// Distance from `p` to segment `ab` and the projection parameter along it.
pub fn point_segment(p: Point, a: Point, b: Point) -> (f64, f64) {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return (distance(p, a), 0.0);
    }
    let t = ((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2;
    let tc = t.clamp(0.0, 1.0);
    (distance(p, (a.0 + tc * dx, a.1 + tc * dy)), t)
}

/// Other users whose position lies within `radius` of the open segment from
/// user `i` to the BS.
pub fn count_blockers(i: usize, users: &[Point], bs: Point, radius: f64) -> usize {
    let a = users[i];
    users
        .iter()
        .enumerate()
        .filter(|&(k, &u)| {
            if k == i {
                return false;
            }
            let (dist, t) = point_segment(u, a, bs);
            t > 0.0 && t < 1.0 && dist <= radius
        })
        .count()
}

/// `20·log10(d⁰·f_c·4π/ν)`.
pub fn free_space_db(p: &RadioParams) -> f64 {
    20.0 * (p.ref_distance_m * p.carrier_hz * 4.0 * PI / p.light_speed).log10()
}

/// `shadow` is a standard normal draw, scaled here by the branch's std.
pub fn path_loss_db(d: f64, los: bool, p: &RadioParams, shadow: f64) -> f64 {
    let (exp, sigma) = if los {
        (p.los_exponent, p.los_shadow_db)
    } else {
        (p.nlos_exponent, p.nlos_shadow_db)
    };
    free_space_db(p) + 10.0 * exp * d.log10() + sigma * shadow
}

pub fn downlink_snr(p: &RadioParams, path_loss_db: f64, gain: f64) -> f64 {
    dbm_to_watts(p.bs_power_dbm) * gain / (db_to_linear(path_loss_db) * dbm_to_watts(p.noise_dbm))
}

pub fn downlink_rate(p: &RadioParams, path_loss_db: f64, gain: f64) -> f64 {
    p.dl_bandwidth_hz * (1.0 + downlink_snr(p, path_loss_db, gain)).log2()
}

/// One snapshot of where everything is.
#[derive(Clone, Debug, PartialEq)]
pub struct Geometry {
    pub bs: Vec<Point>,
    pub users: Vec<Point>,
    /// User orientations χ, radians.
    pub orientations: Vec<f64>,
    /// BS beam boresights θ, radians, one per (user, BS) pair: row `i` holds the
    /// beam BS `j` would point at user `i`.
    pub boresights: Vec<Vec<f64>>,
}

impl Geometry {
    /// Boresights steered exactly at every user.
    pub fn steered(bs: Vec<Point>, users: Vec<Point>, orientations: Vec<f64>) -> Self {
        let boresights = users
            .iter()
            .map(|&u| bs.iter().map(|&b| bearing(b, u)).collect())
            .collect();
        Self {
            bs,
            users,
            orientations,
            boresights,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkState {
    pub distance: f64,
    /// φ: user direction seen from the BS.
    pub bs_angle: f64,
    /// φ′: BS direction seen from the user.
    pub user_angle: f64,
    pub self_blocked: bool,
    pub blockers: usize,
    pub los: bool,
}

pub fn link_state(g: &Geometry, i: usize, j: usize, p: &RadioParams) -> Result<LinkState> {
    let (u, b) = (g.users[i], g.bs[j]);
    let d = distance(u, b);
    if !(d > 0.0) {
        return Err(Error::Numerical(format!("user {i} sits on BS {j}")));
    }
    let user_angle = bearing(u, b);
    let self_blocked = self_blockage(user_angle, g.orientations[i], p.blockage_half_angle, p.self_blockage);
    let blockers = count_blockers(i, &g.users, b, p.body_radius_m);
    Ok(LinkState {
        distance: d,
        bs_angle: bearing(b, u),
        user_angle,
        self_blocked,
        blockers,
        los: !self_blocked && blockers == 0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DownlinkBudget {
    pub link: LinkState,
    pub path_loss_db: f64,
    pub gain_db: f64,
    pub rate: f64,
}

/// Full downlink evaluation; `boresight` is where BS `j` points its beam.
pub fn downlink_budget(
    g: &Geometry,
    i: usize,
    j: usize,
    boresight: f64,
    p: &RadioParams,
    shadow: f64,
) -> Result<DownlinkBudget> {
    let link = link_state(g, i, j, p)?;
    let h = path_loss_db(link.distance, link.los, p, shadow);
    let gain = antenna_gain(link.bs_angle, boresight, p);
    Ok(DownlinkBudget {
        link,
        path_loss_db: h,
        gain_db: linear_to_db(gain),
        rate: downlink_rate(p, h, gain),
    })
}
