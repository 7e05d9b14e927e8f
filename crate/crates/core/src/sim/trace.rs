//! Random-waypoint mobility with a wrapped random walk on orientation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::radio::{distance, Point};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MobilityParams {
    pub radius: f64,
    /// m/s
    pub speed_min: f64,
    pub speed_max: f64,
    pub pause_max_slots: usize,
    pub orientation_std_deg: f64,
    pub slot_duration: f64,
}

/// One user's path. Orientation is in degrees on `[0, 360)`.
#[derive(Clone, Debug, PartialEq)]
pub struct UserTrace {
    pub positions: Vec<Point>,
    pub orientations: Vec<f64>,
}

impl UserTrace {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn orientation_rad(&self, t: usize) -> f64 {
        self.orientations[t].to_radians()
    }
}

pub fn uniform_in_disc<R: Rng>(radius: f64, rng: &mut R) -> Point {
    let r = radius * rng.random::<f64>().sqrt();
    let a = rng.random_range(0.0..std::f64::consts::TAU);
    (r * a.cos(), r * a.sin())
}

fn wrap_degrees(d: f64) -> f64 {
    let w = d.rem_euclid(360.0);
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

/// `n_slots` samples for one user, drawn from `rng`.
pub fn user_trace<R: Rng>(p: &MobilityParams, n_slots: usize, rng: &mut R) -> Result<UserTrace> {
    if !(p.radius > 0.0 && 0.0 <= p.speed_min && p.speed_min <= p.speed_max && p.orientation_std_deg >= 0.0) {
        return Err(Error::config("mobility", "bad mobility parameters"));
    }
    let turn = Normal::new(0.0, p.orientation_std_deg).expect("std checked");
    let draw_speed = |rng: &mut R| {
        if p.speed_max > p.speed_min {
            rng.random_range(p.speed_min..p.speed_max)
        } else {
            p.speed_min
        }
    };
    let mut pos = uniform_in_disc(p.radius, rng);
    let mut dest = uniform_in_disc(p.radius, rng);
    let mut speed = draw_speed(rng);
    let mut pause = 0usize;
    let mut chi = rng.random_range(0.0..360.0);

    let mut positions = Vec::with_capacity(n_slots);
    let mut orientations = Vec::with_capacity(n_slots);
    for _ in 0..n_slots {
        positions.push(pos);
        orientations.push(chi);

        chi = wrap_degrees(chi + turn.sample(rng));
        if pause > 0 {
            pause -= 1;
            continue;
        }
        let step = speed * p.slot_duration;
        let left = distance(pos, dest);
        if left <= step {
            pos = dest;
            pause = rng.random_range(0..=p.pause_max_slots);
            dest = uniform_in_disc(p.radius, rng);
            speed = draw_speed(rng);
        } else {
            let f = step / left;
            pos = (pos.0 + f * (dest.0 - pos.0), pos.1 + f * (dest.1 - pos.1));
        }
    }
    Ok(UserTrace {
        positions,
        orientations,
    })
}

/// Traces for `n_users`; user `i` draws from its own stream so adding users
/// leaves the existing paths unchanged.
pub fn generate_traces(p: &MobilityParams, n_users: usize, n_slots: usize, seed: u64) -> Result<Vec<UserTrace>> {
    (0..n_users)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1000 + i as u64);
            user_trace(p, n_slots, &mut rng)
        })
        .collect()
}
