//! Input and target maps for the movement predictor.
//!
//! Inputs use the location scalar `z = (x+y)(x+y+1)/2 · y` on the disc's
//! integer grid, shifted so both coordinates are non-negative, then
//! `z / z_max − 0.5`. Orientation maps as `χ / 360° − 0.5`. Targets are
//! the next `Y` positions and orientations, each mapped linearly onto
//! `[−0.5, 0.5]` so predictions can be read back directly.

use crate::radio::Point;
use crate::sim::trace::UserTrace;

/// `(Σ_{n=1}^{x+y} n) · y`.
pub fn location_scalar(x: u64, y: u64) -> f64 {
    let s = (x + y) as u128;
    (s * (s + 1) / 2 * y as u128) as f64
}

/// Largest grid coordinate of a disc of `radius` after the shift.
pub fn grid_extent(radius: f64) -> u64 {
    (2.0 * radius).ceil() as u64
}

pub fn z_max(radius: f64) -> f64 {
    let m = grid_extent(radius);
    location_scalar(m, m)
}

/// Nearest grid cell of a position, shifted by `radius` and clamped.
pub fn to_grid(p: Point, radius: f64) -> (u64, u64) {
    let m = grid_extent(radius) as f64;
    let g = |v: f64| (v + radius).round().clamp(0.0, m) as u64;
    (g(p.0), g(p.1))
}

pub fn location_feature(p: Point, radius: f64) -> f64 {
    let (x, y) = to_grid(p, radius);
    location_scalar(x, y) / z_max(radius) - 0.5
}

pub fn orientation_feature(chi_deg: f64) -> f64 {
    chi_deg / 360.0 - 0.5
}

/// A grid cell whose location scalar is nearest to `z`, scanning `y` upwards
/// and solving the triangular number for `x + y`. `z` is many-to-one, so
/// this returns one preimage: the exact match with the smallest `y` when
/// one exists.
pub fn location_inverse(z: f64, extent: u64) -> (u64, u64) {
    let mut best = (0u64, 0u64);
    let mut best_err = z.abs();
    for y in 1..=extent {
        let tri = z / y as f64;
        let s_real = (-1.0 + (1.0 + 8.0 * tri).max(0.0).sqrt()) / 2.0;
        for s in [s_real.floor() as u64, s_real.ceil() as u64] {
            if s < y || s - y > extent {
                continue;
            }
            let x = s - y;
            let err = (location_scalar(x, y) - z).abs();
            if err < best_err {
                best = (x, y);
                best_err = err;
                if err == 0.0 {
                    return best;
                }
            }
        }
    }
    best
}

pub fn position_target(p: Point, radius: f64) -> (f64, f64) {
    (p.0 / (2.0 * radius), p.1 / (2.0 * radius))
}

pub fn position_from_target(x: f64, y: f64, radius: f64) -> Point {
    (x * 2.0 * radius, y * 2.0 * radius)
}

/// Inverse of [`orientation_feature`], wrapped onto `[0, 360)`.
pub fn orientation_from_target(v: f64) -> f64 {
    let d = ((v + 0.5) * 360.0).rem_euclid(360.0);
    if d >= 360.0 {
        0.0
    } else {
        d
    }
}

/// Input rows for every slot: the last `history` (location, orientation)
/// pairs, oldest first, then the application feature. Slots before the
/// start repeat the first sample.
pub fn build_inputs(trace: &UserTrace, history: usize, radius: f64, app_feature: f64, n_slots: usize) -> Vec<Vec<f64>> {
    let loc: Vec<f64> = trace.positions.iter().map(|&p| location_feature(p, radius)).collect();
    let ori: Vec<f64> = trace.orientations.iter().map(|&c| orientation_feature(c)).collect();
    (0..n_slots)
        .map(|t| {
            let mut v = Vec::with_capacity(2 * history + 1);
            for back in (0..history).rev() {
                let s = t.saturating_sub(back);
                v.push(loc[s]);
                v.push(ori[s]);
            }
            v.push(app_feature);
            v
        })
        .collect()
}

/// Target rows: `(x, y, χ)` of slots `t+1 ..= t+horizon`, normalized.
/// `trace` must extend `horizon` slots past `n_slots − 1`.
pub fn build_targets(trace: &UserTrace, horizon: usize, radius: f64, n_slots: usize) -> Vec<Vec<f64>> {
    assert!(trace.len() >= n_slots + horizon, "trace too short for targets");
    (0..n_slots)
        .map(|t| {
            let mut v = Vec::with_capacity(3 * horizon);
            for k in 1..=horizon {
                let (x, y) = position_target(trace.positions[t + k], radius);
                v.push(x);
                v.push(y);
                v.push(orientation_feature(trace.orientations[t + k]));
            }
            v
        })
        .collect()
}

/// Step `k` (1-based) of a prediction row as position and orientation in
/// degrees.
pub fn decode_step(row: &[f64], k: usize, radius: f64) -> (Point, f64) {
    let o = 3 * (k - 1);
    (
        position_from_target(row[o], row[o + 1], radius),
        orientation_from_target(row[o + 2]),
    )
}
