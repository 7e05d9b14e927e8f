//! Shared fixtures for the criterion benches.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vrbip_core::sim::generate_traces;
use vrbip_core::sim::scenario::{bs_layout, channel_draws, mobility};
use vrbip_core::{ChannelDraws, EsnModel, Geometry, LocalDataset, ReservoirSpec, ScenarioConfig, Topology};

/// Reservoir states of a random input sequence, split evenly over `n_bs`
/// shards, with a noisy linear target.
pub fn shards(n_neurons: usize, rows: usize, n_bs: usize, seed: u64) -> Vec<LocalDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = ReservoirSpec::new(n_neurons, 0.9, 3, 2, seed);
    let mut model = EsnModel::build(spec, Topology::Single).unwrap();
    let inputs: Vec<Vec<f64>> = (0..rows)
        .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let h = vrbip_core::federated::run_features(&mut model, &inputs, 0).unwrap();
    let w = DMatrix::from_fn(h.ncols(), 2, |_, _| rng.random_range(-1.0..1.0));
    let e = &h * w + DMatrix::from_fn(rows, 2, |_, _| 0.01 * rng.random_range(-1.0..1.0));
    let per = rows / n_bs;
    (0..n_bs)
        .map(|j| {
            let r: Vec<usize> = (j * per..(j + 1) * per).collect();
            LocalDataset::new(j, h.select_rows(&r), e.select_rows(&r)).unwrap()
        })
        .collect()
}

/// Geometry and channel draws of slot 0 under `cfg`.
pub fn slot(cfg: &ScenarioConfig) -> (Geometry, ChannelDraws) {
    let traces = generate_traces(&mobility(cfg), cfg.n_users, 1, cfg.seed).unwrap();
    let g = Geometry::steered(
        bs_layout(cfg.n_bs, cfg.radius),
        traces.iter().map(|t| t.positions[0]).collect(),
        traces.iter().map(|t| t.orientation_rad(0)).collect(),
    );
    let draws = channel_draws(cfg.seed, 0, cfg.n_users, cfg.n_bs, cfg.ul_subcarriers);
    (g, draws)
}
