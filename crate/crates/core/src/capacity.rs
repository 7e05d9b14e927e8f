//! Memory capacity of linear ring reservoirs: closed forms and a brute-force
//! estimator that trains one readout per delay.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::esn::{EsnModel, Reservoir, ReservoirSpec, Topology};
use crate::linalg;

#[derive(Clone, Debug, PartialEq)]
pub enum CapacityTopology {
    Single,
    Parallel { layers: usize },
    Series { layers: usize },
    /// `K` correlated inputs with std devs `sigma` and correlation matrix `rho`
    /// feeding one reservoir through a shared input column.
    MultiInput { sigma: Vec<f64>, rho: DMatrix<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CapacityQuery {
    pub topology: CapacityTopology,
    pub n_neurons: usize,
    pub ring_weight: f64,
}

impl CapacityQuery {
    pub fn single(n_neurons: usize, ring_weight: f64) -> Self {
        Self {
            topology: CapacityTopology::Single,
            n_neurons,
            ring_weight,
        }
    }

    pub fn parallel(n_neurons: usize, ring_weight: f64, layers: usize) -> Self {
        Self {
            topology: CapacityTopology::Parallel { layers },
            n_neurons,
            ring_weight,
        }
    }

    pub fn series(n_neurons: usize, ring_weight: f64, layers: usize) -> Self {
        Self {
            topology: CapacityTopology::Series { layers },
            n_neurons,
            ring_weight,
        }
    }

    /// Two inputs with unit variance and correlation `rho12`.
    pub fn two_inputs(n_neurons: usize, ring_weight: f64, rho12: f64) -> Self {
        Self {
            topology: CapacityTopology::MultiInput {
                sigma: vec![1.0, 1.0],
                rho: DMatrix::from_row_slice(2, 2, &[1.0, rho12, rho12, 1.0]),
            },
            n_neurons,
            ring_weight,
        }
    }

    pub fn layers(&self) -> usize {
        match self.topology {
            CapacityTopology::Parallel { layers } | CapacityTopology::Series { layers } => layers,
            _ => 1,
        }
    }

    pub fn label(&self) -> &'static str {
        match self.topology {
            CapacityTopology::Single => "single",
            CapacityTopology::Parallel { .. } => "parallel",
            CapacityTopology::Series { .. } => "series",
            CapacityTopology::MultiInput { .. } => "multi-input",
        }
    }

    pub fn validate(&self) -> Result<()> {
        ReservoirSpec::new(self.n_neurons, self.ring_weight, 1, 1, 0).validate()?;
        match &self.topology {
            CapacityTopology::Parallel { layers } | CapacityTopology::Series { layers } if *layers == 0 => {
                Err(Error::InvalidSpec("layer count must be at least 1".into()))
            }
            CapacityTopology::MultiInput { sigma, rho } => validate_correlation(sigma, rho),
            _ => Ok(()),
        }
    }
}

fn validate_correlation(sigma: &[f64], rho: &DMatrix<f64>) -> Result<()> {
    let k = sigma.len();
    if k == 0 {
        return Err(Error::InvalidSpec("multi-input needs at least one input".into()));
    }
    if rho.shape() != (k, k) {
        return Err(Error::Dimension {
            expected: k,
            got: rho.nrows(),
            context: "correlation matrix size",
        });
    }
    if sigma.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::InvalidSpec("input std devs must be positive".into()));
    }
    for i in 0..k {
        if (rho[(i, i)] - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidSpec("correlation diagonal must be 1".into()));
        }
        for j in 0..i {
            if (rho[(i, j)] - rho[(j, i)]).abs() > 1e-12 {
                return Err(Error::InvalidSpec("correlation matrix must be symmetric".into()));
            }
        }
    }
    let min_eig = rho.clone().symmetric_eigen().eigenvalues.min();
    if min_eig < -1e-10 {
        return Err(Error::InvalidSpec(format!(
            "correlation matrix not positive semidefinite (eigenvalue {min_eig:.3e})"
        )));
    }
    Ok(())
}

/// `N − 1 + w^{2N}`.
pub fn single_capacity(n_neurons: usize, w: f64) -> f64 {
    (n_neurons as f64 - 1.0) + w.powi(2 * n_neurons as i32)
}

/// `(Σσ² / ΣΣ ρ_kn σ_k σ_n)²`, the full double sum including `k = n`.
pub fn correlation_prefactor(sigma: &[f64], rho: &DMatrix<f64>) -> f64 {
    let num: f64 = sigma.iter().map(|s| s * s).sum();
    let mut den = 0.0;
    for (k, sk) in sigma.iter().enumerate() {
        for (n, sn) in sigma.iter().enumerate() {
            den += rho[(k, n)] * sk * sn;
        }
    }
    (num / den).powi(2)
}

pub fn mc_closed_form(q: &CapacityQuery) -> Result<f64> {
    q.validate()?;
    let base = single_capacity(q.n_neurons, q.ring_weight);
    Ok(match &q.topology {
        CapacityTopology::Single | CapacityTopology::Parallel { .. } => base,
        CapacityTopology::Series { layers } => {
            let decay = 1.0 - q.ring_weight.powi(2 * q.n_neurons as i32);
            decay.powi(*layers as i32 - 1) * base
        }
        CapacityTopology::MultiInput { sigma, rho } => correlation_prefactor(sigma, rho) * base,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmpiricalMcConfig {
    pub length: usize,
    /// `None` picks [`default_max_delay`].
    pub max_delay: Option<usize>,
    pub washout: usize,
    pub seed: u64,
    pub ridge: f64,
    /// Fraction of usable rows used for fitting; the rest scores `r²`.
    pub train_fraction: f64,
}

impl Default for EmpiricalMcConfig {
    fn default() -> Self {
        Self {
            length: 100_000,
            max_delay: None,
            washout: 200,
            seed: 0,
            ridge: 1e-8,
            train_fraction: 0.8,
        }
    }
}

/// `max(3N, ⌈ln 1e-4 / ln w²⌉)`: far enough that the dropped tail is below 1e-4 per delay.
pub fn default_max_delay(n_neurons: usize, w: f64) -> usize {
    let tail = (1e-4f64.ln() / (w * w).ln()).ceil() as usize;
    (3 * n_neurons).max(tail)
}

#[derive(Clone, Debug, PartialEq)]
pub struct McEstimate {
    pub total: f64,
    /// `r²` per delay, index 0 is delay 1. Multi-input runs sum over inputs.
    pub per_delay: Vec<f64>,
}

/// Brute-force estimate: for every delay `k` a ridge readout over the
/// reservoir states is fitted to `m_{t−k}` and its squared correlation with
/// the target is measured on held-out rows.
pub fn mc_empirical(q: &CapacityQuery, cfg: &EmpiricalMcConfig) -> Result<McEstimate> {
    q.validate()?;
    let k_max = cfg
        .max_delay
        .unwrap_or_else(|| default_max_delay(q.n_neurons, q.ring_weight));
    if k_max == 0 {
        return Err(Error::InvalidSpec("max delay must be at least 1".into()));
    }
    let start = cfg.washout + k_max;
    if cfg.length <= start + 2 {
        return Err(Error::InvalidSpec(format!(
            "sequence length {} must exceed washout + max delay = {start}",
            cfg.length
        )));
    }
    let n_fit = ((cfg.length - start) as f64 * cfg.train_fraction) as usize;
    if n_fit == 0 || n_fit >= cfg.length - start {
        return Err(Error::InvalidSpec("train fraction leaves an empty split".into()));
    }
    let split = Split {
        start,
        n_fit,
        len: cfg.length,
    };

    let layers = q.layers();
    let spec = ReservoirSpec::new(q.n_neurons, q.ring_weight, 1, 1, cfg.seed);
    let topo = match q.topology {
        CapacityTopology::Parallel { layers } => Topology::Parallel { layers },
        CapacityTopology::Series { layers } => Topology::Series { layers },
        _ => Topology::Single,
    };
    let mut reservoirs: Vec<Reservoir> = EsnModel::build(spec, topo)?.reservoirs().to_vec();
    debug_assert_eq!(reservoirs.len(), layers);
    let mut stream = ChaCha8Rng::seed_from_u64(cfg.seed);
    stream.set_stream(1);

    let per_delay = match &q.topology {
        CapacityTopology::Single | CapacityTopology::Parallel { .. } => {
            let m = uniform_inputs(&mut stream, cfg.length);
            let mut states = DMatrix::zeros(cfg.length, q.n_neurons * layers);
            for (l, r) in reservoirs.iter_mut().enumerate() {
                let s = r.run(&m)?;
                states.columns_mut(l * q.n_neurons, q.n_neurons).copy_from(&s);
            }
            let col: Vec<f64> = m.column(0).iter().copied().collect();
            delay_scores(&states, &[col], k_max, split, cfg.ridge)?
        }
        CapacityTopology::Series { .. } => {
            let m = uniform_inputs(&mut stream, cfg.length);
            series_scores(&mut reservoirs, &m, k_max, split, cfg.ridge)?
        }
        CapacityTopology::MultiInput { sigma, rho } => {
            let m = correlated_inputs(&mut stream, cfg.length, sigma, rho);
            let column = reservoirs[0].input_weights().column(0).into_owned();
            let shared = DMatrix::from_fn(q.n_neurons, sigma.len(), |i, _| column[i]);
            let mut r = Reservoir::with_input_weights(q.ring_weight, shared);
            let states = r.run(&m)?;
            let cols: Vec<Vec<f64>> = (0..sigma.len())
                .map(|c| m.column(c).iter().copied().collect())
                .collect();
            delay_scores(&states, &cols, k_max, split, cfg.ridge)?
        }
    };
    Ok(McEstimate {
        total: per_delay.iter().sum(),
        per_delay,
    })
}

#[derive(Clone, Copy, Debug)]
struct Split {
    start: usize,
    n_fit: usize,
    len: usize,
}

impl Split {
    fn n_test(&self) -> usize {
        self.len - self.start - self.n_fit
    }
}

fn uniform_inputs(rng: &mut ChaCha8Rng, len: usize) -> DMatrix<f64> {
    DMatrix::from_fn(len, 1, |_, _| rng.random_range(-0.5..0.5))
}

/// Zero-mean Gaussian rows with covariance `diag(σ)·ρ·diag(σ)`, via the
/// symmetric square root so singular `ρ` is allowed.
fn correlated_inputs(rng: &mut ChaCha8Rng, len: usize, sigma: &[f64], rho: &DMatrix<f64>) -> DMatrix<f64> {
    let k = sigma.len();
    let cov = DMatrix::from_fn(k, k, |i, j| rho[(i, j)] * sigma[i] * sigma[j]);
    let eig = cov.symmetric_eigen();
    let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let root = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose();
    let mut out = DMatrix::zeros(len, k);
    for t in 0..len {
        let z = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
        out.row_mut(t).copy_from(&(&root * z).transpose());
    }
    out
}

fn delayed_target(m: &[f64], k: usize, split: Split) -> Vec<f64> {
    m[split.start - k..split.len - k].to_vec()
}

fn holdout_r2(states: &DMatrix<f64>, weights: &DVector<f64>, target: &[f64], split: Split) -> f64 {
    let test = states.rows(split.start + split.n_fit, split.n_test());
    let z = test * weights;
    linalg::squared_correlation(z.as_slice(), &target[split.n_fit..])
}

/// The fit rows never change with `k`, so one Cholesky factor serves every delay.
fn delay_scores(states: &DMatrix<f64>, inputs: &[Vec<f64>], k_max: usize, split: Split, ridge: f64) -> Result<Vec<f64>> {
    let fit = states.rows(split.start, split.n_fit);
    let gram = linalg::shifted_gram(&fit.into_owned(), ridge);
    let d = gram.nrows();
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Numerical(format!("{d}x{d} state gram not positive definite")))?;
    (1..=k_max)
        .into_par_iter()
        .map(|k| {
            let mut score = 0.0;
            for m in inputs {
                let target = delayed_target(m, k, split);
                let y = DVector::from_column_slice(&target[..split.n_fit]);
                let b = chol.solve(&(fit.transpose() * y));
                score += holdout_r2(states, &b, &target, split);
            }
            Ok(score)
        })
        .collect()
}

/// Greedy chain per delay: stage `l` is fitted to `m_{t−k}`, its output
/// drives stage `l + 1`, and the last stage is scored.
fn series_scores(
    reservoirs: &mut [Reservoir],
    m: &DMatrix<f64>,
    k_max: usize,
    split: Split,
    ridge: f64,
) -> Result<Vec<f64>> {
    let first = reservoirs[0].run(m)?;
    let col: Vec<f64> = m.column(0).iter().copied().collect();
    let rest: Vec<Reservoir> = reservoirs[1..].to_vec();
    (1..=k_max)
        .into_par_iter()
        .map(|k| {
            let target = delayed_target(&col, k, split);
            let y = DMatrix::from_column_slice(split.n_fit, 1, &target[..split.n_fit]);
            let mut states = first.clone();
            let mut stages = rest.clone();
            let mut l = 0;
            loop {
                let fit = states.rows(split.start, split.n_fit).into_owned();
                let w = linalg::ridge(&fit, &y, ridge)?;
                let b = w.row(0).transpose();
                if l == stages.len() {
                    return Ok(holdout_r2(&states, &b, &target, split));
                }
                let z = &states * &b;
                let driven = DMatrix::from_column_slice(z.len(), 1, z.as_slice());
                stages[l].reset();
                states = stages[l].run(&driven)?;
                l += 1;
            }
        })
        .collect()
}

/// `sqrt(mean_t ‖ŷ_t − e_t‖²) / sqrt(Σ_c range_c²)`, where `range_c` is the
/// spread of target component `c`. Falls back to plain RMSE when every
/// component is constant.
pub fn nrmse(predicted: &[Vec<f64>], target: &[Vec<f64>]) -> Result<f64> {
    if predicted.is_empty() {
        return Err(Error::Empty("nrmse series"));
    }
    if predicted.len() != target.len() {
        return Err(Error::Dimension {
            expected: target.len(),
            got: predicted.len(),
            context: "nrmse series length",
        });
    }
    let dim = target[0].len();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    let mut sq = 0.0;
    for (p, e) in predicted.iter().zip(target) {
        if p.len() != dim || e.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                got: p.len().min(e.len()),
                context: "nrmse vector width",
            });
        }
        for c in 0..dim {
            sq += (p[c] - e[c]).powi(2);
            lo[c] = lo[c].min(e[c]);
            hi[c] = hi[c].max(e[c]);
        }
    }
    let rmse = (sq / predicted.len() as f64).sqrt();
    let range = lo.iter().zip(&hi).map(|(a, b)| (b - a).powi(2)).sum::<f64>().sqrt();
    Ok(if range > 0.0 { rmse / range } else { rmse })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CapacityRow {
    pub topology: String,
    pub n_neurons: usize,
    pub ring_weight: f64,
    pub layers: usize,
    pub closed: f64,
    pub empirical: f64,
}

impl CapacityRow {
    pub fn rel_err(&self) -> f64 {
        (self.empirical - self.closed).abs() / self.closed
    }
}

pub fn capacity_row(q: &CapacityQuery, cfg: &EmpiricalMcConfig) -> Result<CapacityRow> {
    Ok(CapacityRow {
        topology: q.label().to_string(),
        n_neurons: q.n_neurons,
        ring_weight: q.ring_weight,
        layers: q.layers(),
        closed: mc_closed_form(q)?,
        empirical: mc_empirical(q, cfg)?.total,
    })
}

pub fn write_capacity_csv(path: &Path, rows: &[CapacityRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["topology", "n_neurons", "w", "layers", "m_closed", "m_empirical", "rel_err"])?;
    for r in rows {
        w.write_record([
            r.topology.clone(),
            r.n_neurons.to_string(),
            r.ring_weight.to_string(),
            r.layers.to_string(),
            format!("{:.6}", r.closed),
            format!("{:.6}", r.empirical),
            format!("{:.6}", r.rel_err()),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn quick() -> EmpiricalMcConfig {
        EmpiricalMcConfig {
            length: 30_000,
            ..EmpiricalMcConfig::default()
        }
    }

    #[test]
    fn corollary_spot_value() {
        let m = mc_closed_form(&CapacityQuery::single(30, 0.98)).unwrap();
        assert_relative_eq!(m, 29.0 + 0.98f64.powi(60), epsilon = 1e-12);
        assert_relative_eq!(m, 29.2976, epsilon = 1e-4);
    }

    #[test]
    fn series_one_layer_is_single() {
        let s = mc_closed_form(&CapacityQuery::single(10, 0.9)).unwrap();
        assert_eq!(mc_closed_form(&CapacityQuery::series(10, 0.9, 1)).unwrap(), s);
        assert_eq!(mc_closed_form(&CapacityQuery::parallel(10, 0.9, 4)).unwrap(), s);
    }

    #[test]
    fn prefactor_examples() {
        let base = single_capacity(10, 0.9);
        assert_relative_eq!(mc_closed_form(&CapacityQuery::two_inputs(10, 0.9, 0.0)).unwrap(), base);
        let q = CapacityQuery {
            topology: CapacityTopology::MultiInput {
                sigma: vec![0.3, 2.0],
                rho: DMatrix::identity(2, 2),
            },
            n_neurons: 10,
            ring_weight: 0.9,
        };
        assert_relative_eq!(mc_closed_form(&q).unwrap(), base, epsilon = 1e-12);
        let full = CapacityQuery::two_inputs(10, 0.9, 1.0);
        assert_relative_eq!(mc_closed_form(&full).unwrap(), 0.25 * base, epsilon = 1e-12);
    }

    #[test]
    fn invalid_queries_rejected() {
        assert!(mc_closed_form(&CapacityQuery::single(10, 1.0)).is_err());
        assert!(mc_closed_form(&CapacityQuery::series(10, 0.5, 0)).is_err());
        assert!(mc_closed_form(&CapacityQuery::two_inputs(10, 0.5, 1.5)).is_err());
        let asym = CapacityQuery {
            topology: CapacityTopology::MultiInput {
                sigma: vec![1.0, 1.0],
                rho: DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.3, 1.0]),
            },
            n_neurons: 5,
            ring_weight: 0.5,
        };
        assert!(asym.validate().is_err());
    }

    #[test]
    fn short_sequence_rejected() {
        let cfg = EmpiricalMcConfig {
            length: 210,
            ..EmpiricalMcConfig::default()
        };
        assert!(matches!(
            mc_empirical(&CapacityQuery::single(5, 0.9), &cfg),
            Err(Error::InvalidSpec(_))
        ));
    }

    #[test]
    fn adaptive_max_delay() {
        assert_eq!(default_max_delay(5, 0.9), 44);
        assert_eq!(default_max_delay(20, 0.7), 60);
    }

    // exact capacity of a states-only readout from the stationary covariances,
    // independent of the closed form and of sampling
    fn analytic_mc(n: usize, w: f64, v: &[f64], k_max: usize) -> f64 {
        let r = crate::esn::ring_matrix(n, w);
        let v = DVector::from_column_slice(v);
        let mut p = DMatrix::zeros(n, n);
        let mut term = v.clone();
        for _ in 0..2000 {
            p += &term * term.transpose();
            term = &r * term;
        }
        let p_inv = p.clone().try_inverse().unwrap();
        let mut total = 0.0;
        let mut c = &r * &v;
        for _ in 1..=k_max {
            total += (c.transpose() * &p_inv * &c)[(0, 0)];
            c = &r * c;
        }
        total
    }

    #[test]
    fn covariance_oracle_matches_closed_form() {
        for (n, w) in [(5, 0.9), (10, 0.7)] {
            let model = EsnModel::build(ReservoirSpec::new(n, w, 1, 1, 3), Topology::Single).unwrap();
            let v: Vec<f64> = model.reservoirs()[0].input_weights().iter().copied().collect();
            let a = analytic_mc(n, w, &v, 400);
            assert_relative_eq!(a, single_capacity(n, w), epsilon = 1e-6);
        }
    }

    #[test]
    fn empirical_single_close_to_closed_form() {
        let est = mc_empirical(&CapacityQuery::single(5, 0.9), &quick()).unwrap();
        let closed = single_capacity(5, 0.9);
        assert!((est.total - closed).abs() / closed < 0.08, "{} vs {closed}", est.total);
        assert_eq!(est.per_delay.len(), 44);
        assert!(est.per_delay.iter().all(|r| (0.0..=1.0 + 1e-9).contains(r)));
    }

    #[test]
    fn small_ring_weight_keeps_shift_memory() {
        // delays below N stay recoverable through the shift however small w is
        let cfg = EmpiricalMcConfig {
            length: 20_000,
            max_delay: Some(15),
            ..EmpiricalMcConfig::default()
        };
        let est = mc_empirical(&CapacityQuery::single(5, 0.2), &cfg).unwrap();
        assert!(est.total > 3.8 && est.total < 4.2, "{}", est.total);
        assert!(est.per_delay[4..].iter().all(|r| *r < 0.01));
    }

    #[test]
    fn empirical_is_seed_deterministic() {
        let cfg = EmpiricalMcConfig {
            length: 5_000,
            ..EmpiricalMcConfig::default()
        };
        let q = CapacityQuery::parallel(5, 0.7, 2);
        assert_eq!(mc_empirical(&q, &cfg).unwrap(), mc_empirical(&q, &cfg).unwrap());
    }

    #[test]
    fn nrmse_examples() {
        let e: Vec<Vec<f64>> = (0..11).map(|t| vec![t as f64 / 10.0]).collect();
        assert_eq!(nrmse(&e, &e).unwrap(), 0.0);
        let shifted: Vec<Vec<f64>> = e.iter().map(|v| vec![v[0] + 0.03]).collect();
        assert_relative_eq!(nrmse(&shifted, &e).unwrap(), 0.03, epsilon = 1e-12);
        assert!(nrmse(&[], &[]).is_err());
        let flat = vec![vec![1.0]; 4];
        let off = vec![vec![1.5]; 4];
        assert_relative_eq!(nrmse(&off, &flat).unwrap(), 0.5);
    }

    #[test]
    fn csv_table_written() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cap.csv");
        let row = CapacityRow {
            topology: "single".into(),
            n_neurons: 5,
            ring_weight: 0.9,
            layers: 1,
            closed: 4.3487,
            empirical: 4.3,
        };
        write_capacity_csv(&path, &[row]).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert!(text.starts_with("topology,n_neurons,w,layers,m_closed,m_empirical,rel_err\n"));
        assert_eq!(text.lines().count(), 2);
    }

    proptest! {
        #[test]
        fn series_closed_form_strictly_decreasing(n in 2usize..40, w in 0.05f64..0.99, l in 1usize..6) {
            // below this the decay factor rounds to exactly 1
            prop_assume!(w.powi(2 * n as i32) > 1e-12);
            let a = mc_closed_form(&CapacityQuery::series(n, w, l)).unwrap();
            let b = mc_closed_form(&CapacityQuery::series(n, w, l + 1)).unwrap();
            prop_assert!(b < a);
        }

        #[test]
        fn closed_form_bounded_by_neurons(n in 2usize..60, w in -0.99f64..0.99) {
            prop_assume!(w.abs() > 1e-3);
            let m = mc_closed_form(&CapacityQuery::single(n, w)).unwrap();
            prop_assert!(m >= n as f64 - 1.0 && m <= n as f64);
        }

        #[test]
        fn prefactor_decreases_with_positive_correlation(r1 in 0.0f64..0.99, dr in 0.001f64..0.5) {
            let r2 = (r1 + dr).min(1.0);
            let a = mc_closed_form(&CapacityQuery::two_inputs(10, 0.9, r1)).unwrap();
            let b = mc_closed_form(&CapacityQuery::two_inputs(10, 0.9, r2)).unwrap();
            prop_assert!(b < a);
        }

        #[test]
        fn nrmse_scale_invariant(scale in 0.1f64..10.0, off in -1.0f64..1.0) {
            let e: Vec<Vec<f64>> = (0..20).map(|t| vec![(t as f64).sin(), (t as f64 * 0.3).cos()]).collect();
            let p: Vec<Vec<f64>> = e.iter().map(|v| vec![v[0] + off, v[1] - off]).collect();
            let es: Vec<Vec<f64>> = e.iter().map(|v| v.iter().map(|x| x * scale).collect()).collect();
            let ps: Vec<Vec<f64>> = p.iter().map(|v| v.iter().map(|x| x * scale).collect()).collect();
            let a = nrmse(&p, &e).unwrap();
            let b = nrmse(&ps, &es).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        }
    }
}
