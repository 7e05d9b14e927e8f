//! Consensus ADMM training of ESN readouts across base stations.
//!
//! Each BS `j` holds stacked feature rows `H_j` and targets `E_j` and never
//! shares them. Per round:
//!
//! ```text
//! W_j ← (E_jᵀH_j − n_j + ς·Z)(H_jᵀH_j + ς·I)⁻¹
//! Z   ← (B·ς·mean(W_j) + B·mean(n_j)) / (λ + ς·B)
//! n_j ← n_j + γ·(W_j − Z)
//! ```
//!
//! The fixed point is the pooled ridge solution `ΣEᵀH (ΣHᵀH + λI)⁻¹`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::esn::EsnModel;
use crate::linalg;

/// Recorded `[υ; μ]` rows and targets for one base station.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalDataset {
    pub bs_id: usize,
    pub h: DMatrix<f64>,
    pub e: DMatrix<f64>,
}

impl LocalDataset {
    pub fn new(bs_id: usize, h: DMatrix<f64>, e: DMatrix<f64>) -> Result<Self> {
        if h.nrows() == 0 {
            return Err(Error::Empty("local dataset"));
        }
        if h.nrows() != e.nrows() {
            return Err(Error::Dimension {
                expected: h.nrows(),
                got: e.nrows(),
                context: "target rows vs feature rows",
            });
        }
        Ok(Self { bs_id, h, e })
    }

    pub fn n_rows(&self) -> usize {
        self.h.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.h.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.e.ncols()
    }

    /// Subset of rows, in the given order.
    pub fn select(&self, bs_id: usize, rows: &[usize]) -> Result<Self> {
        let h = self.h.select_rows(rows);
        let e = self.e.select_rows(rows);
        Self::new(bs_id, h, e)
    }

    /// Row-wise concatenation, used for the pooled reference solve.
    pub fn stack(parts: &[LocalDataset]) -> Result<Self> {
        let first = parts.first().ok_or(Error::Empty("dataset list"))?;
        let rows: usize = parts.iter().map(|p| p.n_rows()).sum();
        let mut h = DMatrix::zeros(rows, first.n_features());
        let mut e = DMatrix::zeros(rows, first.n_outputs());
        let mut at = 0;
        for p in parts {
            check_shape(first, p)?;
            h.rows_mut(at, p.n_rows()).copy_from(&p.h);
            e.rows_mut(at, p.n_rows()).copy_from(&p.e);
            at += p.n_rows();
        }
        Self::new(first.bs_id, h, e)
    }
}

fn check_shape(a: &LocalDataset, b: &LocalDataset) -> Result<()> {
    if a.n_features() != b.n_features() {
        return Err(Error::Dimension {
            expected: a.n_features(),
            got: b.n_features(),
            context: "feature width across base stations",
        });
    }
    if a.n_outputs() != b.n_outputs() {
        return Err(Error::Dimension {
            expected: a.n_outputs(),
            got: b.n_outputs(),
            context: "target width across base stations",
        });
    }
    Ok(())
}

/// Resets the model and steps it through `inputs`, returning the readout
/// features of `stage` after every step (one row per step, no washout).
pub fn run_features(model: &mut EsnModel, inputs: &[Vec<f64>], stage: usize) -> Result<DMatrix<f64>> {
    if inputs.is_empty() {
        return Err(Error::Empty("input sequence"));
    }
    model.reset();
    let d = model.stage_feature_len(stage);
    let mut h = DMatrix::zeros(inputs.len(), d);
    for (t, u) in inputs.iter().enumerate() {
        model.step(u)?;
        let x = model.features(stage, u)?;
        h.row_mut(t).copy_from(&x.transpose());
    }
    Ok(h)
}

/// Builds `H` and `E` from one sequence: the state is zeroed first and the
/// first `washout` rows are discarded.
pub fn collect_states(
    model: &mut EsnModel,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    washout: usize,
    bs_id: usize,
) -> Result<LocalDataset> {
    collect_stage(model, 0, inputs, targets, washout, bs_id)
}

pub fn collect_stage(
    model: &mut EsnModel,
    stage: usize,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    washout: usize,
    bs_id: usize,
) -> Result<LocalDataset> {
    if inputs.len() != targets.len() {
        return Err(Error::Dimension {
            expected: inputs.len(),
            got: targets.len(),
            context: "targets vs inputs",
        });
    }
    if inputs.len() <= washout {
        return Err(Error::Empty("sequence shorter than washout"));
    }
    let y = model.spec().n_outputs;
    let h_all = run_features(model, inputs, stage)?;
    let rows = inputs.len() - washout;
    let h = h_all.rows(washout, rows).into_owned();
    let mut e = DMatrix::zeros(rows, y);
    for (r, target) in targets[washout..].iter().enumerate() {
        if target.len() != y {
            return Err(Error::Dimension {
                expected: y,
                got: target.len(),
                context: "target vector",
            });
        }
        e.row_mut(r).copy_from_slice(target);
    }
    LocalDataset::new(bs_id, h, e)
}

/// Centralized greedy fit: every readout stage is ridge-trained on the same
/// targets in turn, so series stages see the outputs of trained predecessors.
pub fn fit_ridge(
    model: &mut EsnModel,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    washout: usize,
    lambda: f64,
) -> Result<()> {
    for stage in 0..model.n_stages() {
        let ds = collect_stage(model, stage, inputs, targets, washout, 0)?;
        let w = linalg::ridge(&ds.h, &ds.e, lambda)?;
        model.set_readout(stage, w)?;
    }
    model.reset();
    Ok(())
}

/// Which residual ends training.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopRule {
    /// `max_j ‖r_j‖ ≤ γ_A` or `‖s‖ ≤ γ_A`.
    Either,
    /// `max_j ‖r_j‖ ≤ γ_A` only.
    Primal,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FederatedConfig {
    /// Ridge penalty λ on the consensus variable.
    pub lambda: f64,
    /// Proximal penalty ς of the local solves.
    pub penalty: f64,
    /// Dual step γ.
    pub dual_step: f64,
    /// Stop tolerance γ_A.
    pub tolerance: f64,
    pub max_rounds: usize,
    pub stop: StopRule,
}

impl Default for FederatedConfig {
    fn default() -> Self {
        Self {
            lambda: 0.005,
            penalty: 0.5,
            dual_step: 0.5,
            tolerance: 1e-4,
            max_rounds: 500,
            stop: StopRule::Either,
        }
    }
}

impl FederatedConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::config("trainer", m));
        if !(self.lambda > 0.0) {
            return bad("lambda must be positive");
        }
        if !(self.penalty > 0.0) {
            return bad("penalty must be positive");
        }
        if !(self.dual_step > 0.0 && self.dual_step <= 1.0) {
            return bad("dual step must lie in (0, 1]");
        }
        if !(self.tolerance > 0.0) {
            return bad("tolerance must be positive");
        }
        if self.max_rounds == 0 {
            return bad("max_rounds must be at least 1");
        }
        Ok(())
    }
}

/// Cached `(HᵀH + ςI)⁻¹` and `EᵀH` for one base station.
#[derive(Clone, Debug)]
pub struct LocalSolver {
    inverse: DMatrix<f64>,
    cross: DMatrix<f64>,
}

impl LocalSolver {
    pub fn new(ds: &LocalDataset, penalty: f64) -> Result<Self> {
        let inverse = linalg::spd_inverse(linalg::shifted_gram(&ds.h, penalty))?;
        let cross = ds.e.tr_mul(&ds.h);
        Ok(Self { inverse, cross })
    }

    pub fn solve(&self, global: &DMatrix<f64>, dual: &DMatrix<f64>, penalty: f64) -> DMatrix<f64> {
        (&self.cross - dual + global * penalty) * &self.inverse
    }
}

/// One local proximal least-squares step.
pub fn local_update(
    ds: &LocalDataset,
    global: &DMatrix<f64>,
    dual: &DMatrix<f64>,
    penalty: f64,
) -> Result<DMatrix<f64>> {
    Ok(LocalSolver::new(ds, penalty)?.solve(global, dual, penalty))
}

/// Consensus step. `locals` and `duals` are aligned by base station.
pub fn global_update(locals: &[DMatrix<f64>], duals: &[DMatrix<f64>], lambda: f64, penalty: f64) -> DMatrix<f64> {
    let b = locals.len() as f64;
    let (r, c) = locals[0].shape();
    let mut w_mean = DMatrix::zeros(r, c);
    let mut n_mean = DMatrix::zeros(r, c);
    for (w, n) in locals.iter().zip(duals) {
        w_mean += w;
        n_mean += n;
    }
    w_mean /= b;
    n_mean /= b;
    (w_mean * (b * penalty) + n_mean * b) / (lambda + penalty * b)
}

pub fn dual_update(dual: &DMatrix<f64>, local: &DMatrix<f64>, global: &DMatrix<f64>, dual_step: f64) -> DMatrix<f64> {
    dual + (local - global) * dual_step
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoundResiduals {
    pub round: usize,
    /// `max_j ‖W_j − Z‖_F`.
    pub max_primal: f64,
    /// `‖Z_t − Z_{t−1}‖_F`.
    pub dual: f64,
}

/// Full trainer state, exposed so callers can drive rounds by hand.
#[derive(Clone, Debug)]
pub struct FederatedState {
    pub config: FederatedConfig,
    pub locals: Vec<DMatrix<f64>>,
    pub duals: Vec<DMatrix<f64>>,
    pub global: DMatrix<f64>,
    pub round: usize,
    solvers: Vec<LocalSolver>,
}

impl FederatedState {
    pub fn new(datasets: &[LocalDataset], config: FederatedConfig) -> Result<Self> {
        config.validate()?;
        let first = datasets.first().ok_or(Error::Empty("no base station holds data"))?;
        for ds in datasets {
            check_shape(first, ds)?;
        }
        let solvers = datasets
            .par_iter()
            .map(|ds| LocalSolver::new(ds, config.penalty))
            .collect::<Result<Vec<_>>>()?;
        let zero = DMatrix::zeros(first.n_outputs(), first.n_features());
        Ok(Self {
            config,
            locals: vec![zero.clone(); datasets.len()],
            duals: vec![zero.clone(); datasets.len()],
            global: zero,
            round: 0,
            solvers,
        })
    }

    /// One local → global → dual round.
    pub fn round(&mut self) -> RoundResiduals {
        let cfg = self.config;
        let global = &self.global;
        self.locals = self
            .solvers
            .par_iter()
            .zip(self.duals.par_iter())
            .map(|(s, n)| s.solve(global, n, cfg.penalty))
            .collect();
        let next = global_update(&self.locals, &self.duals, cfg.lambda, cfg.penalty);
        let dual = (&next - &self.global).norm();
        let mut max_primal: f64 = 0.0;
        for (n, w) in self.duals.iter_mut().zip(&self.locals) {
            max_primal = max_primal.max((w - &next).norm());
            *n = dual_update(n, w, &next, cfg.dual_step);
        }
        self.global = next;
        self.round += 1;
        RoundResiduals {
            round: self.round,
            max_primal,
            dual,
        }
    }

    fn should_stop(&self, r: &RoundResiduals) -> bool {
        let tol = self.config.tolerance;
        match self.config.stop {
            StopRule::Either => r.max_primal <= tol || r.dual <= tol,
            StopRule::Primal => r.max_primal <= tol,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FederatedOutcome {
    pub weights: DMatrix<f64>,
    pub rounds: usize,
    pub trace: Vec<RoundResiduals>,
    pub converged: bool,
}

impl FederatedOutcome {
    pub fn final_residuals(&self) -> RoundResiduals {
        *self.trace.last().expect("at least one round runs")
    }

    /// Turns a run that hit `max_rounds` into an error carrying its residuals.
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            let r = self.final_residuals();
            Err(Error::NotConverged {
                rounds: self.rounds,
                primal: r.max_primal,
                dual: r.dual,
            })
        }
    }
}

/// Runs rounds until the stop rule fires or `max_rounds` is reached.
/// Non-convergence is reported through `converged`, not hidden.
pub fn train_federated(datasets: &[LocalDataset], config: FederatedConfig) -> Result<FederatedOutcome> {
    let mut state = FederatedState::new(datasets, config)?;
    let mut trace = Vec::new();
    let mut converged = false;
    while state.round < config.max_rounds {
        let r = state.round();
        trace.push(r);
        if !r.max_primal.is_finite() || !r.dual.is_finite() {
            return Err(Error::Numerical(format!("residuals diverged at round {}", r.round)));
        }
        if state.should_stop(&r) {
            converged = true;
            break;
        }
    }
    Ok(FederatedOutcome {
        weights: state.global,
        rounds: state.round,
        trace,
        converged,
    })
}

/// Reference solution on the union of all shards.
pub fn pooled_ridge(datasets: &[LocalDataset], lambda: f64) -> Result<DMatrix<f64>> {
    let first = datasets.first().ok_or(Error::Empty("dataset list"))?;
    let d = first.n_features();
    let mut gram = DMatrix::zeros(d, d);
    let mut cross = DMatrix::zeros(first.n_outputs(), d);
    for ds in datasets {
        check_shape(first, ds)?;
        gram += ds.h.tr_mul(&ds.h);
        cross += ds.e.tr_mul(&ds.h);
    }
    linalg::ridge_from_moments(&gram, &cross, lambda)
}

/// Predictions `ŷ_t = W·h_t` for every row of `h`.
pub fn predict_rows(weights: &DMatrix<f64>, h: &DMatrix<f64>) -> DMatrix<f64> {
    h * weights.transpose()
}

pub fn predict_one(weights: &DMatrix<f64>, features: &DVector<f64>) -> DVector<f64> {
    weights * features
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::esn::{ReservoirSpec, Topology};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_dataset(rng: &mut ChaCha8Rng, bs: usize, t: usize, d: usize, y: usize) -> LocalDataset {
        let h = DMatrix::from_fn(t, d, |_, _| rng.random_range(-1.0..1.0));
        let e = DMatrix::from_fn(t, y, |_, _| rng.random_range(-1.0..1.0));
        LocalDataset::new(bs, h, e).unwrap()
    }

    fn tight() -> FederatedConfig {
        FederatedConfig {
            tolerance: 1e-12,
            max_rounds: 200_000,
            stop: StopRule::Primal,
            ..FederatedConfig::default()
        }
    }

    // independent oracle: explicit normal equations on the stacked data, solved by LU
    fn normal_equation_solve(parts: &[LocalDataset], lambda: f64) -> DMatrix<f64> {
        let all = LocalDataset::stack(parts).unwrap();
        let d = all.n_features();
        let a = all.h.transpose() * &all.h + DMatrix::identity(d, d) * lambda;
        let b = all.h.transpose() * &all.e;
        a.lu().solve(&b).unwrap().transpose()
    }

    #[test]
    fn collect_shape_and_zero_rows() {
        let spec = ReservoirSpec::new(3, 0.5, 2, 1, 1);
        let mut m = EsnModel::build(spec, Topology::Single).unwrap();
        let ds = collect_states(&mut m, &[vec![0.1, 0.2]], &[vec![1.0]], 0, 0).unwrap();
        assert_eq!(ds.h.shape(), (1, 5));
        let zeros = vec![vec![0.0, 0.0]; 6];
        let ds = collect_states(&mut m, &zeros, &vec![vec![0.0]; 6], 2, 0).unwrap();
        assert_eq!(ds.h, DMatrix::zeros(4, 5));
    }

    #[test]
    fn collect_rejects_mismatch_and_empty() {
        let spec = ReservoirSpec::new(3, 0.5, 1, 1, 1);
        let mut m = EsnModel::build(spec, Topology::Single).unwrap();
        assert!(matches!(
            collect_states(&mut m, &[vec![0.1], vec![0.2]], &[vec![1.0]], 0, 0),
            Err(Error::Dimension { .. })
        ));
        assert!(matches!(collect_states(&mut m, &[], &[], 0, 0), Err(Error::Empty(_))));
    }

    #[test]
    fn collect_is_replayable() {
        let spec = ReservoirSpec::new(6, 0.9, 1, 1, 4);
        let mut m = EsnModel::build(spec, Topology::Single).unwrap();
        let u: Vec<Vec<f64>> = (0..40).map(|t| vec![(0.3 * t as f64).sin()]).collect();
        let e: Vec<Vec<f64>> = (0..40).map(|t| vec![if t > 0 { u[t - 1][0] } else { 0.0 }]).collect();
        let a = collect_states(&mut m, &u, &e, 12, 0).unwrap();
        // replay by hand with the dense recurrence
        let r = m.reservoirs()[0].clone();
        let w = r.recurrent_matrix();
        let mut mu = DVector::zeros(6);
        for t in 0..40 {
            mu = &w * &mu + r.input_weights() * DVector::from_column_slice(&u[t]);
            if t >= 12 {
                assert_relative_eq!(a.h[(t - 12, 0)], u[t][0]);
                for k in 0..6 {
                    assert_relative_eq!(a.h[(t - 12, 1 + k)], mu[k], epsilon = 1e-12);
                }
            }
        }
        let b = collect_states(&mut m, &u, &e, 12, 0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn large_penalty_pins_local_to_global() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ds = random_dataset(&mut rng, 0, 20, 4, 2);
        let z = DMatrix::from_fn(2, 4, |i, j| (i + j) as f64 * 0.1);
        let n = DMatrix::from_element(2, 4, 0.3);
        let w = local_update(&ds, &z, &n, 1e9).unwrap();
        assert_relative_eq!(w, z, epsilon = 1e-6);
    }

    #[test]
    fn single_local_step_is_proximal_ridge() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ds = random_dataset(&mut rng, 0, 30, 5, 3);
        let zero = DMatrix::zeros(3, 5);
        let w = local_update(&ds, &zero, &zero, 0.5).unwrap();
        assert_relative_eq!(w, normal_equation_solve(&[ds], 0.5), epsilon = 1e-10);
    }

    #[test]
    fn exact_fit_recovered_for_small_penalty() {
        // orthonormal feature rows: H = I
        let h = DMatrix::identity(4, 4);
        let w_star = DMatrix::from_row_slice(2, 4, &[1.0, -2.0, 0.5, 3.0, 0.0, 1.0, -1.0, 2.0]);
        let e = &h * w_star.transpose();
        let ds = LocalDataset::new(0, h, e).unwrap();
        let zero = DMatrix::zeros(2, 4);
        let w = local_update(&ds, &zero, &zero, 1e-10).unwrap();
        assert_relative_eq!(w, w_star, epsilon = 1e-8);
    }

    #[test]
    fn global_update_examples() {
        let w1 = DMatrix::from_element(1, 2, 1.0);
        let w2 = DMatrix::from_element(1, 2, 3.0);
        let zero = DMatrix::zeros(1, 2);
        let z = global_update(&[w1.clone(), w2], &[zero.clone(), zero.clone()], 0.0, 0.5);
        assert_relative_eq!(z, DMatrix::from_element(1, 2, 2.0), epsilon = 1e-15);

        let n1 = DMatrix::from_element(1, 2, 0.2);
        let z = global_update(&[w1.clone()], &[n1.clone()], 0.005, 0.5);
        let expected = (&w1 * 0.5 + &n1) / 0.505;
        assert_relative_eq!(z, expected, epsilon = 1e-15);

        let z = global_update(&[w1.clone(), w1.clone()], &[zero.clone(), zero], 0.0, 0.5);
        assert_eq!(z, w1);
    }

    #[test]
    fn dual_update_examples() {
        let w = DMatrix::from_element(2, 2, 0.7);
        let n = DMatrix::from_element(2, 2, -0.1);
        assert_eq!(dual_update(&n, &w, &w, 0.5), n);
        let z = DMatrix::from_element(2, 2, 0.2);
        let n1 = dual_update(&DMatrix::zeros(2, 2), &w, &z, 0.5);
        assert_relative_eq!(n1, (&w - &z) * 0.5);
    }

    #[test]
    fn duals_stationary_at_convergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let parts: Vec<_> = (0..3).map(|j| random_dataset(&mut rng, j, 25, 4, 2)).collect();
        let cfg = FederatedConfig {
            stop: StopRule::Primal,
            max_rounds: 100_000,
            ..FederatedConfig::default()
        };
        let mut st = FederatedState::new(&parts, cfg).unwrap();
        loop {
            let r = st.round();
            if r.max_primal <= cfg.tolerance {
                break;
            }
            assert!(st.round < cfg.max_rounds);
        }
        let before = st.duals.clone();
        st.round();
        for (a, b) in before.iter().zip(&st.duals) {
            // the next step moves duals by γ·r with r itself ≤ γ_A up to one round of drift
            assert!((b - a).norm() <= cfg.dual_step * cfg.tolerance * 1.5);
        }
    }

    #[test]
    fn identical_copies_give_single_bs_ridge() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let ds = random_dataset(&mut rng, 0, 40, 5, 2);
        let copies: Vec<_> = (0..3).map(|j| LocalDataset { bs_id: j, ..ds.clone() }).collect();
        let out = train_federated(&copies, tight()).unwrap();
        assert!(out.converged);
        // three copies of the data with λ at the consensus equal one copy with λ/3
        let oracle = normal_equation_solve(&[ds], 0.005 / 3.0);
        assert!((&out.weights - &oracle).norm() / oracle.norm() < 1e-6);
    }

    #[test]
    fn disjoint_shards_match_pooled_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let full = random_dataset(&mut rng, 0, 90, 6, 3);
        let shards: Vec<_> = (0..3)
            .map(|j| full.select(j, &(j * 30..(j + 1) * 30).collect::<Vec<_>>()).unwrap())
            .collect();
        let out = train_federated(&shards, tight()).unwrap();
        let oracle = normal_equation_solve(&[full], 0.005);
        assert!((&out.weights - &oracle).norm() < 1e-6);
        assert_relative_eq!(pooled_ridge(&shards, 0.005).unwrap(), oracle, epsilon = 1e-9);
    }

    #[test]
    fn huge_tolerance_stops_after_one_round() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let parts: Vec<_> = (0..2).map(|j| random_dataset(&mut rng, j, 10, 3, 1)).collect();
        let cfg = FederatedConfig {
            tolerance: 1e9,
            ..FederatedConfig::default()
        };
        let out = train_federated(&parts, cfg).unwrap();
        assert_eq!(out.rounds, 1);
        assert!(out.converged);
    }

    #[test]
    fn non_convergence_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let parts: Vec<_> = (0..3).map(|j| random_dataset(&mut rng, j, 10, 3, 1)).collect();
        let cfg = FederatedConfig {
            tolerance: 1e-300,
            max_rounds: 3,
            ..FederatedConfig::default()
        };
        let out = train_federated(&parts, cfg).unwrap();
        assert!(!out.converged);
        assert_eq!(out.trace.len(), 3);
        match out.require_converged() {
            Err(Error::NotConverged { rounds, primal, .. }) => {
                assert_eq!(rounds, 3);
                assert!(primal > 0.0);
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        assert!(FederatedConfig::default().validate().is_ok());
        for bad in [
            FederatedConfig { lambda: 0.0, ..Default::default() },
            FederatedConfig { penalty: -1.0, ..Default::default() },
            FederatedConfig { dual_step: 1.5, ..Default::default() },
            FederatedConfig { max_rounds: 0, ..Default::default() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config { .. })));
        }
    }

    #[test]
    fn greedy_fit_matches_direct_least_squares() {
        let spec = ReservoirSpec::new(8, 0.5, 1, 1, 6);
        let mut m = EsnModel::build(spec, Topology::Single).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let u: Vec<Vec<f64>> = (0..300).map(|_| vec![rng.random_range(-0.5..0.5)]).collect();
        let e: Vec<Vec<f64>> = (0..300).map(|t| vec![if t >= 2 { u[t - 2][0] } else { 0.0 }]).collect();
        fit_ridge(&mut m, &u, &e, 16, 1e-8).unwrap();
        let ds = collect_states(&mut m, &u, &e, 16, 0).unwrap();
        let oracle = normal_equation_solve(&[ds.clone()], 1e-8);
        assert_relative_eq!(m.readout(0).clone(), oracle, epsilon = 1e-6);
        // the delay target is in the span up to the ring alias u_{t-2-N}·w^N
        let resid = predict_rows(m.readout(0), &ds.h) - &ds.e;
        assert!(resid.norm() / ds.e.norm() < 0.02);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn consensus_matches_pooled(seed in 0u64..10_000, b in 1usize..=5, d in 2usize..=8, y in 1usize..=3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let parts: Vec<_> = (0..b)
                .map(|j| {
                    let t = rng.random_range(1..=50);
                    random_dataset(&mut rng, j, t, d, y)
                })
                .collect();
            let out = train_federated(&parts, tight()).unwrap();
            let oracle = normal_equation_solve(&parts, 0.005);
            prop_assert!((&out.weights - &oracle).norm() / oracle.norm().max(1e-12) < 1e-5);
        }

        #[test]
        fn permuting_bs_order_is_harmless(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let parts: Vec<_> = (0..4).map(|j| random_dataset(&mut rng, j, 20, 4, 2)).collect();
            let mut rev = parts.clone();
            rev.reverse();
            let cfg = FederatedConfig { max_rounds: 50, ..Default::default() };
            let a = train_federated(&parts, cfg).unwrap();
            let b = train_federated(&rev, cfg).unwrap();
            prop_assert_eq!(a.rounds, b.rounds);
            prop_assert!((&a.weights - &b.weights).norm() <= 1e-10 * a.weights.norm().max(1.0));
        }

        #[test]
        fn rounds_are_deterministic(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let parts: Vec<_> = (0..3).map(|j| random_dataset(&mut rng, j, 15, 3, 2)).collect();
            let a = train_federated(&parts, FederatedConfig::default()).unwrap();
            let b = train_federated(&parts, FederatedConfig::default()).unwrap();
            prop_assert_eq!(a.weights, b.weights);
            prop_assert_eq!(a.trace, b.trace);
        }
    }
}
