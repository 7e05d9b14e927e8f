//! Linear echo state networks with a cyclic ring reservoir.
//!
//! Every reservoir uses the ring recurrence `W[0][N-1] = w`, `W[k][k-1] = w`,
//! so `W` is a scaled cyclic shift with spectral radius `|w|`. States evolve
//! linearly, `μ_t = W·μ_{t-1} + W_in·υ_t`, and only the readout is trained.
//!
//! Three topologies are supported:
//!
//! * `Single`: one reservoir, readout over `[υ; μ]`.
//! * `Parallel { layers }`: `layers` independent reservoirs sharing the input.
//!   The prediction is the sum of the per-reservoir readouts, which is stored
//!   as one combined matrix over `[υ; μ_1; …; μ_L]`.
//! * `Series { layers }`: reservoir `l + 1` is driven by the readout of
//!   reservoir `l`; the prediction is the readout of the last stage.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Bounded number of input-weight redraws when the circulant matrix is singular.
pub const MAX_RESAMPLES: usize = 32;

/// Circulant moduli below this (relative to the column norm) count as singular.
const SINGULAR_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReservoirSpec {
    pub n_neurons: usize,
    pub ring_weight: f64,
    pub n_inputs: usize,
    pub n_outputs: usize,
    pub seed: u64,
}

impl ReservoirSpec {
    pub fn new(n_neurons: usize, ring_weight: f64, n_inputs: usize, n_outputs: usize, seed: u64) -> Self {
        Self {
            n_neurons,
            ring_weight,
            n_inputs,
            n_outputs,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_neurons < 2 {
            return Err(Error::InvalidSpec(format!(
                "need at least 2 neurons, got {}",
                self.n_neurons
            )));
        }
        let w = self.ring_weight.abs();
        if !(w > 0.0 && w < 1.0) {
            return Err(Error::InvalidSpec(format!(
                "ring weight must satisfy 0 < |w| < 1, got {}",
                self.ring_weight
            )));
        }
        if self.n_inputs == 0 || self.n_outputs == 0 {
            return Err(Error::InvalidSpec("inputs and outputs must be non-empty".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Topology {
    Single,
    Parallel { layers: usize },
    Series { layers: usize },
}

impl Topology {
    pub fn layers(&self) -> usize {
        match *self {
            Topology::Single => 1,
            Topology::Parallel { layers } | Topology::Series { layers } => layers,
        }
    }

    /// Number of separately trained readouts.
    pub fn stages(&self) -> usize {
        match *self {
            Topology::Series { layers } => layers,
            _ => 1,
        }
    }
}

impl std::fmt::Display for Topology {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Topology::Single => write!(f, "single"),
            Topology::Parallel { layers } => write!(f, "parallel-{layers}"),
            Topology::Series { layers } => write!(f, "series-{layers}"),
        }
    }
}

impl std::str::FromStr for Topology {
    type Err = String;

    /// Accepts `single`, `parallel-L` and `series-L`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        if s == "single" {
            return Ok(Topology::Single);
        }
        let (kind, layers) = s
            .split_once('-')
            .ok_or_else(|| format!("unknown topology `{s}`"))?;
        let layers: usize = layers
            .parse()
            .map_err(|_| format!("bad layer count in `{s}`"))?;
        if layers == 0 {
            return Err("layer count must be at least 1".into());
        }
        match kind {
            "parallel" => Ok(Topology::Parallel { layers }),
            "series" => Ok(Topology::Series { layers }),
            _ => Err(format!("unknown topology `{s}`")),
        }
    }
}

/// Smallest modulus of the eigenvalues of the circulant matrix whose first
/// column is `column`. The eigenvalues of a circulant are the DFT of that
/// column, so the matrix is regular iff no DFT coefficient vanishes.
pub fn circulant_min_modulus(column: &[f64]) -> f64 {
    let n = column.len();
    (0..n)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (j, c) in column.iter().enumerate() {
                let phase = -2.0 * std::f64::consts::PI * ((j * k) % n) as f64 / n as f64;
                re += c * phase.cos();
                im += c * phase.sin();
            }
            re.hypot(im)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Circulant matrix `V` with first column `column` (`V[i][j] = c[(i - j) mod n]`).
pub fn circulant(column: &[f64]) -> DMatrix<f64> {
    let n = column.len();
    DMatrix::from_fn(n, n, |i, j| column[(i + n - j) % n])
}

/// Dense ring matrix, mostly for inspection and tests.
pub fn ring_matrix(n: usize, w: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    m[(0, n - 1)] = w;
    for k in 1..n {
        m[(k, k - 1)] = w;
    }
    m
}

fn columns_regular(input_weights: &DMatrix<f64>) -> bool {
    input_weights.column_iter().all(|col| {
        let col: Vec<f64> = col.iter().copied().collect();
        let norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        norm > 0.0 && circulant_min_modulus(&col) > SINGULAR_TOL * norm
    })
}

/// One ring reservoir: fixed input weights and a linear state.
#[derive(Clone, Debug, PartialEq)]
pub struct Reservoir {
    ring_weight: f64,
    input_weights: DMatrix<f64>,
    state: DVector<f64>,
}

impl Reservoir {
    /// Draws input weights i.i.d. uniform on `[-0.5, 0.5]`, redrawing while any
    /// column's circulant matrix is singular.
    pub fn random<R: Rng>(n_neurons: usize, n_inputs: usize, ring_weight: f64, rng: &mut R) -> Result<Self> {
        for _ in 0..MAX_RESAMPLES {
            let w_in = DMatrix::from_fn(n_neurons, n_inputs, |_, _| rng.random_range(-0.5..=0.5));
            if columns_regular(&w_in) {
                return Ok(Self::with_input_weights(ring_weight, w_in));
            }
        }
        Err(Error::SingularInput(MAX_RESAMPLES))
    }

    pub fn with_input_weights(ring_weight: f64, input_weights: DMatrix<f64>) -> Self {
        let n = input_weights.nrows();
        Self {
            ring_weight,
            input_weights,
            state: DVector::zeros(n),
        }
    }

    pub fn n_neurons(&self) -> usize {
        self.input_weights.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.input_weights.ncols()
    }

    pub fn ring_weight(&self) -> f64 {
        self.ring_weight
    }

    pub fn input_weights(&self) -> &DMatrix<f64> {
        &self.input_weights
    }

    pub fn recurrent_matrix(&self) -> DMatrix<f64> {
        ring_matrix(self.n_neurons(), self.ring_weight)
    }

    pub fn state(&self) -> &DVector<f64> {
        &self.state
    }

    pub fn set_state(&mut self, state: DVector<f64>) -> Result<()> {
        if state.len() != self.n_neurons() {
            return Err(Error::Dimension {
                expected: self.n_neurons(),
                got: state.len(),
                context: "reservoir state",
            });
        }
        self.state = state;
        Ok(())
    }

    pub fn reset(&mut self) {
        self.state.fill(0.0);
    }

    /// `μ ← W·μ + W_in·υ`. The ring product is a rotation by one scaled by `w`.
    pub fn step(&mut self, input: &[f64]) -> Result<&DVector<f64>> {
        if input.len() != self.n_inputs() {
            return Err(Error::Dimension {
                expected: self.n_inputs(),
                got: input.len(),
                context: "reservoir input",
            });
        }
        self.advance(input);
        Ok(&self.state)
    }

    fn advance(&mut self, input: &[f64]) {
        let n = self.n_neurons();
        let last = self.state[n - 1];
        for k in (1..n).rev() {
            self.state[k] = self.ring_weight * self.state[k - 1];
        }
        self.state[0] = self.ring_weight * last;
        for (c, u) in input.iter().enumerate() {
            if *u != 0.0 {
                for k in 0..n {
                    self.state[k] += self.input_weights[(k, c)] * u;
                }
            }
        }
    }

    /// Runs the reservoir from its current state over `inputs` (one row per
    /// step) and returns the visited states, one row per step.
    pub fn run(&mut self, inputs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if inputs.ncols() != self.n_inputs() {
            return Err(Error::Dimension {
                expected: self.n_inputs(),
                got: inputs.ncols(),
                context: "reservoir input rows",
            });
        }
        let n = self.n_neurons();
        let mut states = DMatrix::zeros(inputs.nrows(), n);
        let mut row = vec![0.0; inputs.ncols()];
        for t in 0..inputs.nrows() {
            for (c, r) in row.iter_mut().enumerate() {
                *r = inputs[(t, c)];
            }
            self.advance(&row);
            for k in 0..n {
                states[(t, k)] = self.state[k];
            }
        }
        Ok(states)
    }
}

/// A complete model: reservoirs, readouts and the cascade state.
#[derive(Clone, Debug)]
pub struct EsnModel {
    spec: ReservoirSpec,
    topology: Topology,
    reservoirs: Vec<Reservoir>,
    readouts: Vec<DMatrix<f64>>,
    stage_inputs: Vec<DVector<f64>>,
    trained: bool,
}

impl EsnModel {
    pub fn build(spec: ReservoirSpec, topology: Topology) -> Result<Self> {
        spec.validate()?;
        if topology.layers() == 0 {
            return Err(Error::InvalidSpec("topology needs at least one layer".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let n = spec.n_neurons;
        let mut reservoirs = Vec::with_capacity(topology.layers());
        for l in 0..topology.layers() {
            let n_in = match topology {
                Topology::Series { .. } if l > 0 => spec.n_outputs,
                _ => spec.n_inputs,
            };
            reservoirs.push(Reservoir::random(n, n_in, spec.ring_weight, &mut rng)?);
        }
        let readouts = match topology {
            Topology::Series { layers } => (0..layers)
                .map(|l| DMatrix::zeros(spec.n_outputs, reservoirs[l].n_inputs() + n))
                .collect(),
            _ => vec![DMatrix::zeros(spec.n_outputs, spec.n_inputs + topology.layers() * n)],
        };
        let stage_inputs = reservoirs.iter().map(|r| DVector::zeros(r.n_inputs())).collect();
        Ok(Self {
            spec,
            topology,
            reservoirs,
            readouts,
            stage_inputs,
            trained: false,
        })
    }

    pub fn spec(&self) -> &ReservoirSpec {
        &self.spec
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn reservoirs(&self) -> &[Reservoir] {
        &self.reservoirs
    }

    /// `false` until a readout has been installed; an untrained model predicts zeros.
    pub fn is_trained(&self) -> bool {
        self.trained
    }

    pub fn n_stages(&self) -> usize {
        self.readouts.len()
    }

    /// Length of the stacked feature vector seen by readout `stage`.
    pub fn stage_feature_len(&self, stage: usize) -> usize {
        self.readouts[stage].ncols()
    }

    pub fn readout(&self, stage: usize) -> &DMatrix<f64> {
        &self.readouts[stage]
    }

    pub fn set_readout(&mut self, stage: usize, weights: DMatrix<f64>) -> Result<()> {
        let current = self
            .readouts
            .get(stage)
            .ok_or(Error::Dimension {
                expected: self.readouts.len(),
                got: stage,
                context: "readout stage",
            })?;
        if weights.shape() != current.shape() {
            return Err(Error::Dimension {
                expected: current.len(),
                got: weights.len(),
                context: "readout shape",
            });
        }
        self.readouts[stage] = weights;
        self.trained = true;
        Ok(())
    }

    /// Per-reservoir readouts of a parallel model; their outputs sum to the
    /// combined readout. The input block is carried by the first reservoir.
    pub fn parallel_readouts(&self) -> Vec<DMatrix<f64>> {
        let (nx, n) = (self.spec.n_inputs, self.spec.n_neurons);
        let combined = &self.readouts[0];
        (0..self.reservoirs.len())
            .map(|l| {
                let mut w = DMatrix::zeros(self.spec.n_outputs, nx + n);
                if l == 0 {
                    w.columns_mut(0, nx).copy_from(&combined.columns(0, nx));
                }
                w.columns_mut(nx, n).copy_from(&combined.columns(nx + l * n, n));
                w
            })
            .collect()
    }

    pub fn reset(&mut self) {
        for r in &mut self.reservoirs {
            r.reset();
        }
        for s in &mut self.stage_inputs {
            s.fill(0.0);
        }
    }

    /// Advances every reservoir by one step and returns the concatenated state.
    pub fn step(&mut self, input: &[f64]) -> Result<DVector<f64>> {
        if input.len() != self.spec.n_inputs {
            return Err(Error::Dimension {
                expected: self.spec.n_inputs,
                got: input.len(),
                context: "model input",
            });
        }
        match self.topology {
            Topology::Series { .. } => {
                self.stage_inputs[0] = DVector::from_column_slice(input);
                for l in 0..self.reservoirs.len() {
                    let u = self.stage_inputs[l].clone();
                    self.reservoirs[l].advance(u.as_slice());
                    if l + 1 < self.reservoirs.len() {
                        let y = &self.readouts[l] * self.stage_vector(l);
                        self.stage_inputs[l + 1] = y;
                    }
                }
            }
            _ => {
                for r in &mut self.reservoirs {
                    r.advance(input);
                }
            }
        }
        Ok(self.state())
    }

    /// Concatenated reservoir states `[μ_1; …; μ_L]`.
    pub fn state(&self) -> DVector<f64> {
        let n = self.spec.n_neurons;
        let mut out = DVector::zeros(n * self.reservoirs.len());
        for (l, r) in self.reservoirs.iter().enumerate() {
            out.rows_mut(l * n, n).copy_from(r.state());
        }
        out
    }

    fn stage_vector(&self, stage: usize) -> DVector<f64> {
        let u = &self.stage_inputs[stage];
        let mu = self.reservoirs[stage].state();
        let mut v = DVector::zeros(u.len() + mu.len());
        v.rows_mut(0, u.len()).copy_from(u);
        v.rows_mut(u.len(), mu.len()).copy_from(mu);
        v
    }

    /// Stacked feature vector for `stage` at the current time, given the
    /// external input `υ_t` that was just stepped.
    pub fn features(&self, stage: usize, input: &[f64]) -> Result<DVector<f64>> {
        if input.len() != self.spec.n_inputs {
            return Err(Error::Dimension {
                expected: self.spec.n_inputs,
                got: input.len(),
                context: "readout input",
            });
        }
        match self.topology {
            Topology::Series { .. } => {
                if stage == 0 {
                    let mu = self.reservoirs[0].state();
                    let mut v = DVector::zeros(input.len() + mu.len());
                    v.rows_mut(0, input.len()).copy_from_slice(input);
                    v.rows_mut(input.len(), mu.len()).copy_from(mu);
                    Ok(v)
                } else {
                    Ok(self.stage_vector(stage))
                }
            }
            _ => {
                let nx = input.len();
                let state = self.state();
                let mut v = DVector::zeros(nx + state.len());
                v.rows_mut(0, nx).copy_from_slice(input);
                v.rows_mut(nx, state.len()).copy_from(&state);
                Ok(v)
            }
        }
    }

    /// `ŷ_t = W_out·[υ_t; μ_t]` (combined over reservoirs for the parallel
    /// topology, last stage for the series topology).
    pub fn read_out(&self, input: &[f64]) -> Result<DVector<f64>> {
        let last = self.readouts.len() - 1;
        let x = self.features(last, input)?;
        Ok(&self.readouts[last] * x)
    }
}
