//! Training point sets and residual resampling.
//!
//! All draws are uniform and i.i.d. Times are drawn on `(0, T_sub]` as
//! `T_sub·(1 − U)` with `U ∈ [0, 1)`, so `t = 0` never occurs. Points are
//! stored row-wise as `(X₁, …, X_d, t)`.

use ndarray::Array2;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::network::NetworkParams;
use crate::problems::{BoundaryKind, PdeProblem};
use crate::Real;

/// RNG used for every sampling stream.
pub type SampleRng = ChaCha8Rng;

pub fn sample_rng(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, thiserror::Error)]
pub enum SamplingError {
    #[error("subdomain end time {t_sub} must lie in (0, {horizon}]")]
    TimeRange { t_sub: Real, horizon: Real },
    #[error("invalid resampling policy: {0}")]
    Policy(String),
}

/// Boundary data: labeled Dirichlet points or bare times for periodic pairs.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundarySet {
    Dirichlet { points: Array2<Real>, values: Vec<Real> },
    Periodic { times: Vec<Real> },
}

impl BoundarySet {
    pub fn len(&self) -> usize {
        match self {
            BoundarySet::Dirichlet { values, .. } => values.len(),
            BoundarySet::Periodic { times } => times.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Labeled points `(X, t, u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedSet {
    pub points: Array2<Real>,
    pub values: Vec<Real>,
}

impl SupervisedSet {
    pub fn empty(input_dim: usize) -> Self {
        Self {
            points: Array2::zeros((0, input_dim)),
            values: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// The point sets of one training stage on `Ω × (0, t_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingData {
    pub t_max: Real,
    /// Rows `(X, 0)`.
    pub initial: Array2<Real>,
    pub initial_values: Vec<Real>,
    pub boundary: BoundarySet,
    pub residual: Array2<Real>,
    pub supervised: SupervisedSet,
}

impl TrainingData {
    pub fn sizes(&self) -> DataSizes {
        DataSizes {
            n_i: self.initial_values.len(),
            n_b: self.boundary.len(),
            n_r: self.residual.nrows(),
            n_sp: self.supervised.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DataSizes {
    pub n_i: usize,
    pub n_b: usize,
    pub n_r: usize,
    pub n_sp: usize,
}

impl DataSizes {
    pub fn new(n_i: usize, n_b: usize, n_r: usize, n_sp: usize) -> Self {
        Self { n_i, n_b, n_r, n_sp }
    }
}

/// Replace `⌊η N_r⌋` residual points every `k` Adam steps while the step is
/// below `f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResamplePolicy {
    pub eta: Real,
    pub k: usize,
    pub f: usize,
}

impl ResamplePolicy {
    pub fn none() -> Self {
        Self { eta: 0.0, k: 1, f: 0 }
    }

    pub fn validate(&self, adam_steps: usize) -> Result<(), SamplingError> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(SamplingError::Policy(format!(
                "eta must lie in [0, 1], got {}",
                self.eta
            )));
        }
        if self.k == 0 {
            return Err(SamplingError::Policy("interval k must be >= 1".into()));
        }
        if self.f > adam_steps {
            return Err(SamplingError::Policy(format!(
                "termination f = {} exceeds the {adam_steps} Adam steps",
                self.f
            )));
        }
        Ok(())
    }

    pub fn fires_at(&self, step: usize) -> bool {
        self.eta > 0.0 && step > 0 && step.is_multiple_of(self.k) && step < self.f
    }

    pub fn count(&self, n_r: usize) -> usize {
        ((self.eta as f64) * n_r as f64).floor() as usize
    }
}

fn check_time(problem: &PdeProblem, t_sub: Real) -> Result<(), SamplingError> {
    let horizon = problem.horizon();
    if !(t_sub > 0.0 && t_sub <= horizon) {
        return Err(SamplingError::TimeRange { t_sub, horizon });
    }
    Ok(())
}

fn draw_time(rng: &mut SampleRng, t_sub: Real) -> Real {
    t_sub * (1.0 - rng.random::<Real>())
}

fn draw_space(rng: &mut SampleRng, problem: &PdeProblem, out: &mut [Real]) {
    let dom = problem.domain();
    for (j, x) in out.iter_mut().enumerate() {
        *x = dom.lo[j] + dom.extent(j) * rng.random::<Real>();
    }
}

/// `n` rows uniform on `Ω × (0, t_sub]`.
pub fn sample_interior(problem: &PdeProblem, t_sub: Real, n: usize, rng: &mut SampleRng) -> Array2<Real> {
    let d = problem.spatial_dim();
    let mut pts = Array2::zeros((n, d + 1));
    for mut row in pts.rows_mut() {
        let row = row.as_slice_mut().expect("standard layout");
        draw_space(rng, problem, &mut row[..d]);
        row[d] = draw_time(rng, t_sub);
    }
    pts
}

fn sample_initial(problem: &PdeProblem, n: usize, rng: &mut SampleRng) -> (Array2<Real>, Vec<Real>) {
    let d = problem.spatial_dim();
    let mut pts = Array2::zeros((n, d + 1));
    let mut values = Vec::with_capacity(n);
    for mut row in pts.rows_mut() {
        let row = row.as_slice_mut().expect("standard layout");
        draw_space(rng, problem, &mut row[..d]);
        values.push(problem.initial(&row[..d]));
    }
    (pts, values)
}

fn sample_boundary(problem: &PdeProblem, t_sub: Real, n: usize, rng: &mut SampleRng) -> BoundarySet {
    if problem.boundary_kind() != BoundaryKind::Dirichlet {
        let times = (0..n).map(|_| draw_time(rng, t_sub)).collect();
        return BoundarySet::Periodic { times };
    }
    let d = problem.spatial_dim();
    let dom = problem.domain();
    // each axis contributes two faces of area Π_{k≠j} extent_k
    let areas: Vec<Real> = (0..d)
        .map(|j| (0..d).filter(|&k| k != j).map(|k| dom.extent(k)).product())
        .collect();
    let total: Real = 2.0 * areas.iter().copied().sum::<Real>();
    let mut pts = Array2::zeros((n, d + 1));
    let mut values = Vec::with_capacity(n);
    for mut row in pts.rows_mut() {
        let row = row.as_slice_mut().expect("standard layout");
        let mut pick = rng.random::<Real>() * total;
        let mut face = 2 * d - 1;
        for f in 0..2 * d {
            let a = areas[f / 2];
            if pick < a {
                face = f;
                break;
            }
            pick -= a;
        }
        draw_space(rng, problem, &mut row[..d]);
        let axis = face / 2;
        row[axis] = if face.is_multiple_of(2) {
            dom.lo[axis]
        } else {
            dom.hi[axis]
        };
        row[d] = draw_time(rng, t_sub);
        values.push(
            problem
                .boundary_value(&row[..d], row[d])
                .expect("point placed on a face"),
        );
    }
    BoundarySet::Dirichlet { points: pts, values }
}

/// Draws `τ_i`, `τ_b` and `τ_r` on `Ω × (0, t_sub]`; the supervised set is
/// left empty (see [`build_supervised_set`]).
pub fn sample_training_data(
    problem: &PdeProblem,
    t_sub: Real,
    sizes: DataSizes,
    seed: u64,
) -> Result<TrainingData, SamplingError> {
    check_time(problem, t_sub)?;
    let mut rng = sample_rng(seed);
    let (initial, initial_values) = sample_initial(problem, sizes.n_i, &mut rng);
    let boundary = sample_boundary(problem, t_sub, sizes.n_b, &mut rng);
    let residual = sample_interior(problem, t_sub, sizes.n_r, &mut rng);
    Ok(TrainingData {
        t_max: t_sub,
        initial,
        initial_values,
        boundary,
        residual,
        supervised: SupervisedSet::empty(problem.spatial_dim() + 1),
    })
}

/// Applies one resampling event if the policy fires at `step`; returns the
/// number of replaced points.
pub fn resample_residuals(
    data: &mut TrainingData,
    policy: &ResamplePolicy,
    step: usize,
    problem: &PdeProblem,
    rng: &mut SampleRng,
) -> usize {
    if !policy.fires_at(step) {
        return 0;
    }
    let n_r = data.residual.nrows();
    let m = policy.count(n_r);
    if m == 0 {
        return 0;
    }
    let fresh = sample_interior(problem, data.t_max, m, rng);
    let victims = index::sample(rng, n_r, m);
    for (src, dst) in victims.iter().enumerate() {
        data.residual.row_mut(dst).assign(&fresh.row(src));
    }
    m
}

/// `n_sp` points uniform on `Ω × (0, t_prev]` labeled by `pretrained`.
pub fn build_supervised_set(
    pretrained: &NetworkParams,
    problem: &PdeProblem,
    t_prev: Real,
    n_sp: usize,
    seed: u64,
) -> Result<SupervisedSet, SamplingError> {
    check_time(problem, t_prev)?;
    let mut rng = sample_rng(seed);
    let points = sample_interior(problem, t_prev, n_sp, &mut rng);
    let values = pretrained
        .predict(points.view())
        .expect("network input dimension matches the problem");
    Ok(SupervisedSet { points, values })
}
