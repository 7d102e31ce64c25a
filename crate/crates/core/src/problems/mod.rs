//! Evolution problems `u_t + N[u] = 0` on `Ω × (0, T]` with initial and
//! boundary data, and the six benchmark instances.
//!
//! Divergence-form operators are expanded by hand into the first and
//! diagonal second derivatives the jets provide, e.g.
//! `∇·(u∇u) = u Δu + |∇u|²`. Source terms are closed-form expressions of the
//! manufactured solutions; the residual-of-exact-solution tests guard them.

mod allen_cahn;

pub use allen_cahn::{
    ac_reference_oracle, read_reference_grid, write_reference_grid, AcOracleReport, AcOracleSettings, ReferenceGrid,
    AC_DIFFUSION, AC_REACTION,
};

use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::autodiff::{Jet, JetScalar};
use crate::consts::PI;
use crate::network::JetOrder;
use crate::Real;

#[derive(Debug, thiserror::Error)]
pub enum ProblemError {
    #[error("invalid problem parameter: {0}")]
    InvalidParameter(String),
    #[error("Allen-Cahn reference grid not found at {}", .0.display())]
    MissingReference(PathBuf),
    #[error("malformed reference grid at line {line}: {message}")]
    ReferenceFormat { line: usize, message: String },
    #[error("reference solver became unstable at t = {t}; use a smaller time step")]
    Unstable { t: f64 },
    #[error("reference solver did not self-converge: time-step halving changed the solution by {diff:e}")]
    NotConverged { diff: f64 },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Axis-aligned spatial box `Π (lo_j, hi_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    pub lo: Vec<Real>,
    pub hi: Vec<Real>,
}

impl BoxDomain {
    pub fn cube(dim: usize, lo: Real, hi: Real) -> Self {
        Self {
            lo: vec![lo; dim],
            hi: vec![hi; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn extent(&self, j: usize) -> Real {
        self.hi[j] - self.lo[j]
    }

    pub fn contains(&self, x: &[Real]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }
}

/// How boundary data enters the loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    /// `u = B(X, t)` on `∂Ω`.
    Dirichlet,
    /// `u(lo, t) = u(hi, t)` (one spatial dimension).
    PeriodicValue,
    /// `u(lo, t) = u(hi, t)` and `u_x(lo, t) = u_x(hi, t)`.
    PeriodicValueAndSlope,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Benchmark {
    Heat3d,
    Reaction { rho: Real },
    Heat2dHighFrequency,
    Heat1dNonlinear { l: u32 },
    AllenCahn,
    Convection { beta: Real },
}

#[derive(Debug, Clone)]
pub struct PdeProblem {
    benchmark: Benchmark,
    domain: BoxDomain,
    horizon: Real,
    boundary: BoundaryKind,
    reference: Option<Arc<ReferenceGrid>>,
}

/// 3D heat equation `u_t − ∇·(u∇u) = Q` on `(0,1)³`,
/// exact `u = 2 + sin(5πt + πxyz)`.
pub fn make_heat3d() -> PdeProblem {
    PdeProblem {
        benchmark: Benchmark::Heat3d,
        domain: BoxDomain::cube(3, 0.0, 1.0),
        horizon: 1.0,
        boundary: BoundaryKind::Dirichlet,
        reference: None,
    }
}

/// Reaction `u_t − ρu(1−u) = 0` on `(0, 2π)` with periodic values.
pub fn make_reaction(rho: Real) -> Result<PdeProblem, ProblemError> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(ProblemError::InvalidParameter(format!(
            "reaction coefficient must be > 0, got {rho}"
        )));
    }
    Ok(PdeProblem {
        benchmark: Benchmark::Reaction { rho },
        domain: BoxDomain::cube(1, 0.0, 2.0 * PI),
        horizon: 1.0,
        boundary: BoundaryKind::PeriodicValue,
        reference: None,
    })
}

/// Linear heat `u_t − Δu = Q` on `(0,1)²`, exact `u = 2 + sin(30πt + πxy)`.
pub fn make_heat2d_hf() -> PdeProblem {
    PdeProblem {
        benchmark: Benchmark::Heat2dHighFrequency,
        domain: BoxDomain::cube(2, 0.0, 1.0),
        horizon: 1.0,
        boundary: BoundaryKind::Dirichlet,
        reference: None,
    }
}

/// Nonlinear heat `u_t − ∇·(u^l ∇u) = Q` on `(0,1)`,
/// exact `u = 1 + 2 sin(π(2t + x))`, `l ∈ {0, …, 4}`.
pub fn make_heat1d_nl(l: u32) -> Result<PdeProblem, ProblemError> {
    if l > 4 {
        return Err(ProblemError::InvalidParameter(format!(
            "nonlinearity exponent l must be in 0..=4, got {l}"
        )));
    }
    Ok(PdeProblem {
        benchmark: Benchmark::Heat1dNonlinear { l },
        domain: BoxDomain::cube(1, 0.0, 1.0),
        horizon: 1.0,
        boundary: BoundaryKind::Dirichlet,
        reference: None,
    })
}

/// Allen-Cahn `u_t − 10⁻⁴ u_xx + 5u³ − 5u = 0` on `(−1, 1)` with periodic
/// value and slope, scored against a reference grid read from `path`.
pub fn make_allen_cahn(path: impl AsRef<Path>) -> Result<PdeProblem, ProblemError> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(ProblemError::MissingReference(path.to_path_buf()));
    }
    let grid = read_reference_grid(std::fs::File::open(path)?)?;
    Ok(make_allen_cahn_with(Arc::new(grid)))
}

pub fn make_allen_cahn_with(reference: Arc<ReferenceGrid>) -> PdeProblem {
    PdeProblem {
        reference: Some(reference),
        ..make_allen_cahn_unscored()
    }
}

/// Allen-Cahn without a reference grid: trainable, but test sets cannot be
/// built for it.
pub fn make_allen_cahn_unscored() -> PdeProblem {
    PdeProblem {
        benchmark: Benchmark::AllenCahn,
        domain: BoxDomain::cube(1, -1.0, 1.0),
        horizon: 1.0,
        boundary: BoundaryKind::PeriodicValueAndSlope,
        reference: None,
    }
}

/// Convection `u_t + βu_x = 0` on `(0, 2π)`, exact `u = sin(x − βt)`.
pub fn make_convection(beta: Real) -> Result<PdeProblem, ProblemError> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(ProblemError::InvalidParameter(format!(
            "convection coefficient must be > 0, got {beta}"
        )));
    }
    Ok(PdeProblem {
        benchmark: Benchmark::Convection { beta },
        domain: BoxDomain::cube(1, 0.0, 2.0 * PI),
        horizon: 1.0,
        boundary: BoundaryKind::PeriodicValue,
        reference: None,
    })
}

fn reaction_h(x: Real) -> Real {
    (-(x - PI).powi(2) / (PI * PI)).exp()
}

impl PdeProblem {
    pub fn benchmark(&self) -> Benchmark {
        self.benchmark
    }

    pub fn name(&self) -> &'static str {
        match self.benchmark {
            Benchmark::Heat3d => "heat3d",
            Benchmark::Reaction { .. } => "reaction",
            Benchmark::Heat2dHighFrequency => "heat2d_hf",
            Benchmark::Heat1dNonlinear { .. } => "heat1d_nl",
            Benchmark::AllenCahn => "allen_cahn",
            Benchmark::Convection { .. } => "convection",
        }
    }

    /// The benchmark's scalar parameter (ρ, l or β), if it has one.
    pub fn parameter(&self) -> Option<Real> {
        match self.benchmark {
            Benchmark::Reaction { rho } => Some(rho),
            Benchmark::Heat1dNonlinear { l } => Some(l as Real),
            Benchmark::Convection { beta } => Some(beta),
            _ => None,
        }
    }

    pub fn spatial_dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn horizon(&self) -> Real {
        self.horizon
    }

    pub fn boundary_kind(&self) -> BoundaryKind {
        self.boundary
    }

    pub fn reference_grid(&self) -> Option<&Arc<ReferenceGrid>> {
        self.reference.as_ref()
    }

    /// Input derivatives the residual reads.
    pub fn residual_order(&self) -> JetOrder {
        match self.benchmark {
            Benchmark::Reaction { .. } | Benchmark::Convection { .. } => JetOrder::First,
            _ => JetOrder::Second,
        }
    }

    /// Derivatives the boundary term reads.
    pub fn boundary_order(&self) -> JetOrder {
        match self.boundary {
            BoundaryKind::PeriodicValueAndSlope => JetOrder::First,
            _ => JetOrder::Value,
        }
    }

    /// `u_t + N[u]` evaluated from the jet of `u` at `point = (X, t)`.
    pub fn residual<S: JetScalar>(&self, u: &Jet<S>, point: &[Real]) -> S {
        let d = self.spatial_dim();
        let t = point[d];
        let v = &u.value;
        let ut = u.first[d].clone();
        match self.benchmark {
            Benchmark::Heat3d => {
                let (x, y, z) = (point[0], point[1], point[2]);
                let lap = u.second[0].clone() + u.second[1].clone() + u.second[2].clone();
                let grad2 = u.first[0].square() + u.first[1].square() + u.first[2].square();
                ut - (v.clone() * lap + grad2) - heat3d_source(x, y, z, t)
            }
            Benchmark::Reaction { rho } => ut - (v.clone() - v.square()) * rho,
            Benchmark::Heat2dHighFrequency => {
                let (x, y) = (point[0], point[1]);
                ut - (u.second[0].clone() + u.second[1].clone()) - heat2d_source(x, y, t)
            }
            Benchmark::Heat1dNonlinear { l } => {
                let x = point[0];
                let ux = u.first[0].clone();
                let uxx = u.second[0].clone();
                let diffusion = if l == 0 {
                    uxx
                } else {
                    v.powi(l as i32 - 1) * ux.square() * l as Real + v.powi(l as i32) * uxx
                };
                ut - diffusion - heat1d_source(l, x, t)
            }
            Benchmark::AllenCahn => ut - u.second[0].clone() * AC_DIFFUSION + (v.powi(3) - v.clone()) * AC_REACTION,
            Benchmark::Convection { beta } => ut + u.first[0].clone() * beta,
        }
    }

    /// `I(X)`.
    pub fn initial(&self, x: &[Real]) -> Real {
        match self.benchmark {
            Benchmark::Heat3d => 2.0 + (PI * x[0] * x[1] * x[2]).sin(),
            Benchmark::Reaction { .. } => reaction_h(x[0]),
            Benchmark::Heat2dHighFrequency => 2.0 + (PI * x[0] * x[1]).sin(),
            Benchmark::Heat1dNonlinear { .. } => 1.0 + 2.0 * (PI * x[0]).sin(),
            Benchmark::AllenCahn => x[0] * x[0] * (PI * x[0]).cos(),
            Benchmark::Convection { .. } => x[0].sin(),
        }
    }

    /// Dirichlet data `B(X, t)` for a point lying on a face of `Ω`; `None`
    /// for periodic problems or interior points.
    pub fn boundary_value(&self, x: &[Real], t: Real) -> Option<Real> {
        if self.boundary != BoundaryKind::Dirichlet {
            return None;
        }
        let (face, upper) = self.face_of(x)?;
        let v = match self.benchmark {
            Benchmark::Heat3d => {
                let phase = 5.0 * PI * t;
                if !upper {
                    2.0 + phase.sin()
                } else {
                    let others: Real = (0..3).filter(|&j| j != face).map(|j| x[j]).product();
                    2.0 + (phase + PI * others).sin()
                }
            }
            Benchmark::Heat2dHighFrequency => {
                let phase = 30.0 * PI * t;
                if !upper {
                    2.0 + phase.sin()
                } else {
                    2.0 + (phase + PI * x[1 - face]).sin()
                }
            }
            Benchmark::Heat1dNonlinear { .. } => {
                let phase = 2.0 * PI * t;
                if !upper {
                    1.0 + 2.0 * phase.sin()
                } else {
                    1.0 + 2.0 * (phase + PI).sin()
                }
            }
            _ => return None,
        };
        Some(v)
    }

    fn face_of(&self, x: &[Real]) -> Option<(usize, bool)> {
        (0..self.spatial_dim()).find_map(|j| {
            if x[j] == self.domain.lo[j] {
                Some((j, false))
            } else if x[j] == self.domain.hi[j] {
                Some((j, true))
            } else {
                None
            }
        })
    }

    /// Closed-form solution, where one exists.
    pub fn exact(&self, point: &[Real]) -> Option<Real> {
        let d = self.spatial_dim();
        let t = point[d];
        let v = match self.benchmark {
            Benchmark::Heat3d => 2.0 + (5.0 * PI * t + PI * point[0] * point[1] * point[2]).sin(),
            Benchmark::Reaction { rho } => {
                let h = reaction_h(point[0]);
                let g = h * (rho * t).exp();
                g / (g + 1.0 - h)
            }
            Benchmark::Heat2dHighFrequency => 2.0 + (30.0 * PI * t + PI * point[0] * point[1]).sin(),
            Benchmark::Heat1dNonlinear { .. } => 1.0 + 2.0 * (PI * (2.0 * t + point[0])).sin(),
            Benchmark::AllenCahn => return None,
            Benchmark::Convection { beta } => (point[0] - beta * t).sin(),
        };
        Some(v)
    }

    /// Exact solution, or the interpolated reference grid.
    pub fn reference(&self, point: &[Real]) -> Option<Real> {
        self.exact(point).or_else(|| {
            self.reference
                .as_ref()
                .map(|g| g.interpolate(point[0] as f64, point[1] as f64) as Real)
        })
    }

    pub fn has_reference(&self) -> bool {
        self.exact_available() || self.reference.is_some()
    }

    pub fn exact_available(&self) -> bool {
        !matches!(self.benchmark, Benchmark::AllenCahn)
    }

    /// Jet of the exact solution at `point`, computed by differentiating
    /// the closed form with jets. Used to check residuals and source terms.
    pub fn exact_jet(&self, point: &[Real]) -> Option<crate::autodiff::InputJet> {
        if !self.exact_available() {
            return None;
        }
        let d = self.spatial_dim();
        let benchmark = self.benchmark;
        crate::autodiff::jet_eval(
            |c| match benchmark {
                Benchmark::Heat3d => {
                    let arg = c[3].clone() * (5.0 * PI) + c[0].clone() * c[1].clone() * c[2].clone() * PI;
                    arg.sin() + 2.0
                }
                Benchmark::Reaction { rho } => {
                    let q = (c[0].clone() - PI) * (1.0 / PI);
                    let h = (q.clone() * q * -1.0).exp();
                    let g = h.clone() * (c[1].clone() * rho).exp();
                    g.clone() / (g - h + 1.0)
                }
                Benchmark::Heat2dHighFrequency => {
                    let arg = c[2].clone() * (30.0 * PI) + c[0].clone() * c[1].clone() * PI;
                    arg.sin() + 2.0
                }
                Benchmark::Heat1dNonlinear { .. } => {
                    let arg = (c[1].clone() * 2.0 + c[0].clone()) * PI;
                    arg.sin() * 2.0 + 1.0
                }
                Benchmark::Convection { beta } => (c[0].clone() - c[1].clone() * beta).sin(),
                Benchmark::AllenCahn => unreachable!(),
            },
            point,
            d,
        )
        .ok()
    }
}

fn heat3d_source(x: Real, y: Real, z: Real, t: Real) -> Real {
    let phi = 5.0 * PI * t + PI * x * y * z;
    let s = x * x * y * y + x * x * z * z + y * y * z * z;
    5.0 * PI * phi.cos() - PI * PI * s * ((10.0 * PI * t + 2.0 * PI * x * y * z).cos() - 2.0 * phi.sin())
}

fn heat2d_source(x: Real, y: Real, t: Real) -> Real {
    let phi = 30.0 * PI * t + PI * x * y;
    30.0 * PI * phi.cos() + PI * PI * (x * x + y * y) * phi.sin()
}

fn heat1d_source(l: u32, x: Real, t: Real) -> Real {
    let phi = PI * (2.0 * t + x);
    let u = 1.0 + 2.0 * phi.sin();
    let ux = 2.0 * PI * phi.cos();
    let uxx = -2.0 * PI * PI * phi.sin();
    let ut = 4.0 * PI * phi.cos();
    let diffusion = if l == 0 {
        uxx
    } else {
        l as Real * u.powi(l as i32 - 1) * ux * ux + u.powi(l as i32) * uxx
    };
    ut - diffusion
}
