//! Physics-informed neural networks for time-evolution PDEs.
//!
//! The crate trains a network `u_θ(X, t)` so that `u_t + N[u] = 0` holds on
//! `Ω × (0, T]` together with initial and boundary data. Besides the plain
//! PINN loop it implements pre-training on nested time intervals
//! `(0, T₁] ⊂ … ⊂ (0, T]`, where each stage is initialized from the previous
//! stage's parameters and supervised by labels the previous network produces,
//! partial resampling of residual points during the Adam phase, and the
//! Adam → L-BFGS optimizer hand-off.
//!
//! Module map:
//!
//! * [`autodiff`]: scalar reverse-mode tape and second-order input jets.
//! * [`network`]: tanh MLP / residual network, Xavier init, batched jet
//!   propagation with a hand-derived reverse pass, checkpoints.
//! * [`problems`]: the PDE abstraction and the six benchmark problems, plus
//!   the pseudo-spectral Allen-Cahn reference solver.
//! * [`sampling`]: training point sets and residual resampling.
//! * [`optimizers`]: Adam with step decay, L-BFGS with strong-Wolfe search.
//! * [`training`]: loss assembly and the pre-training pipeline.
//! * [`metrics`]: error norms and test sets.
//! * [`cli`]: config-driven experiment runner used by the `ptpinn` binary.

// `as Real` casts are no-ops in the default f64 build only.
#![allow(clippy::unnecessary_cast)]
// `!(x > 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod cli;
pub mod metrics;
pub mod network;
pub mod optimizers;
pub mod problems;
pub mod sampling;
pub mod training;

/// Working precision of the network, the tape and the optimizers.
#[cfg(not(feature = "f32"))]
pub type Real = f64;
/// Working precision of the network, the tape and the optimizers.
#[cfg(feature = "f32")]
pub type Real = f32;

/// Name of the compiled working precision, as accepted by `precision = ...`
/// in experiment configs.
pub const PRECISION: &str = if cfg!(feature = "f32") { "f32" } else { "f64" };

/// Mathematical constants at working precision.
pub mod consts {
    use crate::Real;

    pub const PI: Real = std::f64::consts::PI as Real;
}

/// Mixes a base seed with a stream tag (splitmix64 finalizer) so that every
/// random consumer of a run gets an independent, reproducible stream.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
