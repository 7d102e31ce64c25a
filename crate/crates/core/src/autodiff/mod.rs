//! Differentiation engine.
//!
//! Input derivatives come from forward-mode [`Jet`]s (value, all first
//! partials, diagonal spatial second partials). Parameter gradients come from
//! the reverse-mode [`Tape`]. Running jets with [`Var`] coefficients records
//! the jet arithmetic itself, so a loss built from input derivatives can be
//! differentiated with respect to the parameters in one reverse sweep.
//!
//! The training loop uses the batched network kernels in
//! [`crate::network::batch`]; this module is the general scalar route those
//! kernels are checked against.

mod jet;
mod scalar;
mod tape;

pub use jet::{InputJet, Jet};
pub use scalar::JetScalar;
pub use tape::{Op, Tape, Var};

use crate::Real;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AutodiffError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("non-finite value produced at tape node {node} ({op:?})")]
    NonFinite { node: usize, op: Op },
    #[error("point has {actual} coordinates, expected {expected}")]
    Dimension { expected: usize, actual: usize },
}

/// Evaluates a function composed of jet operations at `point`, returning its
/// value, first partials and spatial second partials.
///
/// `point` holds the `spatial_dim` spatial coordinates followed by time. A
/// non-finite result from finite inputs (division by zero, fractional power
/// of a negative base) is reported as a domain error.
pub fn jet_eval<F>(f: F, point: &[Real], spatial_dim: usize) -> Result<InputJet, AutodiffError>
where
    F: FnOnce(&[InputJet]) -> InputJet,
{
    if point.len() != spatial_dim + 1 {
        return Err(AutodiffError::Dimension {
            expected: spatial_dim + 1,
            actual: point.len(),
        });
    }
    if let Some(bad) = point.iter().find(|v| !v.is_finite()) {
        return Err(AutodiffError::Domain(format!("non-finite input coordinate {bad}")));
    }
    let inputs: Vec<InputJet> = point
        .iter()
        .enumerate()
        .map(|(k, &v)| Jet::coordinate(v, k, spatial_dim))
        .collect();
    let out = f(&inputs);
    if out.is_finite() {
        Ok(out)
    } else {
        Err(AutodiffError::Domain(
            "operation undefined at this point (division by zero or invalid power)".into(),
        ))
    }
}

/// Gradient of the recorded scalar `loss` with respect to `params`.
///
/// Any input-derivative terms that entered `loss` through `Jet<Var>`
/// arithmetic are differentiated as well.
pub fn loss_grad(tape: &Tape, loss: Var<'_>, params: &[Var<'_>]) -> Result<Vec<Real>, AutodiffError> {
    let adj = tape.adjoints(loss)?;
    Ok(params
        .iter()
        .map(|p| adj.get(p.index()).copied().unwrap_or(0.0))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tanh_at_origin() {
        let j = jet_eval(|x| x[0].tanh(), &[0.0, 0.0], 1).unwrap();
        assert_eq!(j.value, 0.0);
        assert_eq!(j.first[0], 1.0);
        assert_eq!(j.second[0], 0.0);
    }

    #[test]
    fn polynomial_x2_t() {
        let j = jet_eval(|v| v[0].clone() * v[0].clone() * v[1].clone(), &[3.0, 2.0], 1).unwrap();
        assert_eq!(j.value, 18.0);
        assert_eq!(j.first[0], 12.0);
        assert_eq!(j.first[1], 9.0);
        assert_eq!(j.second[0], 4.0);
    }

    #[test]
    fn division_by_zero_is_domain_error() {
        let r = jet_eval(|v| Jet::constant(1.0, 1) / v[0].clone(), &[0.0, 1.0], 1);
        assert!(matches!(r, Err(AutodiffError::Domain(_))));
    }

    #[test]
    fn fractional_power_of_negative_base_is_domain_error() {
        let r = jet_eval(|v| v[0].powf(0.5), &[-1.0, 1.0], 1);
        assert!(matches!(r, Err(AutodiffError::Domain(_))));
    }

    #[test]
    fn wrong_point_length() {
        let r = jet_eval(|v| v[0].clone(), &[1.0, 2.0, 3.0], 1);
        assert_eq!(r, Err(AutodiffError::Dimension { expected: 2, actual: 3 }));
    }

    #[test]
    fn quadratic_loss_gradient() {
        let tape = Tape::new();
        let theta = tape.vars(&[0.5, -1.25, 3.0]);
        let mut loss = theta[0].square();
        for p in &theta[1..] {
            loss = loss + p.square();
        }
        let g = loss_grad(&tape, loss, &theta).unwrap();
        assert_eq!(g, vec![1.0, -2.5, 6.0]);
    }

    #[test]
    fn jet_on_tape_differentiates_input_derivative() {
        // L = (d/dx sin(a x))^2 = a^2 cos^2(a x); dL/da = 2a cos^2 - 2a^2 x cos sin
        let tape = Tape::new();
        let a = tape.var(0.7);
        let x = Jet::coordinate(tape.constant(1.3), 0, 1);
        let ax = x.scale(&a);
        let u = ax.sin();
        let loss = u.first[0].square();
        let g = loss_grad(&tape, loss, &[a]).unwrap()[0];
        let (av, xv): (Real, Real) = (0.7, 1.3);
        let c = (av * xv).cos();
        let s = (av * xv).sin();
        let want = 2.0 * av * c * c - 2.0 * av * av * xv * c * s;
        assert!((g - want).abs() < 1e-12, "{g} vs {want}");
    }
}
