//! Error norms over a fixed random test set.

use ndarray::Array2;

use crate::network::NetworkParams;
use crate::problems::PdeProblem;
use crate::sampling::{sample_interior, sample_rng};
use crate::Real;

/// Default test-set size.
pub const TEST_SET_SIZE: usize = 10_000;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricsError {
    #[error("prediction and reference lengths differ ({pred} vs {reference})")]
    Length { pred: usize, reference: usize },
    #[error("reference vector has zero norm")]
    ZeroReference,
    #[error("problem `{0}` has neither an exact solution nor a reference grid")]
    NoReference(&'static str),
}

fn check(pred: &[Real], reference: &[Real]) -> Result<(), MetricsError> {
    if pred.len() != reference.len() {
        return Err(MetricsError::Length {
            pred: pred.len(),
            reference: reference.len(),
        });
    }
    Ok(())
}

/// `‖pred − ref‖₂ / ‖ref‖₂`, accumulated in f64.
pub fn l2_relative(pred: &[Real], reference: &[Real]) -> Result<Real, MetricsError> {
    check(pred, reference)?;
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for (p, r) in pred.iter().zip(reference) {
        let e = (*p as f64) - (*r as f64);
        num += e * e;
        den += (*r as f64) * (*r as f64);
    }
    if den == 0.0 {
        return Err(MetricsError::ZeroReference);
    }
    Ok((num.sqrt() / den.sqrt()) as Real)
}

/// Mean absolute error; 0 for empty input.
pub fn l1_abs(pred: &[Real], reference: &[Real]) -> Result<Real, MetricsError> {
    check(pred, reference)?;
    if pred.is_empty() {
        return Ok(0.0);
    }
    let s: f64 = pred
        .iter()
        .zip(reference)
        .map(|(p, r)| ((*p as f64) - (*r as f64)).abs())
        .sum();
    Ok((s / pred.len() as f64) as Real)
}

/// Max absolute error; 0 for empty input.
pub fn linf_abs(pred: &[Real], reference: &[Real]) -> Result<Real, MetricsError> {
    check(pred, reference)?;
    Ok(pred
        .iter()
        .zip(reference)
        .map(|(p, r)| (p - r).abs())
        .fold(0.0, Real::max))
}

/// Points on `Ω × (0, T]` with reference values.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSet {
    pub points: Array2<Real>,
    pub reference: Vec<Real>,
    pub seed: u64,
}

impl TestSet {
    pub fn len(&self) -> usize {
        self.reference.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reference.is_empty()
    }

    pub fn score(&self, params: &NetworkParams) -> Result<Scores, MetricsError> {
        let pred = params
            .predict(self.points.view())
            .expect("test points match the network input dimension");
        Ok(Scores {
            l2_rel: l2_relative(&pred, &self.reference)?,
            l1_abs: l1_abs(&pred, &self.reference)?,
            linf_abs: linf_abs(&pred, &self.reference)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub l2_rel: Real,
    pub l1_abs: Real,
    pub linf_abs: Real,
}

/// `n` uniform points on `Ω × (0, T]` with exact or interpolated reference
/// values.
pub fn make_test_set(problem: &PdeProblem, n: usize, seed: u64) -> Result<TestSet, MetricsError> {
    make_test_set_until(problem, problem.horizon(), n, seed)
}

/// As [`make_test_set`] on the truncated domain `Ω × (0, t_max]`.
pub fn make_test_set_until(problem: &PdeProblem, t_max: Real, n: usize, seed: u64) -> Result<TestSet, MetricsError> {
    if !problem.has_reference() {
        return Err(MetricsError::NoReference(problem.name()));
    }
    let mut rng = sample_rng(seed);
    let points = sample_interior(problem, t_max, n, &mut rng);
    let reference = points
        .rows()
        .into_iter()
        .map(|r| {
            problem
                .reference(r.as_slice().expect("standard layout"))
                .expect("reference available")
        })
        .collect();
    Ok(TestSet {
        points,
        reference,
        seed,
    })
}

/// Fixed test-set seed per benchmark, disjoint from training seeds (which
/// go through [`crate::derive_seed`]).
pub fn default_test_seed(problem: &PdeProblem) -> u64 {
    let tag: u64 = problem.name().bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    });
    tag ^ 0x7e57_5e70
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{ac_reference_oracle, make_allen_cahn_with, make_reaction, AcOracleSettings};
    use proptest::prelude::*;
    use std::sync::Arc;

    #[test]
    fn identities_and_arithmetic() {
        let r = vec![2.0; 7];
        assert_eq!(l2_relative(&r, &r).unwrap(), 0.0);
        let p = vec![2.2; 7];
        assert!((l2_relative(&p, &r).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(l1_abs(&r, &r).unwrap(), 0.0);
        assert_eq!(linf_abs(&r, &r).unwrap(), 0.0);
        let (p, r) = ([1.1, 2.3], [1.0, 2.0]);
        assert!((l1_abs(&p, &r).unwrap() - 0.2).abs() < 1e-12);
        assert!((linf_abs(&p, &r).unwrap() - 0.3).abs() < 1e-12);
        assert_eq!(l2_relative(&[1.0], &[0.0]), Err(MetricsError::ZeroReference));
        assert!(matches!(l1_abs(&[1.0], &[]), Err(MetricsError::Length { .. })));
    }

    proptest! {
        #[test]
        fn matches_direct_formulas(v in proptest::collection::vec((-5.0f64..5.0, 0.1f64..5.0), 1..100)) {
            let pred: Vec<Real> = v.iter().map(|x| x.0 as Real).collect();
            let reference: Vec<Real> = v.iter().map(|x| x.1 as Real).collect();
            let n = pred.len() as f64;
            let mut num = 0.0;
            let mut den = 0.0;
            let mut l1 = 0.0;
            let mut linf: f64 = 0.0;
            for (p, r) in pred.iter().zip(&reference) {
                let e = (*p - *r) as f64;
                num += e * e;
                den += (*r as f64).powi(2);
                l1 += e.abs();
                linf = linf.max(e.abs());
            }
            prop_assert!(((l2_relative(&pred, &reference).unwrap() as f64) - (num / den).sqrt()).abs() < 1e-12);
            prop_assert!(((l1_abs(&pred, &reference).unwrap() as f64) - l1 / n).abs() < 1e-12);
            prop_assert!(((linf_abs(&pred, &reference).unwrap() as f64) - linf).abs() < 1e-12);
        }

        #[test]
        fn l2_is_permutation_invariant(v in proptest::collection::vec((-5.0f64..5.0, 0.1f64..5.0), 2..50), k in 0usize..50) {
            let pred: Vec<Real> = v.iter().map(|x| x.0 as Real).collect();
            let reference: Vec<Real> = v.iter().map(|x| x.1 as Real).collect();
            let k = k % pred.len();
            let mut p2 = pred.clone();
            let mut r2 = reference.clone();
            p2.rotate_left(k);
            r2.rotate_left(k);
            let a = l2_relative(&pred, &reference).unwrap();
            let b = l2_relative(&p2, &r2).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        }
    }

    #[test]
    fn test_set_references() {
        let p = make_reaction(20.0).unwrap();
        let ts = make_test_set(&p, 100, 1).unwrap();
        assert_eq!(ts.len(), 100);
        for (r, v) in ts.points.rows().into_iter().zip(&ts.reference) {
            assert!(r[1] > 0.0 && r[1] <= 1.0);
            assert_eq!(*v, p.exact(r.as_slice().unwrap()).unwrap());
        }
        assert!(make_test_set(&p, 0, 1).unwrap().is_empty());
        assert_eq!(make_test_set(&p, 50, 3).unwrap(), make_test_set(&p, 50, 3).unwrap());
        assert!(make_test_set(&crate::problems::make_allen_cahn_unscored(), 5, 1).is_err());
    }

    #[test]
    fn allen_cahn_node_values() {
        let report = ac_reference_oracle(AcOracleSettings {
            nx: 256,
            nt: 101,
            max_dt: 1e-3,
        })
        .unwrap();
        let grid = Arc::new(report.grid);
        let p = make_allen_cahn_with(grid.clone());
        for (i, j) in [(3, 7), (100, 50), (255, 100)] {
            let pt = [grid.x[i] as Real, grid.t[j] as Real];
            assert_eq!(p.reference(&pt).unwrap(), grid.at(i, j) as Real);
        }
        assert_eq!(p.reference(&[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn seeds_differ_per_benchmark() {
        let a = default_test_seed(&make_reaction(5.0).unwrap());
        let b = default_test_seed(&crate::problems::make_heat3d());
        assert_ne!(a, b);
    }
}
