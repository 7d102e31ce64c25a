//! Loss assembly on the batched engine, plus a slow scalar-tape reference.

use ndarray::{Array2, ArrayView2};

use crate::autodiff::{Jet, JetScalar, Tape, Var};
use crate::network::{batch, forward_jets, JetOrder, NetworkParams, NetworkSpec, ParamView};
use crate::optimizers::{Evaluation, LossComponents, Objective, OptimError};
use crate::problems::{BoundaryKind, PdeProblem};
use crate::sampling::{BoundarySet, SupervisedSet, TrainingData};
use crate::Real;

/// Term weights `w_i, w_b, w_r, w_sp`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub initial: Real,
    pub boundary: Real,
    pub residual: Real,
    pub supervised: Real,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            initial: 1.0,
            boundary: 1.0,
            residual: 1.0,
            supervised: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), String> {
        let all = [self.initial, self.boundary, self.residual, self.supervised];
        if all.iter().all(|w| *w >= 0.0 && w.is_finite()) {
            Ok(())
        } else {
            Err(format!("loss weights must be finite and >= 0, got {all:?}"))
        }
    }

    pub fn total(&self, c: &LossComponents) -> Real {
        self.initial * c.initial
            + self.boundary * c.boundary
            + self.residual * c.residual
            + self.supervised * c.supervised
    }
}

/// Everything needed to evaluate the loss of one stage.
pub struct LossContext<'a> {
    pub problem: &'a PdeProblem,
    pub data: &'a TrainingData,
    /// `None` for the plain PINN loss.
    pub supervised: Option<&'a SupervisedSet>,
    pub weights: LossWeights,
}

fn non_finite(name: &str) -> OptimError {
    OptimError::NonFiniteLoss(name.to_string())
}

fn checked(name: &str, v: Real) -> Result<Real, OptimError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(non_finite(name))
    }
}

/// Mean squared misfit of network values against labels; accumulates the
/// weighted gradient when `grad` is given.
fn fit_term(
    params: ParamView<'_>,
    points: ArrayView2<'_, Real>,
    labels: &[Real],
    weight: Real,
    name: &str,
    grad: Option<&mut [Real]>,
) -> Result<Real, OptimError> {
    let n = labels.len();
    if n == 0 {
        return Ok(0.0);
    }
    let (out, tape) = match grad {
        Some(_) => {
            let (o, t) = batch::forward(params, points, JetOrder::Value);
            (o, Some(t))
        }
        None => (batch::evaluate(params, points, JetOrder::Value), None),
    };
    let r: Vec<Real> = out.value().iter().zip(labels).map(|(u, y)| u - y).collect();
    let loss = checked(name, r.iter().map(|v| v * v).sum::<Real>() / n as Real)?;
    if let (Some(g), Some(tape)) = (grad, tape) {
        let scale = 2.0 * weight / n as Real;
        let go: Vec<Real> = r.iter().map(|v| scale * v).collect();
        batch::backward(params, tape, &go, g);
    }
    Ok(loss)
}

/// Rows `(lo, t)` followed by rows `(hi, t)`.
fn periodic_pairs(problem: &PdeProblem, times: &[Real]) -> Array2<Real> {
    let n = times.len();
    let (lo, hi) = (problem.domain().lo[0], problem.domain().hi[0]);
    let mut pts = Array2::zeros((2 * n, 2));
    for (i, &t) in times.iter().enumerate() {
        pts[[i, 0]] = lo;
        pts[[i, 1]] = t;
        pts[[n + i, 0]] = hi;
        pts[[n + i, 1]] = t;
    }
    pts
}

fn periodic_term(
    params: ParamView<'_>,
    problem: &PdeProblem,
    times: &[Real],
    weight: Real,
    grad: Option<&mut [Real]>,
) -> Result<Real, OptimError> {
    let n = times.len();
    if n == 0 {
        return Ok(0.0);
    }
    let order = problem.boundary_order();
    let with_slope = problem.boundary_kind() == BoundaryKind::PeriodicValueAndSlope;
    let pts = periodic_pairs(problem, times);
    let (out, tape) = match grad {
        Some(_) => {
            let (o, t) = batch::forward(params, pts.view(), order);
            (o, Some(t))
        }
        None => (batch::evaluate(params, pts.view(), order), None),
    };
    let diff = |ch: ndarray::ArrayView1<'_, Real>| -> Vec<Real> { (0..n).map(|i| ch[n + i] - ch[i]).collect() };
    let dv = diff(out.value());
    let mut loss = dv.iter().map(|v| v * v).sum::<Real>() / n as Real;
    let dx = with_slope.then(|| diff(out.first(0)));
    if let Some(dx) = &dx {
        loss += dx.iter().map(|v| v * v).sum::<Real>() / n as Real;
    }
    let loss = checked("boundary", loss)?;
    if let (Some(g), Some(tape)) = (grad, tape) {
        let c = order.channels(problem.spatial_dim());
        let m = 2 * n;
        let mut go = vec![0.0; c * m];
        let scale = 2.0 * weight / n as Real;
        for i in 0..n {
            go[i] = -scale * dv[i];
            go[n + i] = scale * dv[i];
        }
        if let Some(dx) = &dx {
            // first spatial partial is channel 1
            for i in 0..n {
                go[m + i] = -scale * dx[i];
                go[m + n + i] = scale * dx[i];
            }
        }
        batch::backward(params, tape, &go, g);
    }
    Ok(loss)
}

fn residual_term(
    params: ParamView<'_>,
    problem: &PdeProblem,
    points: ArrayView2<'_, Real>,
    weight: Real,
    grad: Option<&mut [Real]>,
) -> Result<Real, OptimError> {
    let n = points.nrows();
    if n == 0 {
        return Ok(0.0);
    }
    let d = problem.spatial_dim();
    let order = problem.residual_order();
    let c = order.channels(d);
    let Some(g) = grad else {
        let out = batch::evaluate(params, points, order);
        let mut sum = 0.0;
        for (i, row) in points.rows().into_iter().enumerate() {
            let r = problem.residual(&out.jet(i), row.as_slice().expect("standard layout"));
            sum += r * r;
        }
        return checked("residual", sum / n as Real);
    };
    let (out, tape) = batch::forward(params, points, order);
    let mut go = vec![0.0; c * n];
    let scale = 2.0 * weight / n as Real;
    let mut sum = 0.0;
    let mut scratch = Tape::with_capacity(64);
    for (i, row) in points.rows().into_iter().enumerate() {
        scratch.reset();
        let chans: Vec<Var<'_>> = (0..c).map(|k| scratch.var(out.channel(k)[i])).collect();
        let zero = scratch.constant(0.0);
        let jet = Jet {
            value: chans[0],
            first: (0..=d).map(|k| chans.get(1 + k).copied().unwrap_or(zero)).collect(),
            second: (0..d).map(|j| chans.get(d + 2 + j).copied().unwrap_or(zero)).collect(),
        };
        let r = problem.residual(&jet, row.as_slice().expect("standard layout"));
        let rv = r.value();
        sum += rv * rv;
        let adj = scratch.adjoints(r).map_err(|_| non_finite("residual"))?;
        for (k, v) in chans.iter().enumerate() {
            go[k * n + i] = scale * rv * adj[v.index()];
        }
    }
    let loss = checked("residual", sum / n as Real)?;
    batch::backward(params, tape, &go, g);
    Ok(loss)
}

/// Loss components, weighted total and (optionally) gradient at `values`.
pub fn evaluate_loss(
    ctx: &LossContext<'_>,
    spec: &NetworkSpec,
    values: &[Real],
    with_grad: bool,
) -> Result<Evaluation, OptimError> {
    let params = ParamView::new(spec, values).map_err(|e| OptimError::Objective(e.to_string()))?;
    let w = ctx.weights;
    let mut grad = with_grad.then(|| vec![0.0; values.len()]);
    let data = ctx.data;
    let mut c = LossComponents {
        initial: fit_term(
            params,
            data.initial.view(),
            &data.initial_values,
            w.initial,
            "initial",
            grad.as_deref_mut(),
        )?,
        ..Default::default()
    };
    c.boundary = match &data.boundary {
        BoundarySet::Dirichlet { points, values } => fit_term(
            params,
            points.view(),
            values,
            w.boundary,
            "boundary",
            grad.as_deref_mut(),
        )?,
        BoundarySet::Periodic { times } => periodic_term(params, ctx.problem, times, w.boundary, grad.as_deref_mut())?,
    };
    c.residual = residual_term(
        params,
        ctx.problem,
        data.residual.view(),
        w.residual,
        grad.as_deref_mut(),
    )?;
    if let Some(sp) = ctx.supervised {
        c.supervised = fit_term(
            params,
            sp.points.view(),
            &sp.values,
            w.supervised,
            "supervised",
            grad.as_deref_mut(),
        )?;
    }
    let total = checked("total", w.total(&c))?;
    Ok(Evaluation {
        loss: total,
        grad: grad.unwrap_or_default(),
        components: c,
    })
}

/// `w_i L_i + w_b L_b + w_r L_r` with its components.
pub fn pinn_loss(
    params: &NetworkParams,
    data: &TrainingData,
    weights: LossWeights,
    problem: &PdeProblem,
) -> Result<(Real, LossComponents), OptimError> {
    let ctx = LossContext {
        problem,
        data,
        supervised: None,
        weights,
    };
    let e = evaluate_loss(&ctx, params.spec(), params.values(), false)?;
    Ok((e.loss, e.components))
}

/// [`pinn_loss`] plus `w_sp L_sp` over `supervised`.
pub fn augmented_loss(
    params: &NetworkParams,
    data: &TrainingData,
    weights: LossWeights,
    problem: &PdeProblem,
    supervised: &SupervisedSet,
) -> Result<(Real, LossComponents), OptimError> {
    let ctx = LossContext {
        problem,
        data,
        supervised: Some(supervised),
        weights,
    };
    let e = evaluate_loss(&ctx, params.spec(), params.values(), false)?;
    Ok((e.loss, e.components))
}

/// The stage objective: owns its data so resampling can mutate it between
/// Adam steps. The supervised set is `data.supervised`.
pub struct PinnObjective<'a> {
    pub problem: &'a PdeProblem,
    pub spec: &'a NetworkSpec,
    pub data: TrainingData,
    pub weights: LossWeights,
    pub evaluations: usize,
}

impl<'a> PinnObjective<'a> {
    pub fn new(problem: &'a PdeProblem, spec: &'a NetworkSpec, data: TrainingData, weights: LossWeights) -> Self {
        Self {
            problem,
            spec,
            data,
            weights,
            evaluations: 0,
        }
    }
}

impl Objective for PinnObjective<'_> {
    fn evaluate(&mut self, params: &[Real]) -> Result<Evaluation, OptimError> {
        self.evaluations += 1;
        let ctx = LossContext {
            problem: self.problem,
            data: &self.data,
            supervised: (!self.data.supervised.is_empty()).then_some(&self.data.supervised),
            weights: self.weights,
        };
        evaluate_loss(&ctx, self.spec, params, true)
    }
}

fn mean_sq(terms: Vec<Var<'_>>) -> Option<Var<'_>> {
    let n = terms.len();
    let mut it = terms.into_iter();
    let first = it.next()?;
    let s = it.fold(first * first, |acc, r| acc + r * r);
    Some(s * (1.0 / n as Real))
}

/// Same loss and gradient through the scalar jet route on one reverse-mode
/// tape. Orders of magnitude slower than [`evaluate_loss`]; used to
/// cross-check it.
pub fn reference_loss_grad(
    ctx: &LossContext<'_>,
    spec: &NetworkSpec,
    values: &[Real],
) -> Result<(Real, Vec<Real>), OptimError> {
    let tape = Tape::new();
    let theta = tape.vars(values);
    let problem = ctx.problem;
    let d = problem.spatial_dim();
    let w = ctx.weights;
    let eval_at = |p: &[Real]| -> Jet<Var<'_>> {
        let inputs: Vec<Jet<Var<'_>>> = p
            .iter()
            .enumerate()
            .map(|(k, &x)| Jet::coordinate(tape.constant(x), k, d))
            .collect();
        forward_jets(spec, &theta, &inputs)
    };
    let fit = |pts: ArrayView2<'_, Real>, labels: &[Real]| {
        mean_sq(
            pts.rows()
                .into_iter()
                .zip(labels)
                .map(|(r, y)| eval_at(r.as_slice().expect("standard layout")).value - *y)
                .collect(),
        )
    };
    let data = ctx.data;
    let mut parts: Vec<(Real, Option<Var<'_>>)> = vec![(w.initial, fit(data.initial.view(), &data.initial_values))];
    match &data.boundary {
        BoundarySet::Dirichlet { points, values } => parts.push((w.boundary, fit(points.view(), values))),
        BoundarySet::Periodic { times } => {
            let (lo, hi) = (problem.domain().lo[0], problem.domain().hi[0]);
            let mut dv = Vec::new();
            let mut dx = Vec::new();
            for &t in times {
                let a = eval_at(&[lo, t]);
                let b = eval_at(&[hi, t]);
                dv.push(b.value - a.value);
                dx.push(b.first[0] - a.first[0]);
            }
            let mut term = mean_sq(dv);
            if problem.boundary_kind() == BoundaryKind::PeriodicValueAndSlope {
                term = match (term, mean_sq(dx)) {
                    (Some(a), Some(b)) => Some(a + b),
                    (a, _) => a,
                };
            }
            parts.push((w.boundary, term));
        }
    }
    let residuals = data
        .residual
        .rows()
        .into_iter()
        .map(|r| {
            let p = r.as_slice().expect("standard layout");
            problem.residual(&eval_at(p), p)
        })
        .collect();
    parts.push((w.residual, mean_sq(residuals)));
    if let Some(sp) = ctx.supervised {
        parts.push((w.supervised, fit(sp.points.view(), &sp.values)));
    }
    let mut total = tape.constant(0.0);
    for (weight, term) in parts {
        if let Some(t) = term {
            total = total + t * weight;
        }
    }
    let grad =
        crate::autodiff::loss_grad(&tape, total, &theta).map_err(|e| OptimError::NonFiniteLoss(e.to_string()))?;
    Ok((total.value(), grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{make_allen_cahn_unscored, make_convection, make_heat1d_nl, make_heat3d, make_reaction};
    use crate::sampling::{build_supervised_set, sample_training_data, DataSizes};

    fn rel(a: Real, b: Real) -> Real {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
    }

    fn check_routes(problem: &PdeProblem, spec: NetworkSpec, sizes: DataSizes) {
        let params = NetworkParams::xavier_init(spec, 17).unwrap();
        let mut data = sample_training_data(problem, 0.7, sizes, 5).unwrap();
        let other = NetworkParams::xavier_init(spec, 99).unwrap();
        let sp = build_supervised_set(&other, problem, 0.3, sizes.n_sp, 6).unwrap();
        data.supervised = sp.clone();
        let weights = LossWeights {
            initial: 1.5,
            boundary: 0.5,
            residual: 2.0,
            supervised: 0.25,
        };
        let ctx = LossContext {
            problem,
            data: &data,
            supervised: Some(&sp),
            weights,
        };
        let fast = evaluate_loss(&ctx, &spec, params.values(), true).unwrap();
        let (slow_loss, slow_grad) = reference_loss_grad(&ctx, &spec, params.values()).unwrap();
        assert!(rel(fast.loss, slow_loss) < 1e-12, "{} vs {slow_loss}", fast.loss);
        for (a, b) in fast.grad.iter().zip(&slow_grad) {
            assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()), "{a} vs {b}");
        }
        let mut obj = PinnObjective::new(problem, &spec, data.clone(), weights);
        let e = obj.evaluate(params.values()).unwrap();
        assert_eq!(e, fast);
    }

    #[test]
    fn batched_loss_matches_tape_route() {
        check_routes(&make_heat3d(), NetworkSpec::mlp(4, 2, 6), DataSizes::new(5, 7, 9, 4));
        check_routes(
            &make_reaction(5.0).unwrap(),
            NetworkSpec::mlp(2, 3, 5),
            DataSizes::new(5, 6, 8, 3),
        );
        check_routes(
            &make_heat1d_nl(3).unwrap(),
            NetworkSpec::resnet(2, 2, 4),
            DataSizes::new(4, 4, 10, 2),
        );
        check_routes(
            &make_allen_cahn_unscored(),
            NetworkSpec::mlp(2, 2, 7),
            DataSizes::new(6, 5, 8, 3),
        );
        check_routes(
            &make_convection(30.0).unwrap(),
            NetworkSpec::mlp(2, 1, 3),
            DataSizes::new(3, 3, 3, 0),
        );
    }

    #[test]
    fn empty_sets_give_zero() {
        let p = make_heat3d();
        let spec = NetworkSpec::mlp(4, 2, 5);
        let params = NetworkParams::xavier_init(spec, 1).unwrap();
        let data = sample_training_data(&p, 1.0, DataSizes::default(), 1).unwrap();
        let (total, c) = pinn_loss(&params, &data, LossWeights::default(), &p).unwrap();
        assert_eq!(total, 0.0);
        assert_eq!(c, LossComponents::default());
    }

    #[test]
    fn empty_supervised_set_equals_plain_loss() {
        let p = make_reaction(10.0).unwrap();
        let spec = NetworkSpec::mlp(2, 2, 8);
        let params = NetworkParams::xavier_init(spec, 3).unwrap();
        let data = sample_training_data(&p, 0.5, DataSizes::new(20, 10, 30, 0), 2).unwrap();
        let w = LossWeights::default();
        let plain = pinn_loss(&params, &data, w, &p).unwrap();
        let aug = augmented_loss(&params, &data, w, &p, &SupervisedSet::empty(2)).unwrap();
        assert_eq!(plain.0.to_bits(), aug.0.to_bits());
        assert_eq!(plain.1, aug.1);
    }

    #[test]
    fn supervised_term_by_hand() {
        let p = make_convection(1.0).unwrap();
        let spec = NetworkSpec::mlp(2, 1, 2);
        let mut params = NetworkParams::zeros(spec).unwrap();
        let last = params.values().len() - 1;
        params.values_mut()[last] = 1.0;
        let data = sample_training_data(&p, 1.0, DataSizes::default(), 0).unwrap();
        let sp = SupervisedSet {
            points: Array2::from_shape_vec((2, 2), vec![1.0, 0.5, 2.0, 0.25]).unwrap(),
            values: vec![0.9, 1.3],
        };
        let (_, c) = augmented_loss(&params, &data, LossWeights::default(), &p, &sp).unwrap();
        assert!((c.supervised - 0.05).abs() < 1e-15);

        // labels produced by the same network
        let net = NetworkParams::xavier_init(NetworkSpec::mlp(2, 2, 5), 8).unwrap();
        let sp = build_supervised_set(&net, &p, 0.5, 50, 4).unwrap();
        let (_, c) = augmented_loss(&net, &data, LossWeights::default(), &p, &sp).unwrap();
        assert_eq!(c.supervised, 0.0);
    }

    #[test]
    fn convection_residual_with_one_neuron() {
        // u = v·tanh(a x + b t + c) + e
        let beta = 3.0;
        let p = make_convection(beta).unwrap();
        let spec = NetworkSpec::mlp(2, 1, 1);
        let (a, b, c, v, e) = (0.7, -0.4, 0.2, 1.3, 0.1);
        let params = NetworkParams::from_flat(spec, vec![a, b, c, v, e]).unwrap();
        let (x, t) = (0.9, 0.35);
        let mut data = sample_training_data(&p, 1.0, DataSizes::default(), 0).unwrap();
        data.residual = Array2::from_shape_vec((1, 2), vec![x, t]).unwrap();
        let s = 1.0 - (a * x + b * t + c).tanh().powi(2);
        let hand = (v * s * b + beta * v * s * a).powi(2);
        let (_, comp) = pinn_loss(&params, &data, LossWeights::default(), &p).unwrap();
        assert!((comp.residual - hand).abs() < 1e-14, "{} vs {hand}", comp.residual);
    }

    #[test]
    fn constant_solution_has_zero_loss() {
        // Allen-Cahn with u ≡ 1: residual 0, periodic terms 0
        let p = make_allen_cahn_unscored();
        let spec = NetworkSpec::mlp(2, 1, 3);
        let mut params = NetworkParams::zeros(spec).unwrap();
        let last = params.values().len() - 1;
        params.values_mut()[last] = 1.0;
        let data = sample_training_data(&p, 1.0, DataSizes::new(0, 20, 50, 0), 3).unwrap();
        let (total, _) = pinn_loss(&params, &data, LossWeights::default(), &p).unwrap();
        assert_eq!(total, 0.0);
    }

    #[test]
    fn non_finite_component_is_named() {
        let p = make_heat1d_nl(4).unwrap();
        let spec = NetworkSpec::mlp(2, 1, 2);
        let mut params = NetworkParams::zeros(spec).unwrap();
        let last = params.values().len() - 1;
        params.values_mut()[last] = Real::MAX / 4.0;
        let data = sample_training_data(&p, 1.0, DataSizes::new(0, 0, 5, 0), 3).unwrap();
        match pinn_loss(&params, &data, LossWeights::default(), &p) {
            Err(OptimError::NonFiniteLoss(name)) => assert_eq!(name, "residual"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
