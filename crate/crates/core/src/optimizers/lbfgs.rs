use std::collections::VecDeque;

use super::{Evaluation, Objective, OptimError};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsSettings {
    /// Stored `(s, y)` pairs.
    pub memory: usize,
    /// Stop when `‖g‖∞` falls below this.
    pub gtol: Real,
    /// Stop when `(f_k − f_{k+1}) / max(|f_k|, |f_{k+1}|)` falls below this.
    pub ftol: Real,
    pub max_iter: usize,
    /// Sufficient-decrease constant.
    pub c1: Real,
    /// Curvature constant.
    pub c2: Real,
    /// Function evaluations allowed per line search.
    pub max_line_search: usize,
}

impl Default for LbfgsSettings {
    fn default() -> Self {
        Self {
            memory: 50,
            gtol: 1e-9,
            ftol: 1e-11,
            max_iter: 20_000,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LbfgsStatus {
    GradientTolerance,
    FunctionTolerance,
    MaxIterations,
    /// No step satisfying the strong Wolfe conditions was found; the best
    /// point seen is returned.
    LineSearchFailed,
}

impl LbfgsStatus {
    pub fn converged(self) -> bool {
        matches!(self, LbfgsStatus::GradientTolerance | LbfgsStatus::FunctionTolerance)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LbfgsStatus::GradientTolerance => "gtol",
            LbfgsStatus::FunctionTolerance => "ftol",
            LbfgsStatus::MaxIterations => "max_iter",
            LbfgsStatus::LineSearchFailed => "line_search_failed",
        }
    }
}

/// Line-search data of an accepted step: `φ(0)`, `φ'(0)`, `φ(α)`, `φ'(α)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WolfeRecord {
    pub alpha: Real,
    pub f0: Real,
    pub slope0: Real,
    pub f: Real,
    pub slope: Real,
}

impl WolfeRecord {
    pub fn satisfies(&self, c1: Real, c2: Real) -> bool {
        self.f <= self.f0 + c1 * self.alpha * self.slope0 && self.slope.abs() <= -c2 * self.slope0
    }
}

#[derive(Debug, Clone)]
pub struct LbfgsReport {
    pub params: Vec<Real>,
    pub evaluation: Evaluation,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: LbfgsStatus,
    pub accepted: Vec<WolfeRecord>,
}

impl LbfgsReport {
    pub fn loss(&self) -> Real {
        self.evaluation.loss
    }
}

struct Probe {
    alpha: Real,
    f: Real,
    slope: Real,
    eval: Option<Evaluation>,
}

fn dot(a: &[Real], b: &[Real]) -> Real {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[Real]) -> Real {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct Search<'a, O: Objective> {
    obj: &'a mut O,
    x: &'a [Real],
    dir: &'a [Real],
    f0: Real,
    slope0: Real,
    c1: Real,
    c2: Real,
    budget: usize,
    used: usize,
    trial: Vec<Real>,
    best: Option<(Real, Vec<Real>, Evaluation)>,
}

impl<O: Objective> Search<'_, O> {
    fn probe(&mut self, alpha: Real) -> Result<Probe, OptimError> {
        self.used += 1;
        for ((t, x), d) in self.trial.iter_mut().zip(self.x).zip(self.dir) {
            *t = x + alpha * d;
        }
        match self.obj.evaluate(&self.trial) {
            Ok(e) if e.loss.is_finite() && e.grad.iter().all(|g| g.is_finite()) => {
                let slope = dot(&e.grad, self.dir);
                if self.best.as_ref().is_none_or(|b| e.loss < b.0) {
                    self.best = Some((e.loss, self.trial.clone(), e.clone()));
                }
                Ok(Probe {
                    alpha,
                    f: e.loss,
                    slope,
                    eval: Some(e),
                })
            }
            Ok(_) | Err(OptimError::NonFiniteLoss(_)) | Err(OptimError::NonFiniteGradient { .. }) => Ok(Probe {
                alpha,
                f: Real::INFINITY,
                slope: Real::NAN,
                eval: None,
            }),
            Err(e) => Err(e),
        }
    }

    fn armijo_fails(&self, p: &Probe) -> bool {
        !(p.f <= self.f0 + self.c1 * p.alpha * self.slope0)
    }

    fn curvature_holds(&self, p: &Probe) -> bool {
        p.slope.abs() <= -self.c2 * self.slope0
    }

    /// Strong-Wolfe bracketing phase.
    fn run(&mut self, alpha0: Real) -> Result<Option<Probe>, OptimError> {
        let mut prev = Probe {
            alpha: 0.0,
            f: self.f0,
            slope: self.slope0,
            eval: None,
        };
        let mut alpha = alpha0;
        let mut first = true;
        while self.used < self.budget {
            let cur = self.probe(alpha)?;
            if self.armijo_fails(&cur) || (!first && cur.f >= prev.f) {
                return self.zoom(prev, cur);
            }
            if self.curvature_holds(&cur) {
                return Ok(Some(cur));
            }
            if cur.slope >= 0.0 {
                return self.zoom(cur, prev);
            }
            first = false;
            // extrapolate with the interpolating cubic, kept within [1.1, 4]·α
            let (lo, hi) = (cur.alpha * 1.1, cur.alpha * 4.0);
            alpha = match cubic_min(&prev, &cur) {
                Some(a) if a >= lo && a <= hi => a,
                Some(a) if a > hi => hi,
                _ => hi,
            };
            prev = cur;
        }
        Ok(None)
    }

    fn zoom(&mut self, mut lo: Probe, mut hi: Probe) -> Result<Option<Probe>, OptimError> {
        while self.used < self.budget {
            let width = hi.alpha - lo.alpha;
            if width.abs() <= Real::EPSILON * lo.alpha.abs().max(1.0) {
                break;
            }
            let mut alpha = cubic_min(&lo, &hi).unwrap_or(Real::NAN);
            let (a, b) = (lo.alpha.min(hi.alpha), lo.alpha.max(hi.alpha));
            let margin = 0.1 * (b - a);
            if !(alpha >= a + margin && alpha <= b - margin) {
                alpha = 0.5 * (lo.alpha + hi.alpha);
            }
            let cur = self.probe(alpha)?;
            if self.armijo_fails(&cur) || cur.f >= lo.f {
                hi = cur;
            } else {
                if self.curvature_holds(&cur) {
                    return Ok(Some(cur));
                }
                if cur.slope * (hi.alpha - lo.alpha) >= 0.0 {
                    hi = lo;
                }
                lo = cur;
            }
        }
        Ok(None)
    }
}

/// Minimizer of the cubic interpolating `f` and `f'` at both ends.
fn cubic_min(a: &Probe, b: &Probe) -> Option<Real> {
    if !(a.f.is_finite() && b.f.is_finite() && a.slope.is_finite() && b.slope.is_finite()) {
        return None;
    }
    let d1 = a.slope + b.slope - 3.0 * (a.f - b.f) / (a.alpha - b.alpha);
    let disc = d1 * d1 - a.slope * b.slope;
    if disc < 0.0 {
        return None;
    }
    let d2 = (b.alpha - a.alpha).signum() * disc.sqrt();
    let den = b.slope - a.slope + 2.0 * d2;
    if den == 0.0 {
        return None;
    }
    let alpha = b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / den;
    alpha.is_finite().then_some(alpha)
}

/// Two-loop recursion: `−H g` for the stored pairs.
fn direction(grad: &[Real], history: &VecDeque<(Vec<Real>, Vec<Real>, Real)>) -> Vec<Real> {
    let mut q = grad.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    for qi in q.iter_mut() {
        *qi = -*qi;
    }
    q
}

/// Minimizes `obj` from `params0`. `on_iter(k, α, eval)` is called after
/// every accepted step.
pub fn lbfgs_minimize<O: Objective>(
    obj: &mut O,
    params0: Vec<Real>,
    settings: &LbfgsSettings,
    mut on_iter: impl FnMut(usize, Real, &Evaluation),
) -> Result<LbfgsReport, OptimError> {
    let mut x = params0;
    let mut eval = obj.evaluate(&x)?;
    if !eval.loss.is_finite() {
        return Err(OptimError::NonFiniteLoss("initial point".into()));
    }
    if let Some(i) = eval.grad.iter().position(|g| !g.is_finite()) {
        return Err(OptimError::NonFiniteGradient { index: i });
    }
    let mut evaluations = 1;
    let mut history: VecDeque<(Vec<Real>, Vec<Real>, Real)> = VecDeque::with_capacity(settings.memory);
    let mut accepted = Vec::new();
    let mut iterations = 0;
    let status = loop {
        if inf_norm(&eval.grad) < settings.gtol {
            break LbfgsStatus::GradientTolerance;
        }
        if iterations >= settings.max_iter {
            break LbfgsStatus::MaxIterations;
        }
        let mut dir = direction(&eval.grad, &history);
        let mut slope0 = dot(&eval.grad, &dir);
        if !(slope0 < 0.0) {
            history.clear();
            dir = eval.grad.iter().map(|g| -g).collect();
            slope0 = dot(&eval.grad, &dir);
        }
        let alpha0 = if history.is_empty() {
            let l1: Real = eval.grad.iter().map(|g| g.abs()).sum();
            (1.0 as Real).min(1.0 / l1)
        } else {
            1.0
        };
        let mut search = Search {
            obj: &mut *obj,
            x: &x,
            dir: &dir,
            f0: eval.loss,
            slope0,
            c1: settings.c1,
            c2: settings.c2,
            budget: settings.max_line_search,
            used: 0,
            trial: vec![0.0; x.len()],
            best: None,
        };
        let found = search.run(alpha0)?;
        evaluations += search.used;
        let best = search.best.take();
        let Some(step) = found else {
            // keep any improvement the failed search stumbled upon
            if let Some((f, p, e)) = best {
                if f < eval.loss {
                    x = p;
                    eval = e;
                }
            }
            break LbfgsStatus::LineSearchFailed;
        };
        let new_eval = step.eval.expect("accepted probes are finite");
        accepted.push(WolfeRecord {
            alpha: step.alpha,
            f0: eval.loss,
            slope0,
            f: new_eval.loss,
            slope: step.slope,
        });
        let s: Vec<Real> = dir.iter().map(|d| step.alpha * d).collect();
        let y: Vec<Real> = new_eval.grad.iter().zip(&eval.grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > Real::EPSILON * dot(&y, &y) {
            if history.len() == settings.memory {
                history.pop_front();
            }
            history.push_back((s.clone(), y, 1.0 / sy));
        }
        for (xi, si) in x.iter_mut().zip(&s) {
            *xi += si;
        }
        let f_old = eval.loss;
        eval = new_eval;
        iterations += 1;
        on_iter(iterations, step.alpha, &eval);
        let scale = f_old.abs().max(eval.loss.abs()).max(Real::MIN_POSITIVE);
        if inf_norm(&eval.grad) < settings.gtol {
            break LbfgsStatus::GradientTolerance;
        }
        if (f_old - eval.loss) / scale <= settings.ftol {
            break LbfgsStatus::FunctionTolerance;
        }
    };
    Ok(LbfgsReport {
        params: x,
        evaluation: eval,
        iterations,
        evaluations,
        status,
        accepted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizers::FnObjective;
    use rand::{Rng, SeedableRng};

    fn quadratic(
        target: Vec<Real>,
        diag: Vec<Real>,
    ) -> FnObjective<impl FnMut(&[Real]) -> Result<Evaluation, OptimError>> {
        FnObjective(move |x: &[Real]| {
            let r: Vec<Real> = x.iter().zip(&target).map(|(a, b)| a - b).collect();
            let loss = r.iter().zip(&diag).map(|(ri, di)| di * ri * ri).sum();
            let grad = r.iter().zip(&diag).map(|(ri, di)| 2.0 * di * ri).collect();
            Ok(Evaluation::new(loss, grad))
        })
    }

    #[test]
    fn isotropic_quadratic() {
        let target = vec![1.0, -2.0, 0.5, 3.0];
        let mut obj = quadratic(target.clone(), vec![1.0; 4]);
        let r = lbfgs_minimize(
            &mut obj,
            vec![10.0, 4.0, -7.0, 0.0],
            &LbfgsSettings::default(),
            |_, _, _| {},
        )
        .unwrap();
        assert!(r.iterations <= 5, "{}", r.iterations);
        for (a, b) in r.params.iter().zip(&target) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(r.status.converged());
    }

    // Finite termination needs conjugate steps, i.e. a near-exact line
    // search; the default c2 = 0.9 accepts the first unit step instead.
    #[test]
    fn convex_quadratics_finish_in_n_plus_5() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for n in 1..=10 {
            let target: Vec<Real> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let diag: Vec<Real> = (0..n).map(|_| rng.random_range(1.0..10.0)).collect();
            let x0: Vec<Real> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let settings = LbfgsSettings {
                gtol: 1e-10,
                ftol: 0.0,
                c2: 1e-3,
                ..Default::default()
            };
            let mut obj = quadratic(target, diag);
            let r = lbfgs_minimize(&mut obj, x0, &settings, |_, _, _| {}).unwrap();
            assert_eq!(r.status, LbfgsStatus::GradientTolerance, "n = {n}");
            assert!(r.iterations <= n + 5, "n = {n}: {} iterations", r.iterations);
            for w in &r.accepted {
                assert!(w.satisfies(settings.c1, settings.c2), "{w:?}");
            }
        }
    }

    #[test]
    fn convex_quadratics_converge_with_defaults() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for n in 1..=10 {
            let target: Vec<Real> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let diag: Vec<Real> = (0..n).map(|_| rng.random_range(1.0..10.0)).collect();
            let settings = LbfgsSettings {
                gtol: 1e-10,
                ftol: 0.0,
                ..Default::default()
            };
            let r = lbfgs_minimize(&mut quadratic(target, diag), vec![0.0; n], &settings, |_, _, _| {}).unwrap();
            assert_eq!(r.status, LbfgsStatus::GradientTolerance);
            assert!(r.iterations <= 4 * n + 10);
            assert!(r.accepted.iter().all(|w| w.satisfies(settings.c1, settings.c2)));
        }
    }

    #[test]
    fn rosenbrock() {
        let mut obj = FnObjective(|x: &[Real]| {
            let (a, b) = (x[0], x[1]);
            let loss = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let grad = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            Ok(Evaluation::new(loss, grad))
        });
        let r = lbfgs_minimize(&mut obj, vec![-1.2, 1.0], &LbfgsSettings::default(), |_, _, _| {}).unwrap();
        assert!(
            (r.params[0] - 1.0).abs() < 1e-6 && (r.params[1] - 1.0).abs() < 1e-6,
            "{:?}",
            r.params
        );
        for w in &r.accepted {
            assert!(w.satisfies(1e-4, 0.9));
        }
    }

    #[test]
    fn constant_loss_stops_immediately() {
        let mut obj = FnObjective(|x: &[Real]| Ok(Evaluation::new(3.0, vec![0.0; x.len()])));
        let r = lbfgs_minimize(&mut obj, vec![0.25, -1.0], &LbfgsSettings::default(), |_, _, _| {}).unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(r.params, vec![0.25, -1.0]);
        assert_eq!(r.status, LbfgsStatus::GradientTolerance);
    }

    #[test]
    fn inconsistent_gradient_flags_line_search_failure() {
        // gradient points the wrong way: no step can decrease the loss
        let mut obj = FnObjective(|x: &[Real]| Ok(Evaluation::new(x[0] * x[0] + 1.0, vec![-(2.0 * x[0] + 1.0)])));
        let r = lbfgs_minimize(&mut obj, vec![1.0], &LbfgsSettings::default(), |_, _, _| {}).unwrap();
        assert_eq!(r.status, LbfgsStatus::LineSearchFailed);
        assert!(r.loss() <= 2.0);
    }

    #[test]
    fn non_finite_region_is_avoided() {
        // loss blows up for x > 2; minimum at 1.5 is reachable
        let mut obj = FnObjective(|x: &[Real]| {
            if x[0] > 2.0 {
                return Err(OptimError::NonFiniteLoss("residual".into()));
            }
            Ok(Evaluation::new((x[0] - 1.5).powi(2), vec![2.0 * (x[0] - 1.5)]))
        });
        let settings = LbfgsSettings::default();
        let r = lbfgs_minimize(&mut obj, vec![-30.0], &settings, |_, _, _| {}).unwrap();
        assert!((r.params[0] - 1.5).abs() < 1e-8, "{:?} {:?}", r.params, r.status);
    }
}
