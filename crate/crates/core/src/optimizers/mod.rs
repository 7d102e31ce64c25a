//! Adam with step-decayed learning rate, L-BFGS with a strong-Wolfe line
//! search, and the Adam → L-BFGS combination used for every training stage.

mod adam;
mod lbfgs;

pub use adam::{AdamSettings, AdamState};
pub use lbfgs::{lbfgs_minimize, LbfgsReport, LbfgsSettings, LbfgsStatus, WolfeRecord};

use std::io::Write;

use crate::Real;

#[derive(Debug, thiserror::Error)]
pub enum OptimError {
    #[error("non-finite gradient entry at index {index}")]
    NonFiniteGradient { index: usize },
    #[error("non-finite loss component: {0}")]
    NonFiniteLoss(String),
    #[error("parameter length mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("objective failed: {0}")]
    Objective(String),
}

/// Unweighted loss terms, for logging.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossComponents {
    pub initial: Real,
    pub boundary: Real,
    pub residual: Real,
    pub supervised: Real,
}

/// Loss value and gradient at one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub loss: Real,
    pub grad: Vec<Real>,
    pub components: LossComponents,
}

impl Evaluation {
    pub fn new(loss: Real, grad: Vec<Real>) -> Self {
        Self {
            loss,
            grad,
            components: LossComponents::default(),
        }
    }
}

pub trait Objective {
    fn evaluate(&mut self, params: &[Real]) -> Result<Evaluation, OptimError>;
}

/// Adapts a closure into an [`Objective`].
pub struct FnObjective<F>(pub F);

impl<F> Objective for FnObjective<F>
where
    F: FnMut(&[Real]) -> Result<Evaluation, OptimError>,
{
    fn evaluate(&mut self, params: &[Real]) -> Result<Evaluation, OptimError> {
        (self.0)(params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Adam,
    Lbfgs,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Adam => "adam",
            Phase::Lbfgs => "lbfgs",
        }
    }
}

/// One training log row. For Adam rows `lr` is the learning rate of the
/// step taken from these parameters; for L-BFGS rows it is the accepted
/// step length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRecord {
    pub phase: Phase,
    pub step: usize,
    pub loss_total: Real,
    pub components: LossComponents,
    pub lr: Real,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub records: Vec<LogRecord>,
}

impl TrainingLog {
    pub const HEADER: [&'static str; 8] = [
        "phase",
        "step",
        "loss_total",
        "loss_i",
        "loss_b",
        "loss_r",
        "loss_sp",
        "lr",
    ];

    pub fn push(&mut self, phase: Phase, step: usize, eval: &Evaluation, lr: Real) {
        self.records.push(LogRecord {
            phase,
            step,
            loss_total: eval.loss,
            components: eval.components,
            lr,
        });
    }

    /// Losses in order, for trajectory comparisons.
    pub fn losses(&self) -> Vec<Real> {
        self.records.iter().map(|r| r.loss_total).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::HEADER)?;
        for r in &self.records {
            let c = r.components;
            w.write_record([
                r.phase.as_str().to_string(),
                r.step.to_string(),
                format!("{:e}", r.loss_total),
                format!("{:e}", c.initial),
                format!("{:e}", c.boundary),
                format!("{:e}", c.residual),
                format!("{:e}", c.supervised),
                format!("{:e}", r.lr),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CombinedSettings {
    pub adam: AdamSettings,
    pub adam_steps: usize,
    pub lbfgs: LbfgsSettings,
    /// `false` stops after the Adam phase.
    pub use_lbfgs: bool,
}

impl Default for CombinedSettings {
    fn default() -> Self {
        Self {
            adam: AdamSettings::default(),
            adam_steps: 2000,
            lbfgs: LbfgsSettings::default(),
            use_lbfgs: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CombinedReport {
    pub params: Vec<Real>,
    /// Objective at `params`.
    pub evaluation: Evaluation,
    pub lbfgs_status: Option<LbfgsStatus>,
    pub lbfgs_iterations: usize,
    pub log: TrainingLog,
}

/// `adam_steps` Adam updates, calling `hook(step, obj)` after each one (the
/// step counter is 1-based), followed by L-BFGS on the objective as the hook
/// left it. The hook never runs during L-BFGS.
pub fn combined_train<O: Objective>(
    obj: &mut O,
    params0: Vec<Real>,
    settings: &CombinedSettings,
    mut hook: impl FnMut(usize, &mut O),
) -> Result<CombinedReport, OptimError> {
    let mut params = params0;
    let mut log = TrainingLog::default();
    let mut adam = AdamState::new(params.len(), settings.adam);
    for step in 0..settings.adam_steps {
        let eval = obj.evaluate(&params)?;
        if !eval.loss.is_finite() {
            return Err(OptimError::NonFiniteLoss(format!("total at Adam step {step}")));
        }
        log.push(Phase::Adam, step, &eval, adam.learning_rate());
        adam.update(&mut params, &eval.grad)?;
        hook(step + 1, obj);
    }
    if !settings.use_lbfgs {
        let evaluation = obj.evaluate(&params)?;
        log.push(Phase::Adam, settings.adam_steps, &evaluation, adam.learning_rate());
        return Ok(CombinedReport {
            params,
            evaluation,
            lbfgs_status: None,
            lbfgs_iterations: 0,
            log,
        });
    }
    let mut lbfgs_log = Vec::new();
    let report = lbfgs_minimize(obj, params, &settings.lbfgs, |k, alpha, e| {
        lbfgs_log.push((k, alpha, e.loss, e.components));
    })?;
    for (k, alpha, loss, components) in lbfgs_log {
        log.records.push(LogRecord {
            phase: Phase::Lbfgs,
            step: k,
            loss_total: loss,
            components,
            lr: alpha,
        });
    }
    Ok(CombinedReport {
        params: report.params,
        evaluation: report.evaluation,
        lbfgs_status: Some(report.status),
        lbfgs_iterations: report.iterations,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bowl() -> FnObjective<impl FnMut(&[Real]) -> Result<Evaluation, OptimError>> {
        FnObjective(|x: &[Real]| {
            let loss = x.iter().map(|v| (v - 1.0) * (v - 1.0)).sum();
            Ok(Evaluation::new(loss, x.iter().map(|v| 2.0 * (v - 1.0)).collect()))
        })
    }

    #[test]
    fn zero_adam_steps_is_pure_lbfgs() {
        let settings = CombinedSettings {
            adam_steps: 0,
            ..Default::default()
        };
        let mut calls = 0;
        let r = combined_train(&mut bowl(), vec![5.0, -3.0], &settings, |_, _| calls += 1).unwrap();
        assert_eq!(calls, 0);
        assert!(r.log.records.iter().all(|rec| rec.phase == Phase::Lbfgs));
        assert!(r.params.iter().all(|v| (v - 1.0).abs() < 1e-10));
    }

    #[test]
    fn hook_runs_after_each_adam_step_only() {
        let settings = CombinedSettings {
            adam_steps: 7,
            ..Default::default()
        };
        let mut seen = Vec::new();
        let r = combined_train(&mut bowl(), vec![0.0; 3], &settings, |s, _| seen.push(s)).unwrap();
        assert_eq!(seen, (1..=7).collect::<Vec<_>>());
        assert_eq!(r.log.records.iter().filter(|rec| rec.phase == Phase::Adam).count(), 7);
        assert!(r.lbfgs_status.unwrap().converged());
    }

    #[test]
    fn deterministic_and_logged() {
        let settings = CombinedSettings {
            adam_steps: 60,
            use_lbfgs: false,
            ..Default::default()
        };
        let a = combined_train(&mut bowl(), vec![3.0; 2], &settings, |_, _| {}).unwrap();
        let b = combined_train(&mut bowl(), vec![3.0; 2], &settings, |_, _| {}).unwrap();
        assert_eq!(a.log, b.log);
        assert_eq!(a.log.records[50].lr, 1e-3 * 0.98);
        let mut buf = Vec::new();
        a.log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("phase,step,loss_total,loss_i,loss_b,loss_r,loss_sp,lr\n"));
        assert_eq!(text.lines().count(), 62);
    }
}
