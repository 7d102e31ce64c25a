use super::OptimError;
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamSettings {
    pub lr: Real,
    pub beta1: Real,
    pub beta2: Real,
    pub eps: Real,
    /// Multiplier applied every `decay_steps` steps.
    pub decay_rate: Real,
    pub decay_steps: usize,
}

impl Default for AdamSettings {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            decay_rate: 0.98,
            decay_steps: 50,
        }
    }
}

impl AdamSettings {
    /// Learning rate used by the update that follows `step` completed steps:
    /// `lr · rate^⌊step / decay_steps⌋`.
    pub fn learning_rate(&self, step: usize) -> Real {
        let k = step / self.decay_steps.max(1);
        self.lr * self.decay_rate.powi(k as i32)
    }
}

/// Moment estimates and step counter of one Adam run.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub settings: AdamSettings,
    pub m: Vec<Real>,
    pub v: Vec<Real>,
    /// Completed steps.
    pub step: usize,
}

impl AdamState {
    pub fn new(len: usize, settings: AdamSettings) -> Self {
        Self {
            settings,
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }

    pub fn learning_rate(&self) -> Real {
        self.settings.learning_rate(self.step)
    }

    /// One bias-corrected update of `params` in place.
    pub fn update(&mut self, params: &mut [Real], grad: &[Real]) -> Result<(), OptimError> {
        if grad.len() != params.len() || self.m.len() != params.len() {
            return Err(OptimError::Dimension {
                expected: self.m.len(),
                actual: grad.len().min(params.len()),
            });
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(OptimError::NonFiniteGradient { index: i });
        }
        let s = self.settings;
        let lr = self.learning_rate();
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - s.beta1.powi(t);
        let c2 = 1.0 - s.beta2.powi(t);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = s.beta1 * *m + (1.0 - s.beta1) * g;
            *v = s.beta2 * *v + (1.0 - s.beta2) * g * g;
            let mh = *m / c1;
            let vh = *v / c2;
            *p -= lr * mh / (vh.sqrt() + s.eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_params() {
        let mut st = AdamState::new(3, AdamSettings::default());
        let mut p = vec![1.0, -2.0, 3.0];
        st.update(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn first_step_by_hand() {
        let mut st = AdamState::new(1, AdamSettings::default());
        let mut p = vec![0.0];
        st.update(&mut p, &[1.0]).unwrap();
        // m̂ = 1, v̂ = 1
        let expected = -1e-3 * (1.0 / (1.0 + 1e-8));
        assert!((p[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn decay_schedule_is_stepwise() {
        let s = AdamSettings::default();
        assert_eq!(s.learning_rate(0), 1e-3);
        assert_eq!(s.learning_rate(49), 1e-3);
        assert!((s.learning_rate(50) - 0.98e-3).abs() < 1e-15);
        assert!((s.learning_rate(149) - 0.98 * 0.98 * 1e-3).abs() < 1e-15);
    }

    #[test]
    fn gradient_scale_invariance() {
        let g = [0.3, -1.7, 2.5e-2];
        let mut a = vec![0.0; 3];
        let mut b = vec![0.0; 3];
        AdamState::new(3, AdamSettings::default()).update(&mut a, &g).unwrap();
        let g10: Vec<Real> = g.iter().map(|x| 10.0 * x).collect();
        AdamState::new(3, AdamSettings::default()).update(&mut b, &g10).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!(((x - y) / x).abs() < 1e-6);
        }
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut st = AdamState::new(2, AdamSettings::default());
        let mut p = vec![0.0; 2];
        assert!(matches!(
            st.update(&mut p, &[0.0, Real::NAN]),
            Err(OptimError::NonFiniteGradient { index: 1 })
        ));
        assert_eq!(st.step, 0);
    }
}
