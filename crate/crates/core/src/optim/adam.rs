use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamSettings {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// L2 penalty folded into the gradient.
    pub weight_decay: f64,
}

impl Default for AdamSettings {
    fn default() -> Self {
        Self {
            lr: 5e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// Bias-corrected Adam. Steps descend along the supplied gradient; callers
/// maximizing an objective pass its negated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub settings: AdamSettings,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(len: usize, settings: AdamSettings) -> Self {
        Self {
            settings,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    pub fn step(&mut self, grad: &[f64], params: &mut [f64]) -> Result<()> {
        if grad.len() != self.m.len() || params.len() != self.m.len() {
            return Err(Error::mismatch(
                "adam step",
                self.m.len(),
                format!("grad {} / params {}", grad.len(), params.len()),
            ));
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("adam gradient"));
        }
        let AdamSettings {
            lr,
            beta1,
            beta2,
            eps,
            weight_decay,
        } = self.settings;
        self.t += 1;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grad[i] + weight_decay * params[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut st = AdamState::new(3, AdamSettings::default());
        let mut p = vec![1.0, -2.0, 0.5];
        st.step(&[0.0; 3], &mut p).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
        assert!(st.first_moment().iter().chain(st.second_moment()).all(|&v| v == 0.0));
        assert_eq!(st.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_about_lr() {
        for g in [1e-3, 0.7, -5.0, 300.0] {
            let s = AdamSettings::default();
            let mut st = AdamState::new(1, s);
            let mut p = [0.0];
            st.step(&[g], &mut p).unwrap();
            // m_hat = g, v_hat = g^2: update = lr * |g| / (|g| + eps)
            let expected = -g.signum() * s.lr * g.abs() / (g.abs() + s.eps);
            assert!((p[0] - expected).abs() < 1e-15, "g={g}: {} vs {expected}", p[0]);
        }
    }

    #[test]
    fn identical_calls_identical_results() {
        let st = AdamState::new(2, AdamSettings::default());
        let (mut a, mut b) = (st.clone(), st);
        let (mut pa, mut pb) = ([0.3, 0.1], [0.3, 0.1]);
        for _ in 0..5 {
            a.step(&[0.2, -1.0], &mut pa).unwrap();
            b.step(&[0.2, -1.0], &mut pb).unwrap();
        }
        assert_eq!(pa, pb);
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_input() {
        let mut st = AdamState::new(2, AdamSettings::default());
        let mut p = [0.0, 0.0];
        assert!(matches!(st.step(&[f64::NAN, 0.0], &mut p), Err(Error::NonFinite(_))));
        assert!(st.step(&[0.0], &mut p).is_err());
    }

    #[test]
    fn descends_a_quadratic() {
        let mut st = AdamState::new(
            2,
            AdamSettings {
                lr: 0.05,
                ..Default::default()
            },
        );
        let mut p = [3.0, -2.0];
        for _ in 0..2000 {
            let g = [2.0 * p[0], 2.0 * p[1]];
            st.step(&g, &mut p).unwrap();
        }
        assert!(p[0].abs() < 1e-2 && p[1].abs() < 1e-2, "{p:?}");
    }
}
