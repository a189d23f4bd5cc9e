//! Dynamic barrier gradient descent for "minimize a secondary loss among the
//! maximizers of a primary score", plus the two baseline direction rules it
//! is compared against.
//!
//! At every iterate the update direction is `v = grad_l - lambda * grad_s`
//! with
//!
//! ```text
//! lambda = max((beta |grad_s|^2 + <grad_l, grad_s>) / |grad_s|^2, 0)
//! ```
//!
//! so that `<-v, grad_s> >= beta |grad_s|^2`: a step against `v` never
//! decreases the primary score to first order, and the secondary loss only
//! gets the part of its gradient that does not conflict with it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{AdamSettings, AdamState, OptimSettings};
use crate::trace::{ScoreTrace, TraceRow};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BarrierSettings {
    pub beta: f64,
    /// Floor on the squared gradient norm in the denominator of `lambda`.
    pub tau: f64,
}

impl Default for BarrierSettings {
    fn default() -> Self {
        Self { beta: 1.0, tau: 1e-12 }
    }
}

impl BarrierSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("dbgd.beta must be >= 0, got {}", self.beta)));
        }
        if !(self.tau > 0.0) {
            return Err(Error::Config(format!("dbgd.tau must be > 0, got {}", self.tau)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Dbgd,
    Linear,
    Inverse,
}

/// The `dbgd.*` configuration block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DbgdConfig {
    pub beta: f64,
    pub tau: f64,
    pub variant: Variant,
    /// Fixed coefficient for the `linear` variant.
    pub lambda_fixed: f64,
}

impl Default for DbgdConfig {
    fn default() -> Self {
        let b = BarrierSettings::default();
        Self {
            beta: b.beta,
            tau: b.tau,
            variant: Variant::Dbgd,
            lambda_fixed: 0.5,
        }
    }
}

impl DbgdConfig {
    pub fn barrier(&self) -> BarrierSettings {
        BarrierSettings {
            beta: self.beta,
            tau: self.tau,
        }
    }

    pub fn rule(&self) -> DirectionRule {
        match self.variant {
            Variant::Dbgd => DirectionRule::Dbgd(self.barrier()),
            Variant::Linear => DirectionRule::Linear(self.lambda_fixed),
            Variant::Inverse => DirectionRule::Inverse(self.barrier()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.barrier().validate()?;
        if self.variant == Variant::Linear && !(0.0..=1.0).contains(&self.lambda_fixed) {
            return Err(Error::Config("dbgd.lambda_fixed must be in [0, 1]".into()));
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_pair(grad_l: &[f64], grad_s: &[f64]) -> Result<()> {
    if grad_l.len() != grad_s.len() {
        return Err(Error::mismatch("direction gradients", grad_l.len(), grad_s.len()));
    }
    if grad_l.iter().chain(grad_s).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("direction gradients"));
    }
    Ok(())
}

/// Barrier direction: returns `(v, lambda)`; the caller descends along `v`.
pub fn dbgd_direction(grad_l: &[f64], grad_s: &[f64], settings: &BarrierSettings) -> Result<(Vec<f64>, f64)> {
    check_pair(grad_l, grad_s)?;
    let ns2 = dot(grad_s, grad_s);
    let lambda = ((settings.beta * ns2 + dot(grad_l, grad_s)) / ns2.max(settings.tau)).max(0.0);
    let v = grad_l.iter().zip(grad_s).map(|(l, s)| l - lambda * s).collect();
    Ok((v, lambda))
}

/// `v = (1 - lambda) grad_l - lambda grad_s`.
pub fn linear_combo_direction(grad_l: &[f64], grad_s: &[f64], lambda: f64) -> Vec<f64> {
    grad_l
        .iter()
        .zip(grad_s)
        .map(|(l, s)| (1.0 - lambda) * l - lambda * s)
        .collect()
}

/// Roles swapped: the loss is primary and the score secondary. The barrier
/// is put on `grad_l`, giving `v = -grad_s + lambda' grad_l` with
/// `lambda' = max((beta |grad_l|^2 + <grad_s, grad_l>) / |grad_l|^2, 0)`,
/// so that `<v, grad_l> >= beta |grad_l|^2`.
pub fn inverse_bilevel_direction(
    grad_l: &[f64],
    grad_s: &[f64],
    settings: &BarrierSettings,
) -> Result<(Vec<f64>, f64)> {
    check_pair(grad_l, grad_s)?;
    let nl2 = dot(grad_l, grad_l);
    let lambda = ((settings.beta * nl2 + dot(grad_s, grad_l)) / nl2.max(settings.tau)).max(0.0);
    let v = grad_l.iter().zip(grad_s).map(|(l, s)| -s + lambda * l).collect();
    Ok((v, lambda))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DirectionRule {
    Dbgd(BarrierSettings),
    Linear(f64),
    Inverse(BarrierSettings),
    /// Ignore the loss: `v = -grad_s`.
    ScoreOnly,
}

impl DirectionRule {
    pub fn direction(&self, grad_l: &[f64], grad_s: &[f64]) -> Result<(Vec<f64>, f64)> {
        match self {
            DirectionRule::Dbgd(b) => dbgd_direction(grad_l, grad_s, b),
            DirectionRule::Inverse(b) => inverse_bilevel_direction(grad_l, grad_s, b),
            DirectionRule::Linear(lam) => {
                check_pair(grad_l, grad_s)?;
                Ok((linear_combo_direction(grad_l, grad_s, *lam), *lam))
            }
            DirectionRule::ScoreOnly => {
                check_pair(grad_l, grad_s)?;
                Ok((grad_s.iter().map(|s| -s).collect(), 0.0))
            }
        }
    }
}

/// Primary score, secondary loss and both gradients at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct BiEval {
    pub s: f64,
    pub grad_s: Vec<f64>,
    pub l: f64,
    pub grad_l: Vec<f64>,
}

/// How the direction is turned into a parameter update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stepper {
    /// `v` is fed to Adam as the gradient.
    Adam(AdamSettings),
    /// `x <- x - step * v`.
    Gradient { step: f64 },
}

/// Iterates `x <- update(x, v(x))` for `iters` steps. `eval(x, t)` evaluates
/// both objectives at iterate `t`. The trace has `iters + 1` rows, the last
/// one at the returned point.
pub fn bilevel_descent<F>(
    eval: F,
    x0: Vec<f64>,
    rule: DirectionRule,
    stepper: Stepper,
    iters: usize,
) -> Result<(Vec<f64>, ScoreTrace)>
where
    F: Fn(&[f64], usize) -> Result<BiEval>,
{
    let mut x = x0;
    let mut adam = match stepper {
        Stepper::Adam(s) => Some(AdamState::new(x.len(), s)),
        Stepper::Gradient { .. } => None,
    };
    let mut trace = ScoreTrace::new();
    for t in 0..=iters {
        let e = eval(&x, t)?;
        if e.grad_s.len() != x.len() || e.grad_l.len() != x.len() {
            return Err(Error::mismatch("bi-objective gradient", x.len(), e.grad_s.len()));
        }
        let finite = e.s.is_finite() && e.l.is_finite() && e.grad_s.iter().chain(&e.grad_l).all(|v| v.is_finite());
        let (v, lambda) = if finite {
            rule.direction(&e.grad_l, &e.grad_s)?
        } else {
            (Vec::new(), f64::NAN)
        };
        trace.push(TraceRow {
            iter: t,
            s: e.s,
            l: e.l,
            lambda,
            gnorm_s: dot(&e.grad_s, &e.grad_s).sqrt(),
            gnorm_l: dot(&e.grad_l, &e.grad_l).sqrt(),
        })?;
        if !finite {
            return Err(Error::Diverged {
                iteration: t,
                what: "objective",
                trace: Box::new(trace),
            });
        }
        if t == iters {
            break;
        }
        match (&mut adam, stepper) {
            (Some(a), _) => a.step(&v, &mut x)?,
            (None, Stepper::Gradient { step }) => {
                for (xi, vi) in x.iter_mut().zip(&v) {
                    *xi -= step * vi;
                }
            }
            (None, Stepper::Adam(_)) => unreachable!(),
        }
    }
    Ok((x, trace))
}

/// Barrier descent with Adam applied to the direction.
pub fn dbgd_optimize<F>(
    eval: F,
    x0: Vec<f64>,
    settings: &BarrierSettings,
    opt: &OptimSettings,
) -> Result<(Vec<f64>, ScoreTrace)>
where
    F: Fn(&[f64], usize) -> Result<BiEval>,
{
    settings.validate()?;
    bilevel_descent(
        eval,
        x0,
        DirectionRule::Dbgd(*settings),
        Stepper::Adam(opt.adam()),
        opt.iters,
    )
}

/// `s(x) = -x1^2`, `l(x) = (x1 - 1)^2 + (x2 - 1)^2`: the loss minimizer on
/// the score's optimum set `{x1 = 0}` is `(0, 1)`; the unconstrained loss
/// minimizer is `(1, 1)`.
pub fn quadratic_oracle(x: &[f64], _t: usize) -> Result<BiEval> {
    Ok(BiEval {
        s: -x[0] * x[0],
        grad_s: vec![-2.0 * x[0], 0.0],
        l: (x[0] - 1.0).powi(2) + (x[1] - 1.0).powi(2),
        grad_l: vec![2.0 * (x[0] - 1.0), 2.0 * (x[1] - 1.0)],
    })
}
