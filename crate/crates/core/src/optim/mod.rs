//! Parameter-update side: Adam and AMSGrad steps driven by
//! importance-weighted gradient estimates, plus the training loop.

mod estimate;
mod train;

pub use estimate::{unbiased_estimate, GradientEstimate, MiniBatch};
pub use train::{train, write_metrics_csv, RunMetrics, SamplingStrategy, Trainer};

use crate::error::{Error, Result};

/// Learning-rate schedule for the parameter step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LrSchedule {
    /// `alpha` at every step (the experimental default).
    Constant,
    /// `alpha / sqrt(t)` (the schedule the regret analysis assumes).
    InverseSqrt,
}

/// Which optimizer drives the parameter update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimMethod {
    Adam,
    AmsGrad,
}

#[derive(Debug, Clone)]
pub struct OptimConfig {
    pub learning_rate: f64,
    /// First-moment decay, in `[0, 1)`.
    pub beta1: f64,
    /// Second-moment decay, in `[0, 1)`.
    pub beta2: f64,
    /// Denominator stabilizer, added outside the square root.
    pub epsilon: f64,
    /// Per-step multiplier `lambda` on `beta1`: the effective first-moment
    /// decay at step `t` is `beta1 * lambda^(t-1)`. 1 disables the decay.
    pub beta1_decay: f64,
    pub lr_schedule: LrSchedule,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            beta1_decay: 1.0,
            lr_schedule: LrSchedule::Constant,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.beta1) {
            return Err(Error::InvalidConfig(format!(
                "beta1 must be in [0, 1), got {}",
                self.beta1
            )));
        }
        if !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::InvalidConfig(format!(
                "beta2 must be in [0, 1), got {}",
                self.beta2
            )));
        }
        // Convergence analyses require beta1^2 / sqrt(beta2) < 1.
        if !(self.beta1 * self.beta1 < self.beta2.sqrt()) {
            return Err(Error::InvalidConfig(format!(
                "require beta1^2 < sqrt(beta2): beta1 = {}, beta2 = {}",
                self.beta1, self.beta2
            )));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be positive and finite, got {}",
                self.epsilon
            )));
        }
        if !(self.beta1_decay > 0.0 && self.beta1_decay <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "beta1_decay must be in (0, 1], got {}",
                self.beta1_decay
            )));
        }
        Ok(())
    }

    fn step_learning_rate(&self, step: usize) -> f64 {
        match self.lr_schedule {
            LrSchedule::Constant => self.learning_rate,
            LrSchedule::InverseSqrt => self.learning_rate / (step as f64).sqrt(),
        }
    }
}

/// Exponential moving averages of the gradient and squared gradient, plus
/// the running maximum of the bias-corrected second moment for AMSGrad.
#[derive(Debug, Clone)]
pub struct MomentState {
    first: Vec<f64>,
    second: Vec<f64>,
    max_corrected_second: Option<Vec<f64>>,
    step: usize,
}

impl MomentState {
    pub fn for_adam(dim: usize) -> Self {
        MomentState {
            first: vec![0.0; dim],
            second: vec![0.0; dim],
            max_corrected_second: None,
            step: 0,
        }
    }

    pub fn for_amsgrad(dim: usize) -> Self {
        MomentState {
            first: vec![0.0; dim],
            second: vec![0.0; dim],
            max_corrected_second: Some(vec![0.0; dim]),
            step: 0,
        }
    }

    pub fn for_method(method: OptimMethod, dim: usize) -> Self {
        match method {
            OptimMethod::Adam => Self::for_adam(dim),
            OptimMethod::AmsGrad => Self::for_amsgrad(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    /// Completed update count; starts at zero.
    pub fn step(&self) -> usize {
        self.step
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.first
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.second
    }

    /// AMSGrad's running max of the bias-corrected second moment;
    /// `None` for plain Adam.
    pub fn max_corrected_second(&self) -> Option<&[f64]> {
        self.max_corrected_second.as_deref()
    }
}

/// One Adam update in place:
/// `m <- beta1_t m + (1 - beta1_t) g`, `v <- beta2 v + (1 - beta2) g^2`,
/// bias corrections `m / (1 - beta1^t)` and `v / (1 - beta2^t)` (the
/// correction always uses the undecayed `beta1`), then
/// `theta <- theta - lr_t * m_hat / (sqrt(v_hat) + eps)`.
pub fn adam_step(
    state: &mut MomentState,
    theta: &mut [f64],
    grad: &[f64],
    config: &OptimConfig,
) -> Result<()> {
    step_impl(state, theta, grad, config, false)
}

/// One AMSGrad update in place: as [`adam_step`] except the denominator
/// uses the elementwise running maximum of the bias-corrected second
/// moment, which never decreases.
pub fn amsgrad_step(
    state: &mut MomentState,
    theta: &mut [f64],
    grad: &[f64],
    config: &OptimConfig,
) -> Result<()> {
    if state.max_corrected_second.is_none() {
        return Err(Error::InvalidConfig(
            "amsgrad_step needs a state built with MomentState::for_amsgrad".into(),
        ));
    }
    step_impl(state, theta, grad, config, true)
}

fn step_impl(
    state: &mut MomentState,
    theta: &mut [f64],
    grad: &[f64],
    config: &OptimConfig,
    use_running_max: bool,
) -> Result<()> {
    let dim = state.dim();
    if theta.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: theta.len(),
        });
    }
    if grad.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: grad.len(),
        });
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteEstimate);
    }

    let step = state.step + 1;
    let beta1_t = config.beta1 * config.beta1_decay.powi(step as i32 - 1);
    let beta2 = config.beta2;
    let bias1 = 1.0 - config.beta1.powi(step as i32);
    let bias2 = 1.0 - beta2.powi(step as i32);
    let lr = config.step_learning_rate(step);

    for i in 0..dim {
        let g = grad[i];
        state.first[i] = beta1_t * state.first[i] + (1.0 - beta1_t) * g;
        state.second[i] = beta2 * state.second[i] + (1.0 - beta2) * g * g;
        let m_hat = state.first[i] / bias1;
        let v_hat = state.second[i] / bias2;
        let denom_sq = match &mut state.max_corrected_second {
            Some(max_v) if use_running_max => {
                max_v[i] = max_v[i].max(v_hat);
                max_v[i]
            }
            _ => v_hat,
        };
        theta[i] -= lr * m_hat / (denom_sq.sqrt() + config.epsilon);
    }
    state.step = step;
    Ok(())
}
