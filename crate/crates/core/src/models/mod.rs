//! Desk-scale differentiable objectives.
//!
//! Every model exposes per-example losses, per-example gradients and
//! gradient norms; those are the quantities the training loop and the
//! bandit feed on. Evaluations are pure functions of `(theta, example)`,
//! so they can run in any order or in parallel.

mod logistic;
mod mlp;
mod one_neuron;

pub use logistic::LogisticRegression;
pub use mlp::SmallMlp;
pub use one_neuron::OneNeuronRelu;

use crate::error::{Error, Result};
use crate::util::l2_norm;

/// A differentiable objective of the form `f(theta) = mean_j f_j(theta)`.
pub trait Objective {
    /// Parameter dimension.
    fn dim(&self) -> usize;

    /// Number of training examples.
    fn num_examples(&self) -> usize;

    fn per_example_loss(&self, theta: &[f64], example: usize) -> f64;

    fn per_example_grad(&self, theta: &[f64], example: usize) -> Vec<f64>;

    /// Euclidean norm of the per-example gradient.
    fn grad_norm(&self, theta: &[f64], example: usize) -> f64 {
        l2_norm(&self.per_example_grad(theta, example))
    }

    /// Mean per-example loss over the whole dataset.
    fn full_loss(&self, theta: &[f64]) -> f64 {
        let n = self.num_examples();
        (0..n).map(|j| self.per_example_loss(theta, j)).sum::<f64>() / n as f64
    }

    /// Mean per-example gradient (the full-dataset gradient).
    fn mean_grad(&self, theta: &[f64]) -> Vec<f64> {
        let n = self.num_examples();
        let mut acc = vec![0.0; self.dim()];
        for j in 0..n {
            for (a, g) in acc.iter_mut().zip(self.per_example_grad(theta, j)) {
                *a += g;
            }
        }
        for a in &mut acc {
            *a /= n as f64;
        }
        acc
    }

    /// Starting parameters for training; zero unless the model needs a
    /// symmetry-breaking initialization.
    fn initial_theta(&self) -> Vec<f64> {
        vec![0.0; self.dim()]
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + exp(x))` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn validate_features(features: &[Vec<f64>]) -> Result<usize> {
    let n = features.len();
    if n == 0 {
        return Err(Error::InvalidConfig("need at least one example".into()));
    }
    let dim = features[0].len();
    if dim == 0 {
        return Err(Error::InvalidConfig("need at least one feature".into()));
    }
    for row in features {
        if row.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: row.len(),
            });
        }
        if row.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig("features must be finite".into()));
        }
    }
    Ok(dim)
}

/// Coerces labels to `{0, 1}`, accepting either `{0, 1}` or `{-1, +1}`.
pub(crate) fn labels_as_zero_one(labels: &[f64]) -> Result<Vec<f64>> {
    if labels.iter().all(|&y| y == 0.0 || y == 1.0) {
        return Ok(labels.to_vec());
    }
    if labels.iter().all(|&y| y == -1.0 || y == 1.0) {
        return Ok(labels.iter().map(|&y| if y > 0.0 { 1.0 } else { 0.0 }).collect());
    }
    Err(Error::InvalidConfig(
        "labels must be {0,1} or {-1,+1}".into(),
    ))
}

/// Coerces labels to `{-1, +1}`, accepting either convention.
pub(crate) fn labels_as_signs(labels: &[f64]) -> Result<Vec<f64>> {
    if labels.iter().all(|&y| y == -1.0 || y == 1.0) {
        return Ok(labels.to_vec());
    }
    if labels.iter().all(|&y| y == 0.0 || y == 1.0) {
        return Ok(labels.iter().map(|&y| if y > 0.0 { 1.0 } else { -1.0 }).collect());
    }
    Err(Error::InvalidConfig(
        "labels must be {0,1} or {-1,+1}".into(),
    ))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_coercion() {
        assert_eq!(labels_as_zero_one(&[0.0, 1.0]).unwrap(), vec![0.0, 1.0]);
        assert_eq!(labels_as_zero_one(&[-1.0, 1.0]).unwrap(), vec![0.0, 1.0]);
        assert_eq!(labels_as_signs(&[0.0, 1.0]).unwrap(), vec![-1.0, 1.0]);
        assert_eq!(labels_as_signs(&[-1.0, 1.0]).unwrap(), vec![-1.0, 1.0]);
        assert!(labels_as_zero_one(&[2.0]).is_err());
    }

    #[test]
    fn ragged_features_rejected() {
        let rows = vec![vec![1.0, 2.0], vec![3.0]];
        assert!(matches!(
            validate_features(&rows),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn stable_sigmoid_and_softplus() {
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
        assert!(sigmoid(800.0) == 1.0);
        assert!(sigmoid(-700.0) > 0.0);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(-800.0).is_finite());
        assert!((softplus(0.0) - 2.0_f64.ln()).abs() < 1e-15);
        assert!((softplus(50.0) - 50.0).abs() < 1e-12);
        assert!(softplus(-745.0) > 0.0);
    }
}
