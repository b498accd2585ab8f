use super::{dot, labels_as_zero_one, sigmoid, softplus, validate_features, Objective};
use crate::error::{Error, Result};

/// Binary logistic regression: `f_j(theta) = ln(1 + exp(z_j . theta))
/// - y_j (z_j . theta)` with labels in `{0, 1}`.
///
/// The convex testbed for the convergence benchmarks.
pub struct LogisticRegression {
    features: Vec<Vec<f64>>,
    labels: Vec<f64>,
    dim: usize,
}

impl LogisticRegression {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self> {
        let dim = validate_features(&features)?;
        if labels.len() != features.len() {
            return Err(Error::DimensionMismatch {
                expected: features.len(),
                got: labels.len(),
            });
        }
        let labels = labels_as_zero_one(&labels)?;
        Ok(LogisticRegression {
            features,
            labels,
            dim,
        })
    }
}

impl Objective for LogisticRegression {
    fn dim(&self) -> usize {
        self.dim
    }

    fn num_examples(&self) -> usize {
        self.features.len()
    }

    fn per_example_loss(&self, theta: &[f64], example: usize) -> f64 {
        let margin = dot(&self.features[example], theta);
        softplus(margin) - self.labels[example] * margin
    }

    fn per_example_grad(&self, theta: &[f64], example: usize) -> Vec<f64> {
        let z = &self.features[example];
        let coef = sigmoid(dot(z, theta)) - self.labels[example];
        z.iter().map(|&zi| coef * zi).collect()
    }
}
