use rand::Rng;

use super::{dot, labels_as_zero_one, sigmoid, softplus, validate_features, Objective};
use crate::error::{Error, Result};

/// One-hidden-layer perceptron: ReLU hidden units, sigmoid output,
/// cross-entropy loss, labels in `{0, 1}`. Gradients by hand-rolled
/// backpropagation; the nonconvex testbed.
///
/// Parameter layout: `[w1 (hidden x d, row-major) | b1 | w2 | b2]`.
pub struct SmallMlp {
    features: Vec<Vec<f64>>,
    labels: Vec<f64>,
    input_dim: usize,
    hidden: usize,
    init: Vec<f64>,
}

impl SmallMlp {
    /// Builds the model with a deterministic symmetry-breaking
    /// initialization drawn from `rng` (weights uniform in
    /// `[-0.5, 0.5] / sqrt(fan_in)`, biases zero).
    pub fn new<R: Rng + ?Sized>(
        features: Vec<Vec<f64>>,
        labels: Vec<f64>,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let input_dim = validate_features(&features)?;
        if hidden == 0 {
            return Err(Error::InvalidConfig("need at least one hidden unit".into()));
        }
        if labels.len() != features.len() {
            return Err(Error::DimensionMismatch {
                expected: features.len(),
                got: labels.len(),
            });
        }
        let labels = labels_as_zero_one(&labels)?;

        let dim = hidden * (input_dim + 2) + 1;
        let mut init = vec![0.0; dim];
        let w1_scale = 1.0 / (input_dim as f64).sqrt();
        for w in init.iter_mut().take(hidden * input_dim) {
            *w = (rng.random::<f64>() - 0.5) * w1_scale;
        }
        let w2_scale = 1.0 / (hidden as f64).sqrt();
        let w2_start = hidden * input_dim + hidden;
        for w in init.iter_mut().skip(w2_start).take(hidden) {
            *w = (rng.random::<f64>() - 0.5) * w2_scale;
        }

        Ok(SmallMlp {
            features,
            labels,
            input_dim,
            hidden,
            init,
        })
    }

    fn split<'a>(&self, theta: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64], f64) {
        let hd = self.hidden * self.input_dim;
        let w1 = &theta[..hd];
        let b1 = &theta[hd..hd + self.hidden];
        let w2 = &theta[hd + self.hidden..hd + 2 * self.hidden];
        let b2 = theta[hd + 2 * self.hidden];
        (w1, b1, w2, b2)
    }

    /// Forward pass: (hidden preactivations, logit).
    fn forward(&self, theta: &[f64], example: usize) -> (Vec<f64>, f64) {
        let (w1, b1, w2, b2) = self.split(theta);
        let z = &self.features[example];
        let mut preact = vec![0.0; self.hidden];
        let mut logit = b2;
        for h in 0..self.hidden {
            let row = &w1[h * self.input_dim..(h + 1) * self.input_dim];
            let a = b1[h] + dot(row, z);
            preact[h] = a;
            logit += w2[h] * a.max(0.0);
        }
        (preact, logit)
    }
}

impl Objective for SmallMlp {
    fn dim(&self) -> usize {
        self.hidden * (self.input_dim + 2) + 1
    }

    fn num_examples(&self) -> usize {
        self.features.len()
    }

    fn per_example_loss(&self, theta: &[f64], example: usize) -> f64 {
        let (_, logit) = self.forward(theta, example);
        softplus(logit) - self.labels[example] * logit
    }

    fn per_example_grad(&self, theta: &[f64], example: usize) -> Vec<f64> {
        let (preact, logit) = self.forward(theta, example);
        let (_, _, w2, _) = self.split(theta);
        let z = &self.features[example];
        let dlogit = sigmoid(logit) - self.labels[example];

        let hd = self.hidden * self.input_dim;
        let mut grad = vec![0.0; self.dim()];
        for h in 0..self.hidden {
            let active = preact[h] > 0.0;
            grad[hd + self.hidden + h] = dlogit * preact[h].max(0.0); // w2
            if active {
                let da = dlogit * w2[h];
                grad[hd + h] = da; // b1
                for (i, &zi) in z.iter().enumerate() {
                    grad[h * self.input_dim + i] = da * zi; // w1
                }
            }
        }
        grad[hd + 2 * self.hidden] = dlogit; // b2
        grad
    }

    fn initial_theta(&self) -> Vec<f64> {
        self.init.clone()
    }
}
