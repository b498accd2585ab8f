use super::{dot, labels_as_signs, sigmoid, softplus, validate_features, Objective};
use crate::error::{Error, Result};

/// Single ReLU neuron feeding a sigmoid output with cross-entropy loss:
/// `f_j(theta) = -y_j ln sigma(relu(z_j . theta))` with labels in
/// `{-1, +1}`, and gradient
/// `-y_j (1 - sigma(relu(z_j . theta))) 1(z_j . theta > 0) z_j`.
///
/// The ReLU subgradient at zero is taken as zero (the indicator is
/// strict). For `y = -1` the loss is unbounded below, so this model is
/// kept for gradient-norm scaling studies — its gradient norms satisfy
/// `|g_j| <= |z_j|` — not as a training objective.
pub struct OneNeuronRelu {
    features: Vec<Vec<f64>>,
    labels: Vec<f64>,
    dim: usize,
}

impl OneNeuronRelu {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self> {
        let dim = validate_features(&features)?;
        if labels.len() != features.len() {
            return Err(Error::DimensionMismatch {
                expected: features.len(),
                got: labels.len(),
            });
        }
        let labels = labels_as_signs(&labels)?;
        Ok(OneNeuronRelu {
            features,
            labels,
            dim,
        })
    }
}

impl Objective for OneNeuronRelu {
    fn dim(&self) -> usize {
        self.dim
    }

    fn num_examples(&self) -> usize {
        self.features.len()
    }

    fn per_example_loss(&self, theta: &[f64], example: usize) -> f64 {
        let preact = dot(&self.features[example], theta).max(0.0);
        // -y ln sigma(r) = y softplus(-r)
        self.labels[example] * softplus(-preact)
    }

    fn per_example_grad(&self, theta: &[f64], example: usize) -> Vec<f64> {
        let z = &self.features[example];
        let preact = dot(z, theta);
        if preact <= 0.0 {
            return vec![0.0; self.dim];
        }
        let coef = -self.labels[example] * (1.0 - sigmoid(preact));
        z.iter().map(|&zi| coef * zi).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::testing::{finite_difference_grad, max_relative_error};
    use crate::util::l2_norm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn inactive_relu_gives_zero_gradient() {
        let model = OneNeuronRelu::new(vec![vec![1.0, 2.0]], vec![1.0]).unwrap();
        let grad = model.per_example_grad(&[-1.0, 0.0], 0);
        assert_eq!(grad, vec![0.0, 0.0]);
        // Exactly at the kink as well.
        let grad = model.per_example_grad(&[0.0, 0.0], 0);
        assert_eq!(grad, vec![0.0, 0.0]);
    }

    #[test]
    fn grad_norm_bounded_by_feature_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let z: Vec<f64> = (0..6).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let y = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let theta: Vec<f64> = (0..6).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let feature_norm = l2_norm(&z);
            let model = OneNeuronRelu::new(vec![z], vec![y]).unwrap();
            let g = model.grad_norm(&theta, 0);
            assert!(g * g <= feature_norm * feature_norm + 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_differences_in_active_region() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut checked = 0;
        while checked < 20 {
            let z: Vec<f64> = (0..4).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let y = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let theta: Vec<f64> = (0..4).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            // Stay away from the kink so central differences are valid.
            if dot(&z, &theta) < 1e-2 {
                continue;
            }
            let model = OneNeuronRelu::new(vec![z], vec![y]).unwrap();
            let analytic = model.per_example_grad(&theta, 0);
            let numeric = finite_difference_grad(&model, &theta, 0, 1e-6);
            assert!(max_relative_error(&analytic, &numeric) < 1e-5);
            checked += 1;
        }
    }
}
