use crate::error::{Error, Result};

/// One sampled mini-batch: `K` draws with replacement, each carrying its
/// index, per-example gradient, gradient norm, and the sampling
/// probability at draw time. The stored probabilities are what make the
/// estimate unbiased, so they must come from the distribution the batch
/// was actually drawn from.
#[derive(Debug, Clone)]
pub struct MiniBatch {
    pub indices: Vec<usize>,
    pub grads: Vec<Vec<f64>>,
    pub norms: Vec<f64>,
    pub probs: Vec<f64>,
}

impl MiniBatch {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// An unbiased estimate of the full-dataset gradient, plus the
/// per-example norms that produced it (the bandit's feedback).
#[derive(Debug, Clone)]
pub struct GradientEstimate {
    pub values: Vec<f64>,
    pub norms: Vec<f64>,
}

/// Importance-weighted batch estimate
/// `(1/K) sum_k g_{I_k} / (n p_{I_k})`.
///
/// Each draw's gradient is divided by `n` times its sampling probability,
/// so the expectation over batch draws equals the full-dataset mean
/// gradient for any floored distribution. Under uniform probabilities
/// `n p = 1` and the estimate reduces to the plain batch mean.
/// Summation runs in draw order to keep results reproducible.
pub fn unbiased_estimate(batch: &MiniBatch, n: usize) -> Result<GradientEstimate> {
    let k = batch.len();
    if k == 0 {
        return Err(Error::InvalidConfig("empty mini-batch".into()));
    }
    if batch.grads.len() != k || batch.probs.len() != k || batch.norms.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: batch.grads.len().min(batch.probs.len()).min(batch.norms.len()),
        });
    }
    let dim = batch.grads[0].len();
    let n_f = n as f64;

    let mut values = vec![0.0; dim];
    for draw in 0..k {
        let grad = &batch.grads[draw];
        if grad.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: grad.len(),
            });
        }
        let p = batch.probs[draw];
        if !(p > 0.0) {
            return Err(Error::ZeroProbability {
                example: batch.indices[draw],
            });
        }
        let denom = n_f * p;
        for (acc, g) in values.iter_mut().zip(grad) {
            *acc += g / denom;
        }
    }
    let inv_k = 1.0 / k as f64;
    for v in &mut values {
        *v *= inv_k;
    }
    Ok(GradientEstimate {
        values,
        norms: batch.norms.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch(indices: Vec<usize>, grads: Vec<Vec<f64>>, probs: Vec<f64>) -> MiniBatch {
        let norms = grads
            .iter()
            .map(|g| g.iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect();
        MiniBatch {
            indices,
            grads,
            norms,
            probs,
        }
    }

    #[test]
    fn uniform_single_draw_reduces_to_gradient() {
        // n=2, p=1/2: n*p = 1, so the estimate is the drawn gradient.
        let b = batch(vec![0], vec![vec![1.0, 0.0]], vec![0.5]);
        let est = unbiased_estimate(&b, 2).unwrap();
        assert_eq!(est.values, vec![1.0, 0.0]);
    }

    #[test]
    fn skewed_probability_reweights() {
        // g_1 / (2 * 0.2) = (0, 2.5).
        let b = batch(vec![1], vec![vec![0.0, 1.0]], vec![0.2]);
        let est = unbiased_estimate(&b, 2).unwrap();
        assert!((est.values[0]).abs() < 1e-15);
        assert!((est.values[1] - 2.5).abs() < 1e-15);
    }

    #[test]
    fn enumeration_over_two_draw_batches_is_unbiased() {
        // n=2, K=2, p=(0.8, 0.2): averaging the estimator over all four
        // ordered batches weighted by their probability recovers the mean
        // gradient exactly.
        let grads = [vec![1.0, 0.0], vec![0.0, 1.0]];
        let probs = [0.8, 0.2];
        let mut expectation = vec![0.0, 0.0];
        for a in 0..2 {
            for b_idx in 0..2 {
                let weight = probs[a] * probs[b_idx];
                let b = batch(
                    vec![a, b_idx],
                    vec![grads[a].clone(), grads[b_idx].clone()],
                    vec![probs[a], probs[b_idx]],
                );
                let est = unbiased_estimate(&b, 2).unwrap();
                for (acc, v) in expectation.iter_mut().zip(&est.values) {
                    *acc += weight * v;
                }
            }
        }
        assert!((expectation[0] - 0.5).abs() < 1e-12);
        assert!((expectation[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_probability_is_a_contract_violation() {
        let b = batch(vec![0], vec![vec![1.0]], vec![0.0]);
        assert!(matches!(
            unbiased_estimate(&b, 1),
            Err(Error::ZeroProbability { example: 0 })
        ));
    }
}
