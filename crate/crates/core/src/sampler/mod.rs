//! Importance distribution over training examples, learned as a
//! multi-action adversarial bandit.
//!
//! The distribution assigns every example a sampling probability bounded
//! below by a floor `min_prob`. After each mini-batch the probabilities of
//! the sampled examples are updated multiplicatively from a bandit loss
//! that is inversely related to the example's gradient norm, then the
//! whole vector is projected back onto the floored simplex in KL
//! divergence. Examples with large gradients therefore gain probability.
//!
//! Sampling and the common-case update cost O(log n) per touched example:
//! probabilities live in a sum tree as unnormalized weights with one
//! global scale factor, so a projection that activates no floor
//! constraint is absorbed into the scale. Only a projection that pins new
//! entries at the floor forces an O(n) rebuild.

mod project;
mod tree;

pub use project::project_kl;
pub use tree::SumTree;

use std::io::{self, BufRead, Write};

use rand::Rng;

use crate::error::{Error, Result};
use crate::util::g17;

/// Weights are clamped here before projection so that a long run of
/// multiplicative updates cannot underflow to zero.
const WEIGHT_FLOOR: f64 = 1e-300;

/// Hyperparameters of the bandit that drives the example distribution.
#[derive(Debug, Clone)]
pub struct BanditConfig {
    /// Multiplicative-update step size (must be positive for learning;
    /// zero freezes the distribution, which is occasionally useful as a
    /// diagnostic).
    pub step_size: f64,
    /// Assumed bound on per-example gradient norms. `None` tracks the
    /// running maximum observed norm and uses 1.1x that value.
    pub grad_norm_bound: Option<f64>,
    /// Probability floor; every example keeps at least this mass.
    pub min_prob: f64,
    /// Bound on the Bregman divergence over the floored simplex; only
    /// enters the theoretical step-size formula.
    pub bregman_radius: f64,
    /// Planned iteration count; only enters the theoretical step-size
    /// formula.
    pub horizon: usize,
}

impl BanditConfig {
    /// Default configuration for `n` examples and a planned horizon:
    /// floor `1/(10n)`, Bregman radius `sqrt(log n)` (the divergence from
    /// a uniform start is at most `log n`), adaptive gradient-norm bound,
    /// and the theoretical step size evaluated at unit norm bound.
    pub fn for_dataset(n: usize, horizon: usize) -> Self {
        let min_prob = 1.0 / (10.0 * n.max(1) as f64);
        let bregman_radius = (n.max(2) as f64).ln().sqrt();
        let step_size =
            theoretical_step_size(bregman_radius, 1.0, min_prob, n.max(1), horizon.max(1));
        BanditConfig {
            step_size,
            grad_norm_bound: None,
            min_prob,
            bregman_radius,
            horizon: horizon.max(1),
        }
    }

    /// Checks every config invariant against a dataset of `n` examples.
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "step_size must be positive and finite, got {}",
                self.step_size
            )));
        }
        if let Some(bound) = self.grad_norm_bound {
            if !(bound > 0.0) || !bound.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "grad_norm_bound must be positive and finite, got {bound}"
                )));
            }
        }
        if !(self.min_prob > 0.0) || !self.min_prob.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "min_prob must be positive and finite, got {}",
                self.min_prob
            )));
        }
        if n as f64 * self.min_prob > 1.0 {
            return Err(Error::InfeasibleFloor {
                n,
                min_prob: self.min_prob,
            });
        }
        if !(self.bregman_radius > 0.0) || !self.bregman_radius.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "bregman_radius must be positive and finite, got {}",
                self.bregman_radius
            )));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be at least 1".into()));
        }
        Ok(())
    }

    /// Resolves the gradient-norm bound given the largest norm seen so far.
    pub fn effective_bound(&self, running_max: f64) -> f64 {
        match self.grad_norm_bound {
            Some(bound) => bound,
            None => (1.1 * running_max).max(1e-12),
        }
    }

    /// The step size suggested by the regret analysis, using this
    /// config's radius, floor and horizon. With an adaptive norm bound
    /// the formula is evaluated at unit bound.
    pub fn theoretical_step_size(&self, n: usize) -> f64 {
        theoretical_step_size(
            self.bregman_radius,
            self.grad_norm_bound.unwrap_or(1.0),
            self.min_prob,
            n,
            self.horizon,
        )
    }
}

/// Step size `sqrt(2 R^2 p_min^4 / (n T L^4))` that balances the
/// exploration and concentration terms of the bandit's regret over a
/// horizon of `T` rounds.
pub fn theoretical_step_size(
    bregman_radius: f64,
    grad_norm_bound: f64,
    min_prob: f64,
    n: usize,
    horizon: usize,
) -> f64 {
    let r2 = bregman_radius * bregman_radius;
    let p4 = min_prob.powi(4);
    let l4 = grad_norm_bound.powi(4);
    (2.0 * r2 * p4 / (n as f64 * horizon as f64 * l4)).sqrt()
}

/// Bandit loss fed back for a sampled example: `L^2/p_min^2 - g^2/p^2`.
///
/// The loss is zero for the largest admissible gradient at the floor and
/// maximal (`L^2/p_min^2`) for a zero gradient, so small-gradient examples
/// lose probability. A norm above the assumed bound is clamped with a
/// logged warning rather than rejected.
pub fn bandit_loss(grad_norm: f64, prob: f64, grad_norm_bound: f64, min_prob: f64) -> f64 {
    debug_assert!(grad_norm >= 0.0);
    debug_assert!(prob > 0.0);
    let g = if grad_norm > grad_norm_bound {
        log::warn!(
            "gradient norm {grad_norm} exceeds assumed bound {grad_norm_bound}; clamping"
        );
        grad_norm_bound
    } else {
        grad_norm
    };
    let cap = (grad_norm_bound / min_prob).powi(2);
    let loss = cap - (g / prob).powi(2);
    loss.clamp(0.0, cap)
}

/// Importance-weighted estimate of the full bandit loss vector from the
/// sampled batch: entry `j` is `loss_j * count_j / (K * p_j)`, zero for
/// examples outside the batch. Its expectation over batch draws equals
/// the per-example loss.
pub fn estimate_bandit_gradient(
    dist: &ExampleDistribution,
    batch_indices: &[usize],
    losses: &[f64],
) -> Result<Vec<f64>> {
    let n = dist.len();
    if batch_indices.len() != losses.len() {
        return Err(Error::DimensionMismatch {
            expected: batch_indices.len(),
            got: losses.len(),
        });
    }
    let k = batch_indices.len() as f64;
    let mut estimate = vec![0.0; n];
    for (&j, &loss) in batch_indices.iter().zip(losses) {
        if j >= n {
            return Err(Error::IndexOutOfRange { index: j, n });
        }
        estimate[j] += loss / (k * dist.prob(j));
    }
    Ok(estimate)
}

/// The bandit state: a probability per example, materialized as sum-tree
/// leaves (unnormalized weights) times a global scale.
#[derive(Debug, Clone)]
pub struct ExampleDistribution {
    tree: SumTree,
    scale: f64,
    min_prob: f64,
}

impl ExampleDistribution {
    /// Uniform distribution over `n` examples.
    pub fn new_uniform(n: usize, config: &BanditConfig) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidConfig("need at least one example".into()));
        }
        if !(config.min_prob > 0.0) || !config.min_prob.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "min_prob must be positive and finite, got {}",
                config.min_prob
            )));
        }
        if n as f64 * config.min_prob > 1.0 {
            return Err(Error::InfeasibleFloor {
                n,
                min_prob: config.min_prob,
            });
        }
        let uniform = vec![1.0 / n as f64; n];
        Ok(ExampleDistribution {
            tree: SumTree::from_values(&uniform),
            scale: 1.0,
            min_prob: config.min_prob,
        })
    }

    /// Reconstructs a distribution from explicit probabilities, e.g. a
    /// parsed snapshot. The vector must sum to one within 1e-9 and respect
    /// the floor.
    pub fn from_probs(probs: &[f64], min_prob: f64) -> Result<Self> {
        let n = probs.len();
        if n == 0 {
            return Err(Error::InvalidConfig("need at least one example".into()));
        }
        if n as f64 * min_prob > 1.0 {
            return Err(Error::InfeasibleFloor { n, min_prob });
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "probabilities sum to {sum}, expected 1"
            )));
        }
        if probs.iter().any(|&p| !p.is_finite() || p < min_prob) {
            return Err(Error::InvalidConfig(
                "probabilities must be finite and at least min_prob".into(),
            ));
        }
        Ok(ExampleDistribution {
            tree: SumTree::from_values(probs),
            scale: 1.0,
            min_prob,
        })
    }

    pub fn len(&self) -> usize {
        self.tree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.is_empty()
    }

    pub fn min_prob(&self) -> f64 {
        self.min_prob
    }

    /// Current sampling probability of example `j`.
    pub fn prob(&self, j: usize) -> f64 {
        self.scale * self.tree.leaf(j)
    }

    /// Materializes the probability vector (O(n)).
    pub fn probs(&self) -> Vec<f64> {
        self.tree.leaves().iter().map(|&w| self.scale * w).collect()
    }

    /// Unnormalized weights backing the distribution (the tree leaves).
    pub fn weights(&self) -> Vec<f64> {
        self.tree.leaves().to_vec()
    }

    /// Cumulative probability of examples `0..=j`, answered by the tree.
    pub fn prefix_prob(&self, j: usize) -> f64 {
        self.scale * self.tree.prefix_sum(j)
    }

    /// Shannon entropy `-sum p_j ln p_j`; equals `ln n` iff uniform.
    pub fn entropy(&self) -> f64 {
        self.tree
            .leaves()
            .iter()
            .map(|&w| {
                let p = self.scale * w;
                -p * p.ln()
            })
            .sum()
    }

    /// Draws one index with probability proportional to its weight.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let target = rng.random::<f64>() * self.tree.total();
        self.tree.descend(target)
    }

    /// Draws `batch_size` indices independently with replacement.
    pub fn sample_batch<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Vec<usize> {
        (0..batch_size).map(|_| self.sample(rng)).collect()
    }

    /// Applies one bandit round: multiplies each sampled example's weight
    /// by `exp(-step_size * h_j)` where `h_j` is the importance-weighted
    /// loss estimate, then projects back onto the floored simplex.
    ///
    /// `grad_norms` is aligned with `batch_indices` (one entry per draw;
    /// duplicate draws of the same example carry the same norm).
    /// `grad_norm_bound` is the resolved bound (see
    /// [`BanditConfig::effective_bound`]).
    ///
    /// When the projection activates no new floor constraint the update
    /// touches only the sampled leaves plus the global scale; otherwise
    /// the tree is rebuilt from the exact projection.
    pub fn update(
        &mut self,
        batch_indices: &[usize],
        grad_norms: &[f64],
        config: &BanditConfig,
        grad_norm_bound: f64,
    ) -> Result<()> {
        let n = self.len();
        if batch_indices.len() != grad_norms.len() {
            return Err(Error::DimensionMismatch {
                expected: batch_indices.len(),
                got: grad_norms.len(),
            });
        }
        if batch_indices.is_empty() {
            return Ok(());
        }
        for &j in batch_indices {
            if j >= n {
                return Err(Error::IndexOutOfRange { index: j, n });
            }
        }
        let k = batch_indices.len() as f64;

        // Collapse the batch to distinct indices with draw counts, sorted
        // for a deterministic evaluation order.
        let mut draws: Vec<(usize, f64)> = batch_indices
            .iter()
            .copied()
            .zip(grad_norms.iter().copied())
            .collect();
        draws.sort_by_key(|&(j, _)| j);
        let mut touched: Vec<(usize, f64, f64)> = Vec::with_capacity(draws.len());
        for (j, norm) in draws {
            match touched.last_mut() {
                Some(last) if last.0 == j => last.1 += 1.0,
                _ => touched.push((j, 1.0, norm)),
            }
        }

        // New unnormalized mass for each touched example. Losses are
        // nonnegative, so weights only shrink and the total mass stays <= 1.
        let mut updated: Vec<(usize, f64)> = Vec::with_capacity(touched.len());
        let mut mass_delta = 0.0;
        for &(j, count, norm) in &touched {
            let p_old = self.prob(j);
            let loss = bandit_loss(norm, p_old, grad_norm_bound, self.min_prob);
            let h = loss * count / (k * p_old);
            let w = (p_old * (-config.step_size * h).exp()).max(WEIGHT_FLOOR);
            mass_delta += w - p_old;
            updated.push((j, w));
        }
        let total_mass = 1.0 + mass_delta;

        // The cheap path needs a trustworthy total: when an update crushes
        // most of the mass, `1 + mass_delta` loses precision to
        // cancellation and the floor check below would be vacuous. Half
        // the mass gone in one round is far outside the normal regime, so
        // route that to the exact projection.
        let rescale_stays_feasible = total_mass <= 1.0
            && total_mass >= 0.5
            && updated
                .iter()
                .all(|&(_, w)| w >= self.min_prob * total_mass * (1.0 + 1e-12));

        if rescale_stays_feasible {
            // The projection is a pure rescale: write the touched leaves in
            // the current weight space and fold the normalizer into the
            // scale. O(K log n).
            let old_scale = self.scale;
            for &(j, w) in &updated {
                self.tree.set(j, w / old_scale);
            }
            self.scale = 1.0 / self.tree.total();
        } else {
            // A floor constraint activates: materialize, project exactly,
            // rebuild. O(n log n).
            let mut weights = self.probs();
            for &(j, w) in &updated {
                weights[j] = w;
            }
            let probs = project_kl(&weights, self.min_prob)?;
            self.tree = SumTree::from_values(&probs);
            self.scale = 1.0;
        }
        Ok(())
    }

    /// Writes the line-oriented snapshot form: a header `n=<n> p_min=<p>`
    /// followed by one `index<TAB>probability` line per example, floats at
    /// 17 significant digits.
    pub fn write_snapshot<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "n={} p_min={}", self.len(), g17(self.min_prob))?;
        for j in 0..self.len() {
            writeln!(out, "{}\t{}", j, g17(self.prob(j)))?;
        }
        Ok(())
    }

    /// Parses the snapshot form written by [`Self::write_snapshot`].
    /// Round-trips exactly at the printed precision.
    pub fn read_snapshot<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::Parse {
                line: 1,
                message: "missing header".into(),
            })?;
        let (n, min_prob) = parse_snapshot_header(&header)?;
        let mut probs = vec![0.0; n];
        for (offset, expected) in (0..n).enumerate() {
            let line_no = offset + 2;
            let line = lines.next().transpose()?.ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("expected {n} probability lines"),
            })?;
            let (idx_text, prob_text) = line.split_once('\t').ok_or_else(|| Error::Parse {
                line: line_no,
                message: "expected index<TAB>probability".into(),
            })?;
            let idx: usize = idx_text.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("bad index '{idx_text}'"),
            })?;
            if idx != expected {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected index {expected}, got {idx}"),
                });
            }
            probs[idx] = prob_text.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("bad probability '{prob_text}'"),
            })?;
        }
        Self::from_probs(&probs, min_prob)
    }
}

fn parse_snapshot_header(header: &str) -> Result<(usize, f64)> {
    let bad = |message: String| Error::Parse { line: 1, message };
    let mut n = None;
    let mut min_prob = None;
    for field in header.split_whitespace() {
        if let Some(value) = field.strip_prefix("n=") {
            n = Some(
                value
                    .parse()
                    .map_err(|_| bad(format!("bad n '{value}'")))?,
            );
        } else if let Some(value) = field.strip_prefix("p_min=") {
            min_prob = Some(
                value
                    .parse()
                    .map_err(|_| bad(format!("bad p_min '{value}'")))?,
            );
        }
    }
    match (n, min_prob) {
        (Some(n), Some(p)) => Ok((n, p)),
        _ => Err(bad("header must contain n= and p_min=".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn test_config(n: usize) -> BanditConfig {
        BanditConfig::for_dataset(n, 1000)
    }

    /// Reference projection by bisection on the scaling constant; shares
    /// no code with `project_kl`.
    fn bisect_project(weights: &[f64], min_prob: f64) -> Vec<f64> {
        let mass = |c: f64| -> f64 {
            weights.iter().map(|&w| (c * w).max(min_prob)).sum()
        };
        let mut lo = 0.0;
        let mut hi = 1.0
            / weights
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
        while mass(hi) < 1.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mass(mid) < 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        weights.iter().map(|&w| (hi * w).max(min_prob)).collect()
    }

    #[test]
    fn new_uniform_small() {
        let dist = ExampleDistribution::new_uniform(4, &test_config(4)).unwrap();
        assert_eq!(dist.probs(), vec![0.25; 4]);
    }

    #[test]
    fn new_uniform_degenerate() {
        let dist = ExampleDistribution::new_uniform(1, &test_config(1)).unwrap();
        assert_eq!(dist.probs(), vec![1.0]);
    }

    #[test]
    fn new_uniform_infeasible_floor() {
        let mut config = test_config(3);
        config.min_prob = 0.5;
        assert!(matches!(
            ExampleDistribution::new_uniform(3, &config),
            Err(Error::InfeasibleFloor { .. })
        ));
    }

    #[test]
    fn sampling_single_example() {
        let dist = ExampleDistribution::new_uniform(1, &test_config(1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(dist.sample_batch(3, &mut rng), vec![0, 0, 0]);
    }

    #[test]
    fn sampling_frequency_balanced() {
        let dist = ExampleDistribution::from_probs(&[0.5, 0.5], 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = 2_000_000usize;
        let zeros = (0..draws).filter(|_| dist.sample(&mut rng) == 0).count();
        let freq = zeros as f64 / draws as f64;
        assert!((freq - 0.5).abs() < 0.002, "freq = {freq}");
    }

    #[test]
    fn sampling_frequency_skewed() {
        let dist = ExampleDistribution::from_probs(&[0.1, 0.9], 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 1_000_000usize;
        let ones = (0..draws).filter(|_| dist.sample(&mut rng) == 1).count();
        let freq = ones as f64 / draws as f64;
        assert!((freq - 0.9).abs() < 0.002, "freq = {freq}");
    }

    #[test]
    fn bandit_loss_examples() {
        // Largest admissible gradient at the floor cancels exactly.
        assert_eq!(bandit_loss(1.0, 0.1, 1.0, 0.1), 0.0);
        // Zero gradient takes the maximal loss.
        assert_eq!(bandit_loss(0.0, 0.3, 1.0, 0.1), 100.0);
        // Direct arithmetic: -0.25/0.04 + 1/0.01.
        assert!((bandit_loss(0.5, 0.2, 1.0, 0.1) - 93.75).abs() < 1e-12);
    }

    #[test]
    fn bandit_loss_clamps_oversized_norm() {
        let at_bound = bandit_loss(1.0, 0.5, 1.0, 0.1);
        let clamped = bandit_loss(5.0, 0.5, 1.0, 0.1);
        assert_eq!(at_bound, clamped);
    }

    #[test]
    fn estimate_zero_outside_batch() {
        let dist = ExampleDistribution::from_probs(&[0.25; 4], 0.05).unwrap();
        let h = estimate_bandit_gradient(&dist, &[1, 1], &[2.0, 2.0]).unwrap();
        assert_eq!(h[0], 0.0);
        assert_eq!(h[2], 0.0);
        assert_eq!(h[3], 0.0);
        assert!(h[1] > 0.0);
    }

    #[test]
    fn estimate_direct_formula() {
        let dist = ExampleDistribution::from_probs(&[0.5, 0.5], 0.1).unwrap();
        let h = estimate_bandit_gradient(&dist, &[0], &[4.0]).unwrap();
        assert_eq!(h, vec![8.0, 0.0]);
    }

    #[test]
    fn estimate_is_unbiased_by_enumeration() {
        // n=2, K=1, fixed losses: E[h_j] over both one-draw batches equals l_j.
        let dist = ExampleDistribution::from_probs(&[0.5, 0.5], 0.1).unwrap();
        let losses = [4.0, 2.0];
        let mut expectation = [0.0; 2];
        for j in 0..2 {
            let h = estimate_bandit_gradient(&dist, &[j], &[losses[j]]).unwrap();
            for (acc, value) in expectation.iter_mut().zip(&h) {
                *acc += dist.prob(j) * value;
            }
        }
        assert!((expectation[0] - 4.0).abs() < 1e-12);
        assert!((expectation[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn index_out_of_range_rejected() {
        let dist = ExampleDistribution::from_probs(&[0.5, 0.5], 0.1).unwrap();
        assert!(matches!(
            estimate_bandit_gradient(&dist, &[2], &[1.0]),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn zero_loss_is_a_fixed_point() {
        // Every sampled example at the floor with the maximal admissible
        // norm gets zero loss, so nothing moves.
        let config = BanditConfig {
            step_size: 0.5,
            grad_norm_bound: Some(1.0),
            min_prob: 0.25,
            bregman_radius: 1.0,
            horizon: 100,
        };
        let mut dist = ExampleDistribution::new_uniform(4, &config).unwrap();
        let before = dist.probs();
        dist.update(&[0, 1, 2, 3], &[1.0, 1.0, 1.0, 1.0], &config, 1.0)
            .unwrap();
        assert_eq!(dist.probs(), before);
    }

    #[test]
    fn positive_loss_shrinks_sampled_example() {
        let config = BanditConfig {
            step_size: 0.01,
            grad_norm_bound: Some(1.0),
            min_prob: 0.01,
            bregman_radius: 1.0,
            horizon: 100,
        };
        let mut dist = ExampleDistribution::new_uniform(2, &config).unwrap();
        dist.update(&[1], &[0.2], &config, 1.0).unwrap();
        let probs = dist.probs();
        assert!(probs[1] < 0.5, "sampled low-norm example must lose mass");
        assert!(probs[0] > 0.5, "the other example must gain mass");
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn repeated_updates_concentrate_on_high_norm_example() {
        // Example 0 always reports the maximal norm, others zero; the
        // distribution must converge to 1 - 2*min_prob on example 0.
        // Cross-checked each round against a plain-vector simulation with
        // a bisection projection.
        let config = BanditConfig {
            step_size: 0.02,
            grad_norm_bound: Some(1.0),
            min_prob: 0.05,
            bregman_radius: 1.0,
            horizon: 100,
        };
        let mut dist = ExampleDistribution::new_uniform(3, &config).unwrap();
        let mut naive = vec![1.0 / 3.0; 3];
        let norms = [1.0, 0.0, 0.0];
        for _ in 0..100 {
            dist.update(&[0, 1, 2], &norms, &config, 1.0).unwrap();

            let k = 3.0;
            let mut weights = naive.clone();
            for j in 0..3 {
                let loss = (1.0 / config.min_prob.powi(2)) - (norms[j] / naive[j]).powi(2);
                let h = loss.max(0.0) / (k * naive[j]);
                weights[j] = naive[j] * (-config.step_size * h).exp();
            }
            naive = bisect_project(&weights, config.min_prob);

            let probs = dist.probs();
            for j in 0..3 {
                assert!(
                    (probs[j] - naive[j]).abs() < 1e-9,
                    "diverged from reference: {probs:?} vs {naive:?}"
                );
            }
        }
        assert!((dist.prob(0) - 0.9).abs() < 1e-3, "p0 = {}", dist.prob(0));
        assert!((dist.prob(1) - 0.05).abs() < 1e-9);
        assert!((dist.prob(2) - 0.05).abs() < 1e-9);
    }

    #[test]
    fn larger_norm_keeps_larger_probability() {
        // Gentle step so neither hypothetical update saturates at the
        // floor; a saturating step makes the ordering weak (both pinned).
        let config = BanditConfig {
            step_size: 0.001,
            grad_norm_bound: Some(1.0),
            min_prob: 0.1,
            bregman_radius: 1.0,
            horizon: 100,
        };
        let base = ExampleDistribution::from_probs(&[0.3, 0.3, 0.4], 0.1).unwrap();

        let mut high = base.clone();
        high.update(&[1], &[0.9], &config, 1.0).unwrap();
        let mut low = base.clone();
        low.update(&[1], &[0.1], &config, 1.0).unwrap();

        assert!(high.prob(1) > low.prob(1));
        assert!(high.prob(1) > config.min_prob);
    }

    #[test]
    fn theoretical_step_size_examples() {
        assert!((theoretical_step_size(1.0, 1.0, 1.0, 1, 2) - 1.0).abs() < 1e-15);
        let step = theoretical_step_size(1.0, 1.0, 0.1, 100, 10_000);
        assert!((step - 1.4142135623730951e-5).abs() < 1e-18);
        // Doubling the horizon divides the step by sqrt(2).
        let halved = theoretical_step_size(1.0, 1.0, 0.1, 100, 20_000);
        assert!((step / halved - 2.0_f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn entropy_examples() {
        let uniform = ExampleDistribution::new_uniform(8, &test_config(8)).unwrap();
        assert!((uniform.entropy() - 8.0_f64.ln()).abs() < 1e-12);

        let pair = ExampleDistribution::from_probs(&[0.5, 0.5], 0.1).unwrap();
        assert!((pair.entropy() - 2.0_f64.ln()).abs() < 1e-12);

        // Near-degenerate: entropy approaches zero as the floor shrinks.
        let floor = 1e-9;
        let mut probs = vec![floor; 4];
        probs[0] = 1.0 - 3.0 * floor;
        let spiky = ExampleDistribution::from_probs(&probs, floor).unwrap();
        assert!(spiky.entropy() < 1e-7);
    }

    #[test]
    fn snapshot_round_trip_is_exact() {
        let config = BanditConfig {
            step_size: 0.05,
            grad_norm_bound: Some(1.0),
            min_prob: 0.01,
            bregman_radius: 1.0,
            horizon: 100,
        };
        let mut dist = ExampleDistribution::new_uniform(7, &config).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..25 {
            let batch = dist.sample_batch(4, &mut rng);
            let norms: Vec<f64> = batch.iter().map(|_| rng.random::<f64>()).collect();
            dist.update(&batch, &norms, &config, 1.0).unwrap();
        }

        let mut first = Vec::new();
        dist.write_snapshot(&mut first).unwrap();
        let restored = ExampleDistribution::read_snapshot(first.as_slice()).unwrap();
        let mut second = Vec::new();
        restored.write_snapshot(&mut second).unwrap();
        assert_eq!(first, second);
        assert_eq!(restored.min_prob(), dist.min_prob());
    }

    #[test]
    fn snapshot_rejects_garbage() {
        assert!(matches!(
            ExampleDistribution::read_snapshot("nonsense\n".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            ExampleDistribution::read_snapshot("n=2 p_min=0.1\n0\t0.5\n".as_bytes()),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    proptest! {
        #[test]
        fn loss_stays_in_range(
            grad_norm in 0.0..10.0f64,
            prob in 0.01..1.0f64,
            bound in 0.1..10.0f64,
        ) {
            let min_prob = 0.01;
            let prob = prob.max(min_prob);
            let loss = bandit_loss(grad_norm, prob, bound, min_prob);
            let cap = (bound / min_prob).powi(2);
            prop_assert!(loss >= 0.0);
            prop_assert!(loss <= cap);
        }

        #[test]
        fn projection_is_feasible_idempotent_scale_invariant(
            weights in proptest::collection::vec(1e-6..1e3f64, 2..64),
            floor_frac in 0.0..0.9f64,
            scale in 1e-3..1e3f64,
        ) {
            let n = weights.len();
            let min_prob = floor_frac / n as f64;
            let q = project_kl(&weights, min_prob).unwrap();

            let sum: f64 = q.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            prop_assert!(q.iter().all(|&p| p >= min_prob - 1e-15));

            let twice = project_kl(&q, min_prob).unwrap();
            for (a, b) in q.iter().zip(&twice) {
                prop_assert!((a - b).abs() < 1e-12);
            }

            let scaled: Vec<f64> = weights.iter().map(|w| w * scale).collect();
            let q_scaled = project_kl(&scaled, min_prob).unwrap();
            for (a, b) in q.iter().zip(&q_scaled) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn updates_preserve_feasibility_and_tree_consistency(
            seed in 0u64..500,
            n in 2usize..40,
            batch_size in 1usize..12,
            rounds in 1usize..30,
        ) {
            let mut config = BanditConfig::for_dataset(n, 100);
            config.step_size = 0.05;
            config.grad_norm_bound = Some(1.0);
            let mut dist = ExampleDistribution::new_uniform(n, &config).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..rounds {
                let batch = dist.sample_batch(batch_size, &mut rng);
                let norms: Vec<f64> = batch.iter().map(|_| rng.random::<f64>()).collect();
                dist.update(&batch, &norms, &config, 1.0).unwrap();
            }

            let probs = dist.probs();
            let sum: f64 = probs.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9, "sum = {sum}");
            prop_assert!(probs.iter().all(|&p| p >= dist.min_prob()));

            let mut acc = 0.0;
            for (j, &p) in probs.iter().enumerate() {
                acc += p;
                prop_assert!((dist.prefix_prob(j) - acc).abs() < 1e-12);
            }
        }
    }
}
