//! Independent brute-force validators for the closed-form claims the
//! library relies on: exact batch-enumeration expectations, optimal
//! sampling distributions, floored water-filling, and the growth of
//! `sum_j |g_j|^2 / p_j` under uniform versus optimized sampling on
//! heavy-tailed data.
//!
//! Nothing here calls into the sampler or optimizer modules; agreement
//! between the two sides is genuine cross-validation.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::util::g17;

/// Hard cap on `n^K` for exact enumeration.
pub const ENUMERATION_BUDGET: u128 = 1_000_000;

/// Exact expectation `E[f(I_1..I_K)]` over all ordered batches of `K`
/// independent draws from `probs`, each batch weighted by the product of
/// its draw probabilities. `f` must return a vector of fixed dimension
/// `dim`.
pub fn enumerate_estimator_expectation<F>(
    probs: &[f64],
    batch_size: usize,
    dim: usize,
    mut estimator: F,
) -> Result<Vec<f64>>
where
    F: FnMut(&[usize]) -> Vec<f64>,
{
    let n = probs.len();
    if n == 0 || batch_size == 0 {
        return Err(Error::InvalidConfig(
            "need at least one example and one draw".into(),
        ));
    }
    if probs.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
        return Err(Error::InvalidConfig(
            "probabilities must be strictly positive".into(),
        ));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "probabilities sum to {sum}, expected 1"
        )));
    }
    let states = (n as u128)
        .checked_pow(batch_size as u32)
        .ok_or(Error::BudgetExceeded {
            states: u128::MAX,
            budget: ENUMERATION_BUDGET,
        })?;
    if states > ENUMERATION_BUDGET {
        return Err(Error::BudgetExceeded {
            states,
            budget: ENUMERATION_BUDGET,
        });
    }

    let mut batch = vec![0usize; batch_size];
    let mut expectation = vec![0.0; dim];
    loop {
        let weight: f64 = batch.iter().map(|&j| probs[j]).product();
        let value = estimator(&batch);
        debug_assert_eq!(value.len(), dim);
        for (acc, v) in expectation.iter_mut().zip(&value) {
            *acc += weight * v;
        }
        // Odometer increment over the n^K ordered batches.
        let mut pos = batch_size;
        loop {
            if pos == 0 {
                return Ok(expectation);
            }
            pos -= 1;
            batch[pos] += 1;
            if batch[pos] < n {
                break;
            }
            batch[pos] = 0;
        }
    }
}

/// Exact expectation of the importance-weighted batch-mean estimator
/// `(1/K) sum_k values[I_k] / (n p_{I_k})`, written out here rather than
/// calling the library's estimator. For any valid `probs` this equals the
/// plain mean of `values`.
pub fn enumerate_batch_expectation(
    probs: &[f64],
    values: &[Vec<f64>],
    batch_size: usize,
) -> Result<Vec<f64>> {
    let n = probs.len();
    if values.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: values.len(),
        });
    }
    let dim = values.first().map_or(0, Vec::len);
    let n_f = n as f64;
    let k_f = batch_size as f64;
    enumerate_estimator_expectation(probs, batch_size, dim, |batch| {
        let mut est = vec![0.0; dim];
        for &j in batch {
            for (acc, v) in est.iter_mut().zip(&values[j]) {
                *acc += v / (n_f * probs[j]);
            }
        }
        for e in &mut est {
            *e /= k_f;
        }
        est
    })
}

/// The variance-style objective `sum_j |g_j|^2 / p_j` that importance
/// sampling minimizes. Examples with zero norm contribute nothing even at
/// zero probability.
pub fn sampling_objective(grad_norms: &[f64], probs: &[f64]) -> f64 {
    grad_norms
        .iter()
        .zip(probs)
        .map(|(&g, &p)| if g == 0.0 { 0.0 } else { g * g / p })
        .sum()
}

/// Unconstrained-optimum sampling distribution over the simplex:
/// probabilities proportional to the gradient norms.
pub fn optimal_distribution(grad_norms: &[f64]) -> Result<Vec<f64>> {
    if grad_norms.is_empty() {
        return Err(Error::InvalidConfig("need at least one norm".into()));
    }
    if grad_norms.iter().any(|&g| g < 0.0 || !g.is_finite()) {
        return Err(Error::InvalidConfig(
            "gradient norms must be finite and nonnegative".into(),
        ));
    }
    let total: f64 = grad_norms.iter().sum();
    if total == 0.0 {
        return Err(Error::AllZeroNorms);
    }
    Ok(grad_norms.iter().map(|&g| g / total).collect())
}

/// Water-filling optimum of `min sum_j |g_j|^2 / p_j` over the floored
/// simplex: `p_j = max(min_prob, c |g_j|)` with `c` found by bisection on
/// the total mass. Deliberately a different algorithm from the library's
/// sort-and-scan projection.
pub fn floored_optimal_distribution(grad_norms: &[f64], min_prob: f64) -> Result<Vec<f64>> {
    let n = grad_norms.len();
    if n == 0 {
        return Err(Error::InvalidConfig("need at least one norm".into()));
    }
    if grad_norms.iter().any(|&g| g < 0.0 || !g.is_finite()) {
        return Err(Error::InvalidConfig(
            "gradient norms must be finite and nonnegative".into(),
        ));
    }
    if !(min_prob >= 0.0) || n as f64 * min_prob > 1.0 {
        return Err(Error::InfeasibleFloor { n, min_prob });
    }
    let total: f64 = grad_norms.iter().sum();
    if total == 0.0 {
        return Err(Error::AllZeroNorms);
    }

    let mass = |c: f64| -> f64 {
        grad_norms.iter().map(|&g| (c * g).max(min_prob)).sum()
    };
    let mut lo = 0.0;
    let mut hi = 1.0 / total.min(grad_norms.iter().cloned().fold(f64::INFINITY, f64::min).max(f64::MIN_POSITIVE));
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
    Ok(grad_norms.iter().map(|&g| (hi * g).max(min_prob)).collect())
}

/// Measured growth of a quantity over a grid of dataset sizes, with the
/// constant obtained by fitting `value / normalizer(n)` and the RMS
/// relative deviation of the per-point ratios from that constant.
#[derive(Debug, Clone)]
pub struct ScalingReport {
    /// `(n, measured value)`, strictly increasing in `n`.
    pub entries: Vec<(usize, f64)>,
    /// Name of the fitted growth model.
    pub model: String,
    /// Mean of `value / normalizer(n)` over the grid.
    pub fitted_constant: f64,
    /// RMS of `(ratio - fitted_constant) / fitted_constant`.
    pub fit_residual: f64,
}

impl ScalingReport {
    fn fit(entries: Vec<(usize, f64)>, model: &str, normalizer: impl Fn(usize) -> f64) -> Self {
        let ratios: Vec<f64> = entries
            .iter()
            .map(|&(n, value)| value / normalizer(n))
            .collect();
        let fitted_constant = ratios.iter().sum::<f64>() / ratios.len() as f64;
        let fit_residual = (ratios
            .iter()
            .map(|r| ((r - fitted_constant) / fitted_constant).powi(2))
            .sum::<f64>()
            / ratios.len() as f64)
            .sqrt();
        ScalingReport {
            entries,
            model: model.to_string(),
            fitted_constant,
            fit_residual,
        }
    }

    /// Ratios `value / normalizer(n)` implied by the fitted model name are
    /// not stored; this returns the raw measured values.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|&(_, v)| v)
    }

    /// CSV form `n,value,fit_residual` (the residual is a property of the
    /// whole fit and repeats on every row).
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "n,value,fit_residual")?;
        for &(n, value) in &self.entries {
            writeln!(out, "{},{},{}", n, g17(value), g17(self.fit_residual))?;
        }
        Ok(())
    }
}

/// Analytic expectation of the uniform-sampling objective on heavy-tailed
/// data with the `|g_j|^2 <= |z_j|^2` bound as proxy:
/// `n * beta3 * (sum_{j<=n} j^-gamma) * (sum_{i<=d} i^-gamma)`.
pub fn expected_uniform_objective(
    tail_exponent: f64,
    density_scale: f64,
    num_features: usize,
    num_examples: usize,
) -> f64 {
    let row: f64 = power_sum(num_examples, tail_exponent);
    let col: f64 = power_sum(num_features, tail_exponent);
    num_examples as f64 * density_scale * row * col
}

fn power_sum(upto: usize, exponent: f64) -> f64 {
    (1..=upto).map(|k| (k as f64).powf(-exponent)).sum()
}

fn validate_probe_args(tail_exponent: f64, density_scale: f64, n_grid: &[usize]) -> Result<()> {
    if !(tail_exponent >= 2.0) {
        return Err(Error::InvalidConfig(format!(
            "scaling probes assume tail_exponent >= 2, got {tail_exponent}"
        )));
    }
    if !(density_scale > 0.0 && density_scale <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "density_scale must be in (0, 1], got {density_scale}"
        )));
    }
    if n_grid.is_empty() || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(
            "n_grid must be nonempty and strictly increasing".into(),
        ));
    }
    Ok(())
}

fn mix_seed(root: u64, n: usize, trial: usize) -> u64 {
    // splitmix64 over the packed inputs.
    let mut x = root ^ (n as u64).wrapping_mul(0x9E3779B97F4A7C15) ^ (trial as u64).rotate_left(32);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D049BB133111EB);
    x ^ (x >> 31)
}

/// Monte-Carlo estimate of `E sum_j |z_j|^2 / p_j` under uniform sampling
/// (`p_j = 1/n`, so the quantity is `n E sum_j |z_j|^2`) on doubly
/// heavy-tailed draws, for each `n` in the grid. The squared feature
/// norms are generated here from the entrywise law, independently of the
/// data module. The fit normalizer is `density_scale * n * ln n * ln d`.
pub fn uniform_scaling_probe(
    tail_exponent: f64,
    density_scale: f64,
    num_features: usize,
    n_grid: &[usize],
    trials: usize,
    seed: u64,
) -> Result<ScalingReport> {
    validate_probe_args(tail_exponent, density_scale, n_grid)?;
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }

    let col_probs: Vec<f64> = (1..=num_features)
        .map(|i| density_scale * (i as f64).powf(-tail_exponent))
        .collect();

    let mut entries = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let mut acc = 0.0;
        for trial in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, n, trial));
            let mut total_sq = 0.0;
            for j in 1..=n {
                let row_factor = (j as f64).powf(-tail_exponent);
                for &cp in &col_probs {
                    if rng.random::<f64>() < cp * row_factor {
                        total_sq += 1.0;
                    }
                }
            }
            acc += total_sq;
        }
        entries.push((n, n as f64 * acc / trials as f64));
    }

    let d = num_features as f64;
    Ok(ScalingReport::fit(
        entries,
        "density_scale * n * ln(n) * ln(d)",
        move |n| density_scale * n as f64 * (n as f64).ln() * d.ln(),
    ))
}

/// Value of `min_{p_j >= 1/(10n)} sum_j E|z_j|^2 / p_j` on the same
/// heavy-tailed law, evaluated exactly through the water-filling optimum
/// on the analytic expected norms. The fit normalizer is
/// `ln(d) * ln(n)^2`. Deterministic, no sampling involved.
pub fn floored_scaling_probe(
    tail_exponent: f64,
    density_scale: f64,
    num_features: usize,
    n_grid: &[usize],
) -> Result<ScalingReport> {
    validate_probe_args(tail_exponent, density_scale, n_grid)?;

    let col_sum = power_sum(num_features, tail_exponent);
    let mut entries = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let min_prob = 1.0 / (10.0 * n as f64);
        let norms: Vec<f64> = (1..=n)
            .map(|j| (density_scale * (j as f64).powf(-tail_exponent) * col_sum).sqrt())
            .collect();
        let dist = floored_optimal_distribution(&norms, min_prob)?;
        entries.push((n, sampling_objective(&norms, &dist)));
    }

    let d = num_features as f64;
    Ok(ScalingReport::fit(
        entries,
        "ln(d) * ln(n)^2",
        move |n| d.ln() * (n as f64).ln().powi(2),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_recovers_the_mean_of_values() {
        let probs = [0.5, 0.3, 0.2];
        let values = vec![vec![1.0, 2.0], vec![-1.0, 0.5], vec![3.0, -2.0]];
        for k in 1..=3 {
            let expectation = enumerate_batch_expectation(&probs, &values, k).unwrap();
            for i in 0..2 {
                let mean = (values[0][i] + values[1][i] + values[2][i]) / 3.0;
                assert!(
                    (expectation[i] - mean).abs() < 1e-12,
                    "k = {k}, coord {i}"
                );
            }
        }
    }

    #[test]
    fn enumeration_matches_hand_expansion() {
        // n=2, K=2, p=(0.8, 0.2), scalar values (a, b). The four ordered
        // batches give
        //   0.64 * (a/1.6)        (batch 00: both draws a/(2*0.8), mean)
        //   0.16 * (a/3.2 + b/0.8)
        //   0.16 * (a/3.2 + b/0.8)
        //   0.04 * (b/0.4)
        let (a, b) = (3.0, -1.5);
        let hand = 0.64 * (a / 1.6)
            + 2.0 * 0.16 * (0.5 * (a / 1.6 + b / 0.4))
            + 0.04 * (b / 0.4);
        let expectation =
            enumerate_batch_expectation(&[0.8, 0.2], &[vec![a], vec![b]], 2).unwrap();
        assert!((expectation[0] - hand).abs() < 1e-12);
        assert!((expectation[0] - (a + b) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn enumeration_budget_enforced() {
        let probs = vec![1.0 / 40.0; 40];
        let values = vec![vec![1.0]; 40];
        assert!(matches!(
            enumerate_batch_expectation(&probs, &values, 4),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn point_mass_violates_the_floor_precondition() {
        let values = vec![vec![1.0], vec![2.0]];
        assert!(enumerate_batch_expectation(&[1.0, 0.0], &values, 1).is_err());
    }

    #[test]
    fn optimal_distribution_examples() {
        assert_eq!(
            optimal_distribution(&[1.0, 1.0, 1.0, 1.0]).unwrap(),
            vec![0.25; 4]
        );
        let p = optimal_distribution(&[3.0, 1.0]).unwrap();
        assert!((p[0] - 0.75).abs() < 1e-15);
        assert!((p[1] - 0.25).abs() < 1e-15);
        assert!(matches!(
            optimal_distribution(&[0.0, 0.0]),
            Err(Error::AllZeroNorms)
        ));
    }

    #[test]
    fn optimal_objective_is_cauchy_schwarz_tight() {
        let norms = [0.3, 1.7, 0.9, 2.4];
        let p = optimal_distribution(&norms).unwrap();
        let objective = sampling_objective(&norms, &p);
        let norm_sum: f64 = norms.iter().sum();
        assert!((objective - norm_sum * norm_sum).abs() < 1e-10);
    }

    #[test]
    fn optimal_distribution_beats_random_simplex_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let norms: Vec<f64> = (0..3).map(|_| rng.random::<f64>() + 0.1).collect();
        let best = sampling_objective(&norms, &optimal_distribution(&norms).unwrap());
        for _ in 0..10_000 {
            let raw: Vec<f64> = (0..3).map(|_| rng.random::<f64>() + 1e-9).collect();
            let total: f64 = raw.iter().sum();
            let p: Vec<f64> = raw.iter().map(|x| x / total).collect();
            assert!(best <= sampling_objective(&norms, &p) + 1e-12);
        }
    }

    #[test]
    fn floored_optimum_reduces_to_unfloored_at_zero() {
        let norms = [0.5, 2.5, 1.0];
        let unfloored = optimal_distribution(&norms).unwrap();
        let floored = floored_optimal_distribution(&norms, 0.0).unwrap();
        for (a, b) in unfloored.iter().zip(&floored) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn floored_optimum_pins_small_norms() {
        // Derived by 1-d grid search over p = (x, 1-x), x in [0.3, 0.7],
        // resolution 1e-5: the objective decreases toward the floor.
        let p = floored_optimal_distribution(&[3.0, 1.0], 0.3).unwrap();
        assert!((p[0] - 0.7).abs() < 1e-12);
        assert!((p[1] - 0.3).abs() < 1e-12);

        let objective = sampling_objective(&[3.0, 1.0], &p);
        let grid_best = (30_000..=70_000)
            .map(|i| {
                let x = i as f64 * 1e-5;
                sampling_objective(&[3.0, 1.0], &[1.0 - x, x])
            })
            .fold(f64::INFINITY, f64::min);
        assert!(objective <= grid_best + 1e-6);
    }

    #[test]
    fn floored_optimum_matches_grid_search_n3() {
        let norms = [2.0, 0.7, 0.25];
        let min_prob = 0.15;
        let p = floored_optimal_distribution(&norms, min_prob).unwrap();
        let objective = sampling_objective(&norms, &p);

        // Brute-force 2-d grid over the feasible simplex.
        let h = 1e-3;
        let mut best = f64::INFINITY;
        let steps = (1.0 / h) as usize;
        for a in 0..=steps {
            let pa = a as f64 * h;
            if pa < min_prob {
                continue;
            }
            for b in 0..=(steps - a) {
                let pb = b as f64 * h;
                let pc = 1.0 - pa - pb;
                if pb < min_prob || pc < min_prob - 1e-12 {
                    continue;
                }
                best = best.min(sampling_objective(&norms, &[pa, pb, pc.max(min_prob)]));
            }
        }
        assert!(objective <= best + 1e-6);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn uniform_probe_matches_analytic_expectation() {
        let (gamma, beta3, d, n) = (2.0, 1.0, 16, 64);
        let trials = 2000;
        let report =
            uniform_scaling_probe(gamma, beta3, d, &[n], trials, 42).unwrap();
        let measured = report.entries[0].1;
        let expected = expected_uniform_objective(gamma, beta3, d, n);

        // Per-trial variance of sum_j |z_j|^2 is sum over entries of
        // q(1-q); the reported value is n times the per-trial mean.
        let variance: f64 = (1..=n)
            .flat_map(|j| (1..=d).map(move |i| (j, i)))
            .map(|(j, i)| {
                let q = beta3 * (i as f64).powf(-gamma) * (j as f64).powf(-gamma);
                q * (1.0 - q)
            })
            .sum();
        let se = n as f64 * (variance / trials as f64).sqrt();
        assert!(
            (measured - expected).abs() < 3.0 * se,
            "measured {measured}, expected {expected}, se {se}"
        );
    }

    #[test]
    fn doubling_features_scales_by_column_sum_ratio() {
        let (gamma, beta3, n) = (2.0, 0.5, 100);
        let base = expected_uniform_objective(gamma, beta3, 32, n);
        let doubled = expected_uniform_objective(gamma, beta3, 64, n);
        let ratio = power_sum(64, gamma) / power_sum(32, gamma);
        assert!((doubled / base - ratio).abs() < 1e-12);
    }

    #[test]
    fn floored_probe_value_shrinks_with_smaller_floor() {
        let norms: Vec<f64> = (1..=50).map(|j| (j as f64).powf(-1.0)).collect();
        let loose = floored_optimal_distribution(&norms, 1.0 / 500.0).unwrap();
        let tight = floored_optimal_distribution(&norms, 1.0 / 100.0).unwrap();
        assert!(
            sampling_objective(&norms, &loose) <= sampling_objective(&norms, &tight) + 1e-12
        );
    }

    #[test]
    fn floored_probe_below_uniform_value() {
        let report = floored_scaling_probe(2.0, 1.0, 32, &[64, 256]).unwrap();
        for &(n, value) in &report.entries {
            let uniform = expected_uniform_objective(2.0, 1.0, 32, n);
            assert!(value < uniform, "n = {n}: {value} !< {uniform}");
        }
    }

    #[test]
    fn report_csv_has_pinned_header() {
        let report = floored_scaling_probe(2.0, 1.0, 16, &[32, 64]).unwrap();
        let mut buffer = Vec::new();
        report.write_csv(&mut buffer).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        assert!(text.starts_with("n,value,fit_residual\n32,"));
    }
}
