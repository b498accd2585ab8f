//! KL projection onto the floored probability simplex.

use crate::error::{Error, Result};

/// Projects a positive weight vector onto `{q : sum q = 1, q_j >= min_prob}`
/// in KL divergence: the result minimizes `D_kl(q || w)` over that set.
///
/// The minimizer has the water-filling form `q_j = max(min_prob, c * w_j)`
/// with the scalar `c` chosen so the result sums to one. `c` is found by
/// sorting the weights and scanning active-set breakpoints, O(n log n).
pub fn project_kl(weights: &[f64], min_prob: f64) -> Result<Vec<f64>> {
    let n = weights.len();
    if n == 0 {
        return Err(Error::InvalidConfig("empty weight vector".into()));
    }
    if !(min_prob >= 0.0) || !min_prob.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "min_prob must be finite and >= 0, got {min_prob}"
        )));
    }
    if n as f64 * min_prob > 1.0 {
        return Err(Error::InfeasibleFloor { n, min_prob });
    }
    if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err(Error::InvalidConfig(
            "weights must be strictly positive and finite".into(),
        ));
    }

    // Ascending by weight, index as tie-break for determinism.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| weights[a].total_cmp(&weights[b]).then(a.cmp(&b)));

    // suffix[k] = sum of the n-k largest weights (those not floored when the
    // k smallest are pinned at min_prob).
    let mut suffix = vec![0.0; n + 1];
    for k in (0..n).rev() {
        suffix[k] = suffix[k + 1] + weights[order[k]];
    }

    // The k smallest entries are floored; the smallest unfloored entry must
    // still clear the floor after rescaling. The scan always terminates: at
    // k = n-1 the condition reduces to n * min_prob <= 1.
    let mut scale = 0.0;
    let mut floored = n;
    for k in 0..n {
        let c = (1.0 - k as f64 * min_prob) / suffix[k];
        if c * weights[order[k]] >= min_prob {
            scale = c;
            floored = k;
            break;
        }
    }
    debug_assert!(floored < n);

    let mut out = vec![0.0; n];
    for (rank, &j) in order.iter().enumerate() {
        out[j] = if rank < floored {
            min_prob
        } else {
            scale * weights[j]
        };
    }
    Ok(out)
}
