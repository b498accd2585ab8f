/// Formats a float with 17 significant digits (round-trip exact for f64).
pub(crate) fn g17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Euclidean norm.
pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
