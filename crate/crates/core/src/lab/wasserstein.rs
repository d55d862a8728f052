use crate::error::{Error, Result};

/// Exact `W₁` between the empirical measures of `a` and `b`.
///
/// Equal sizes reduce to the mean absolute difference of sorted samples. For
/// unequal sizes the quantile functions are integrated exactly over the merged
/// breakpoints `i/n ∪ j/m` (integer arithmetic on the common denominator `nm`).
pub fn w1_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("W1 samples must be finite".into()));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    let (n, m) = (sa.len(), sb.len());
    if n == m {
        return Ok(sa.iter().zip(&sb).map(|(x, y)| (x - y).abs()).sum::<f64>() / n as f64);
    }
    // Quantile of `a` jumps at multiples of m, of `b` at multiples of n.
    let total = (n * m) as u128;
    let (mut i, mut j, mut pos) = (0usize, 0usize, 0u128);
    let mut acc = 0.0;
    while pos < total {
        let next_a = (i as u128 + 1) * m as u128;
        let next_b = (j as u128 + 1) * n as u128;
        let next = next_a.min(next_b);
        acc += (next - pos) as f64 * (sa[i] - sb[j]).abs();
        pos = next;
        if next == next_a {
            i += 1;
        }
        if next == next_b {
            j += 1;
        }
    }
    Ok(acc / total as f64)
}

/// `W₁(N(0, a²), N(0, b²)) = |a − b|·√(2/π)`.
pub fn gaussian_w1(sd_a: f64, sd_b: f64) -> f64 {
    (sd_a - sd_b).abs() * (2.0 / std::f64::consts::PI).sqrt()
}
