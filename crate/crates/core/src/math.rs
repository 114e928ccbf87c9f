// Thin wrappers so call sites read like std float methods.

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub(crate) fn hypot(x: f64, y: f64) -> f64 {
    libm::hypot(x, y)
}

#[inline]
pub(crate) fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub(crate) fn lgamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Digamma at a positive integer: `psi(m) = -gamma + sum_{j<m} 1/j`.
pub(crate) fn digamma_int(m: usize) -> f64 {
    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
    if m < 64 {
        let mut acc = -EULER_GAMMA;
        for j in 1..m {
            acc += 1.0 / j as f64;
        }
        return acc;
    }
    // Asymptotic series; plenty accurate for m >= 64.
    let x = m as f64;
    let x2 = x * x;
    ln(x) - 0.5 / x - 1.0 / (12.0 * x2) + 1.0 / (120.0 * x2 * x2) - 1.0 / (252.0 * x2 * x2 * x2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digamma_matches_harmonic_sum_across_switchover() {
        let mut acc = -0.577_215_664_901_532_9;
        for m in 1..200 {
            let d = digamma_int(m);
            assert!((d - acc).abs() < 1e-13, "m={m}: {d} vs {acc}");
            acc += 1.0 / m as f64;
        }
    }
}
