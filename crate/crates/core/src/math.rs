//! Log-domain helpers.

/// `log(sum(exp(xs)))` with max subtraction. Empty input gives `-inf`.
#[inline]
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

/// `log(2 cosh(x))`, finite for every finite `x`.
#[inline]
pub fn log_2cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p()
}

/// Relative difference `|a - b| / max(|a|, |b|)`, zero when both are zero.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_matches_naive_for_moderate_inputs() {
        let xs = [0.1, -2.0, 3.5, 1.25];
        let naive = xs.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&xs) - naive).abs() < 1e-14);
    }

    #[test]
    fn lse_survives_huge_exponents() {
        let v = log_sum_exp(&[1e6, 1e6]);
        assert!((v - (1e6 + 2f64.ln())).abs() < 1e-9);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn log_2cosh_no_overflow() {
        assert!((log_2cosh(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(log_2cosh(1000.0), 1000.0);
        assert!((log_2cosh(-1.3) - (2.0 * 1.3f64.cosh()).ln()).abs() < 1e-14);
    }
}
