use super::EvalError;

/// Normal quantile for a two-sided 99% interval.
pub const Z_99: f64 = 2.58;

/// Mean success rate over the recorded points of a training curve.
pub fn sample_efficiency(curve: &[f64]) -> Result<f64, EvalError> {
    if curve.is_empty() {
        return Err(EvalError::Domain("sample efficiency of an empty curve".into()));
    }
    Ok(curve.iter().sum::<f64>() / curve.len() as f64)
}

/// `(mean, half_width)` with half width `z * tau / sqrt(s)`, tau the
/// unbiased standard deviation over the `s` seeds.
pub fn ci_over_seeds(seed_srs: &[f64]) -> Result<(f64, f64), EvalError> {
    let s = seed_srs.len();
    if s < 2 {
        return Err(EvalError::Domain(format!("confidence interval needs at least 2 seeds, got {s}")));
    }
    let mean = seed_srs.iter().sum::<f64>() / s as f64;
    let var = seed_srs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (s - 1) as f64;
    Ok((mean, Z_99 * var.sqrt() / (s as f64).sqrt()))
}

/// Deviation bound from `2 exp(-2 n eps^2) = delta`.
pub fn hoeffding_epsilon(n: usize, delta: f64) -> Result<f64, EvalError> {
    if n == 0 {
        return Err(EvalError::Domain("hoeffding bound needs n >= 1".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(EvalError::Domain(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(((2.0 / delta).ln() / (2.0 * n as f64)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_efficiency_is_the_mean() {
        assert_eq!(sample_efficiency(&[0.0, 0.5, 1.0]).unwrap(), 0.5);
        assert!(sample_efficiency(&[]).is_err());
    }

    #[test]
    fn ci_rejects_one_seed() {
        assert!(ci_over_seeds(&[0.5]).is_err());
        assert_eq!(ci_over_seeds(&[0.25, 0.25, 0.25]).unwrap(), (0.25, 0.0));
    }

    #[test]
    fn hoeffding_domain() {
        assert!(hoeffding_epsilon(10, 2.0).is_err());
        assert!(hoeffding_epsilon(0, 0.1).is_err());
        let a = hoeffding_epsilon(100, 0.05).unwrap();
        let b = hoeffding_epsilon(400, 0.05).unwrap();
        assert!((a / b - 2.0).abs() < 1e-12);
    }
}
