use statrs::distribution::{ContinuousCDF, Normal};

use super::HarnessError;

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_EPSILON: f64 = 1.0;

/// Samples needed for the mean's half-width to stay within `epsilon` at
/// confidence `1 − alpha` under a normal approximation:
/// `max(1, ceil((z_{1−α/2} · σ̂ / ε)²))`. With the defaults the coefficient
/// is z₀.₉₇₅ ≈ 1.959964.
pub fn converged_sample_size(
    sigma_hat: f64,
    alpha: f64,
    epsilon: f64,
) -> Result<usize, HarnessError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(HarnessError::InvalidAlpha(alpha));
    }
    if !(epsilon > 0.0) {
        return Err(HarnessError::InvalidEpsilon(epsilon));
    }
    if !(sigma_hat >= 0.0) {
        return Err(HarnessError::InvalidSigma(sigma_hat));
    }
    let z = Normal::standard().inverse_cdf(1.0 - alpha / 2.0);
    let n = (z * sigma_hat / epsilon).powi(2).ceil();
    Ok((n as usize).max(1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sigma_floors_at_one() {
        assert_eq!(converged_sample_size(0.0, 0.05, 1.0).unwrap(), 1);
    }

    #[test]
    fn matches_hand_arithmetic() {
        // ceil(1.959964² · 25) and ceil(1.959964² · 100)
        assert_eq!(converged_sample_size(5.0, 0.05, 1.0).unwrap(), 97);
        assert_eq!(converged_sample_size(10.0, 0.05, 1.0).unwrap(), 385);
    }

    #[test]
    fn monotone_in_sigma_and_epsilon() {
        let mut last = 0;
        for i in 0..100 {
            let sigma = i as f64 * 0.25;
            let n = converged_sample_size(sigma, 0.05, 1.0).unwrap();
            assert!(n >= last);
            last = n;
        }
        let wide = converged_sample_size(5.0, 0.05, 2.0).unwrap();
        let tight = converged_sample_size(5.0, 0.05, 0.5).unwrap();
        assert!(wide <= 97 && 97 <= tight);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            converged_sample_size(5.0, 0.0, 1.0),
            Err(HarnessError::InvalidAlpha(_))
        ));
        assert!(matches!(
            converged_sample_size(5.0, 1.0, 1.0),
            Err(HarnessError::InvalidAlpha(_))
        ));
        assert!(matches!(
            converged_sample_size(5.0, 0.05, 0.0),
            Err(HarnessError::InvalidEpsilon(_))
        ));
        assert!(matches!(
            converged_sample_size(-1.0, 0.05, 1.0),
            Err(HarnessError::InvalidSigma(_))
        ));
    }
}
