//! MMSE channel-estimation quality.

use crate::error::{Error, Result};

/// Variance of the MMSE estimate of a channel with variance `beta`, trained
/// with `tau` orthogonal pilot symbols of normalized power `rho_pilot`:
/// `tau * rho * beta^2 / (tau * rho * beta + 1)`.
pub fn mmse_quality(beta: f64, tau: usize, rho_pilot: f64) -> Result<f64> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::domain(format!("channel variance must be >= 0, got {beta}")));
    }
    if tau == 0 {
        return Err(Error::domain("pilot length must be at least 1"));
    }
    if !(rho_pilot > 0.0) || !rho_pilot.is_finite() {
        return Err(Error::domain(format!("pilot power must be > 0, got {rho_pilot}")));
    }
    let snr = tau as f64 * rho_pilot * beta;
    Ok(snr * beta / (snr + 1.0))
}

/// Scalar MMSE filter `c` such that `c * (g + n / sqrt(tau * rho))` is the
/// estimate of `g`.
pub fn mmse_filter_gain(beta: f64, tau: usize, rho_pilot: f64) -> f64 {
    let snr = tau as f64 * rho_pilot * beta;
    snr / (snr + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_channel_has_zero_quality() {
        assert_eq!(mmse_quality(0.0, 4, 10.0).unwrap(), 0.0);
    }

    #[test]
    fn direct_arithmetic() {
        // 20 * 1 * 0.01 / (20 * 1 * 0.1 + 1) = 0.2 / 3
        let g = mmse_quality(0.1, 20, 1.0).unwrap();
        assert!((g - 0.2 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn high_snr_limit_approaches_beta() {
        // tau * rho * beta = 1e3 with beta = 1
        let g = mmse_quality(1.0, 1000, 1.0).unwrap();
        assert!((1.0 - g) / 1.0 < 1e-3);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(mmse_quality(-1.0, 4, 1.0).is_err());
        assert!(mmse_quality(1.0, 0, 1.0).is_err());
        assert!(mmse_quality(1.0, 4, 0.0).is_err());
        assert!(mmse_quality(1.0, 4, -2.0).is_err());
    }

    proptest! {
        #[test]
        fn quality_below_beta_and_increasing(
            beta in 1e-14f64..1e-2,
            tau in 1usize..64,
            rho in 1e3f64..1e12,
        ) {
            let g = mmse_quality(beta, tau, rho).unwrap();
            prop_assert!(g >= 0.0 && g < beta);
            prop_assert!(mmse_quality(beta, tau + 1, rho).unwrap() > g);
            prop_assert!(mmse_quality(beta, tau, rho * 1.5).unwrap() > g);
            prop_assert!(mmse_quality(beta * 1.5, tau, rho).unwrap() > g);
        }
    }
}
