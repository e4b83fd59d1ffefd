//! Diebold-Mariano comparison of two paired forecast-error series under
//! squared-error loss.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DmVariance {
    /// Plain sample variance of the loss differentials divided by T.
    Plain,
    /// Bartlett-kernel HAC long-run variance with the given lag.
    Hac { lag: usize },
}

impl Default for DmVariance {
    fn default() -> Self {
        DmVariance::Plain
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "outcome")]
pub enum DmOutcome {
    Statistic { dm: f64, p_value: f64, n: usize },
    /// Zero loss-differential variance with zero mean: the models are
    /// indistinguishable under squared error.
    Indistinguishable { n: usize },
}

/// DM statistic straight from a loss-differential series (d_t = e1² - e2²).
/// Needs at least two observations; the variance of the mean uses the
/// (T-1)-denominator sample variance, so d = (3, 1, 2) gives
/// DM = 2 / sqrt(1/3).
pub fn dm_from_differentials(d: &[f64], variance: DmVariance) -> Result<DmOutcome> {
    let t = d.len();
    if t < 2 {
        return Err(Error::data(format!("need at least 2 loss differentials, got {t}")));
    }
    if d.iter().any(|x| !x.is_finite()) {
        return Err(Error::data("loss differentials must be finite".to_string()));
    }
    let mean = d.iter().sum::<f64>() / t as f64;
    let var_of_mean = match variance {
        DmVariance::Plain => {
            let sample_var =
                d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (t - 1) as f64;
            sample_var / t as f64
        }
        DmVariance::Hac { lag } => {
            let gamma = |k: usize| -> f64 {
                (k..t).map(|i| (d[i] - mean) * (d[i - k] - mean)).sum::<f64>() / t as f64
            };
            let mut long_run = gamma(0);
            let lag = lag.min(t - 1);
            for k in 1..=lag {
                let weight = 1.0 - k as f64 / (lag + 1) as f64;
                long_run += 2.0 * weight * gamma(k);
            }
            long_run / t as f64
        }
    };
    if var_of_mean <= 0.0 {
        if mean == 0.0 {
            return Ok(DmOutcome::Indistinguishable { n: t });
        }
        return Err(Error::data(
            "degenerate loss differentials: zero variance with nonzero mean".to_string(),
        ));
    }
    let dm = mean / var_of_mean.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let p_value = 2.0 * (1.0 - normal.cdf(dm.abs()));
    Ok(DmOutcome::Statistic { dm, p_value, n: t })
}

/// DM test over two paired forecast-error series. Squared-error loss;
/// asymptotic normal inference needs a reasonable sample, so fewer than 8
/// pairs is an error.
pub fn diebold_mariano(e1: &[f64], e2: &[f64], variance: DmVariance) -> Result<DmOutcome> {
    if e1.len() != e2.len() {
        return Err(Error::data(format!(
            "error series must be paired: {} vs {}",
            e1.len(),
            e2.len()
        )));
    }
    if e1.len() < 8 {
        return Err(Error::data(format!(
            "need at least 8 paired errors for the DM test, got {}",
            e1.len()
        )));
    }
    if e1.iter().chain(e2).any(|x| !x.is_finite()) {
        return Err(Error::data("forecast errors must be finite".to_string()));
    }
    let d: Vec<f64> = e1.iter().zip(e2).map(|(a, b)| a * a - b * b).collect();
    dm_from_differentials(&d, variance)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_example() {
        let out = dm_from_differentials(&[3.0, 1.0, 2.0], DmVariance::Plain).unwrap();
        match out {
            DmOutcome::Statistic { dm, p_value, n } => {
                assert!((dm - 2.0 / (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
                assert!((dm - 3.464_101_615_137_754).abs() < 1e-9);
                assert!(p_value > 0.0 && p_value < 0.001);
                assert_eq!(n, 3);
            }
            other => panic!("expected a statistic, got {other:?}"),
        }
    }

    #[test]
    fn identical_errors_are_indistinguishable() {
        let e: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).sin()).collect();
        let out = diebold_mariano(&e, &e, DmVariance::Plain).unwrap();
        assert_eq!(out, DmOutcome::Indistinguishable { n: 12 });
    }

    #[test]
    fn swapping_models_flips_sign_exactly() {
        let e1: Vec<f64> = (0..40).map(|i| ((i * 13 % 17) as f64 - 8.0) / 5.0).collect();
        let e2: Vec<f64> = (0..40).map(|i| ((i * 7 % 23) as f64 - 11.0) / 7.0).collect();
        let a = diebold_mariano(&e1, &e2, DmVariance::Plain).unwrap();
        let b = diebold_mariano(&e2, &e1, DmVariance::Plain).unwrap();
        match (a, b) {
            (
                DmOutcome::Statistic { dm: dm_a, p_value: p_a, .. },
                DmOutcome::Statistic { dm: dm_b, p_value: p_b, .. },
            ) => {
                assert_eq!(dm_a.to_bits(), (-dm_b).to_bits());
                assert_eq!(p_a.to_bits(), p_b.to_bits());
            }
            other => panic!("expected statistics, got {other:?}"),
        }
    }

    #[test]
    fn degenerate_nonzero_mean_is_an_error() {
        // constant nonzero differential: e1 = 2, e2 = 1 everywhere
        let e1 = [2.0; 10];
        let e2 = [1.0; 10];
        assert!(diebold_mariano(&e1, &e2, DmVariance::Plain).is_err());
    }

    #[test]
    fn short_series_rejected_at_the_test_level() {
        let e = [1.0, 2.0, 3.0];
        assert!(diebold_mariano(&e, &e, DmVariance::Plain).is_err());
        // but the differential-level statistic accepts length >= 2
        assert!(dm_from_differentials(&[1.0, 2.0], DmVariance::Plain).is_ok());
    }

    #[test]
    fn hac_variance_runs_and_stays_positive() {
        let e1: Vec<f64> = (0..60).map(|i| ((i % 9) as f64 - 4.0) / 3.0).collect();
        let e2: Vec<f64> = (0..60).map(|i| ((i % 7) as f64 - 3.0) / 3.0).collect();
        let out = diebold_mariano(&e1, &e2, DmVariance::Hac { lag: 4 }).unwrap();
        match out {
            DmOutcome::Statistic { dm, p_value, .. } => {
                assert!(dm.is_finite());
                assert!((0.0..=1.0).contains(&p_value));
            }
            other => panic!("expected statistic, got {other:?}"),
        }
    }
}
