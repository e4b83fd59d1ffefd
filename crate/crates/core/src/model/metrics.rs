//! Regression metrics in growth percentage points.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    /// 1 - SS_res/SS_tot; `None` when the targets have zero variance.
    pub r2: Option<f64>,
    /// Root mean squared error, percentage points of growth.
    pub rmse_pct: f64,
    /// Mean absolute error, percentage points of growth.
    pub mae_pct: f64,
    pub n: usize,
}

pub fn evaluate_metrics(predictions: &[f64], targets: &[f64]) -> Result<MetricSet> {
    if predictions.len() != targets.len() {
        return Err(Error::data(format!(
            "prediction/target length mismatch: {} vs {}",
            predictions.len(),
            targets.len()
        )));
    }
    let n = targets.len();
    if n < 2 {
        return Err(Error::data(format!("metrics need at least 2 observations, got {n}")));
    }
    if predictions.iter().chain(targets).any(|v| !v.is_finite()) {
        return Err(Error::data("metrics inputs must be finite".to_string()));
    }

    let mean = targets.iter().sum::<f64>() / n as f64;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    let mut abs_sum = 0.0;
    for (&p, &t) in predictions.iter().zip(targets) {
        let e = t - p;
        ss_res += e * e;
        ss_tot += (t - mean) * (t - mean);
        abs_sum += e.abs();
    }
    let r2 = if ss_tot == 0.0 { None } else { Some(1.0 - ss_res / ss_tot) };
    Ok(MetricSet {
        r2,
        rmse_pct: (ss_res / n as f64).sqrt() * 100.0,
        mae_pct: abs_sum / n as f64 * 100.0,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let t = [0.1, -0.2, 0.3];
        let m = evaluate_metrics(&t, &t).unwrap();
        assert_eq!(m.r2, Some(1.0));
        assert_eq!(m.rmse_pct, 0.0);
        assert_eq!(m.mae_pct, 0.0);
    }

    #[test]
    fn mean_predictor_scores_zero() {
        let t = [1.0, 2.0, 3.0, 6.0];
        let mean = t.iter().sum::<f64>() / 4.0;
        let p = [mean; 4];
        let m = evaluate_metrics(&p, &t).unwrap();
        assert!((m.r2.unwrap()).abs() < 1e-12);
    }

    #[test]
    fn hand_arithmetic_in_percentage_points() {
        let t = [0.0, 0.1];
        let p = [0.1, 0.0];
        let m = evaluate_metrics(&p, &t).unwrap();
        assert!((m.rmse_pct - 10.0).abs() < 1e-9);
        assert!((m.mae_pct - 10.0).abs() < 1e-9);
    }

    #[test]
    fn zero_variance_targets_have_undefined_r2() {
        let t = [0.5, 0.5, 0.5];
        let p = [0.4, 0.5, 0.6];
        let m = evaluate_metrics(&p, &t).unwrap();
        assert_eq!(m.r2, None);
        assert!(m.rmse_pct > 0.0);
    }

    #[test]
    fn rmse_dominates_mae() {
        let t = [0.0, 0.2, -0.3, 0.5];
        let p = [0.1, 0.0, 0.0, 0.2];
        let m = evaluate_metrics(&p, &t).unwrap();
        assert!(m.rmse_pct >= m.mae_pct);
    }

    #[test]
    fn bad_inputs_are_errors() {
        assert!(evaluate_metrics(&[1.0], &[1.0]).is_err());
        assert!(evaluate_metrics(&[1.0, 2.0], &[1.0]).is_err());
        assert!(evaluate_metrics(&[f64::NAN, 0.0], &[0.0, 0.0]).is_err());
    }
}
