use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_lengths(y: &[f64], y_hat: &[f64]) -> Result<()> {
    if y.is_empty() || y.len() != y_hat.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("two equal nonempty sequences (targets: {})", y.len()),
            got: format!("{} predictions", y_hat.len()),
        });
    }
    Ok(())
}

fn sse(y: &[f64], y_hat: &[f64]) -> f64 {
    y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `(1/n) * sum (y_i - y_hat_i)^2`
pub fn mse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_lengths(y, y_hat)?;
    Ok(sse(y, y_hat) / y.len() as f64)
}

/// `1 - SS_res / SS_tot`. Errors when the targets have zero variance.
pub fn r_squared(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_lengths(y, y_hat)?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    if !(ss_tot > 0.0) {
        return Err(Error::DegenerateMetric(
            "R^2 is undefined for targets with zero variance".into(),
        ));
    }
    Ok(1.0 - sse(y, y_hat) / ss_tot)
}

/// `||y_hat - y||_2 / ||y||_2`. Errors when `||y|| = 0`.
pub fn relative_l2(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_lengths(y, y_hat)?;
    let norm: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::DegenerateMetric(
            "relative L2 error is undefined for an all-zero target".into(),
        ));
    }
    Ok(sse(y, y_hat).sqrt() / norm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mse: f64,
    /// `None` when the targets have zero variance.
    pub r_squared: Option<f64>,
    /// `None` when the targets are all zero.
    pub relative_l2: Option<f64>,
    pub n_samples: usize,
    /// Where the evaluation points came from, e.g. `"grid 2001 on [-1,1]"`.
    #[serde(default)]
    pub grid: String,
}

impl MetricsReport {
    pub fn compute(y: &[f64], y_hat: &[f64]) -> Result<Self> {
        let mse = mse(y, y_hat)?;
        Ok(Self {
            mse,
            r_squared: r_squared(y, y_hat).ok(),
            relative_l2: relative_l2(y, y_hat).ok(),
            n_samples: y.len(),
            grid: String::new(),
        })
    }

    pub fn with_grid(mut self, grid: impl Into<String>) -> Self {
        self.grid = grid.into();
        self
    }

    pub fn r2_or_nan(&self) -> f64 {
        self.r_squared.unwrap_or(f64::NAN)
    }

    pub fn rel_l2_or_nan(&self) -> f64 {
        self.relative_l2.unwrap_or(f64::NAN)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_prediction() {
        let y = [1.0, -2.0, 3.5];
        let m = MetricsReport::compute(&y, &y).unwrap();
        assert_eq!(m.mse, 0.0);
        assert_eq!(m.r_squared, Some(1.0));
        assert_eq!(m.relative_l2, Some(0.0));
        assert_eq!(m.n_samples, 3);
    }

    #[test]
    fn mean_prediction_has_zero_r2() {
        let y = [1.0, 2.0, 6.0, -1.0];
        let mean = 2.0;
        assert!(r_squared(&y, &[mean; 4]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn hand_arithmetic() {
        let y = [1.0, 2.0, 3.0];
        let y_hat = [1.0, 2.0, 5.0];
        assert!((mse(&y, &y_hat).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert!((r_squared(&y, &y_hat).unwrap() + 1.0).abs() < 1e-15);
        assert!((relative_l2(&y, &y_hat).unwrap() - 2.0 / 14f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn degenerate_inputs_are_errors() {
        assert!(matches!(
            r_squared(&[2.0, 2.0], &[1.0, 3.0]),
            Err(Error::DegenerateMetric(_))
        ));
        assert!(matches!(
            relative_l2(&[0.0, 0.0], &[1.0, 3.0]),
            Err(Error::DegenerateMetric(_))
        ));
        assert!(mse(&[], &[]).is_err());
        assert!(mse(&[1.0], &[1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn metric_identities(
            y in prop::collection::vec(-1e3..1e3f64, 2..50),
            noise in prop::collection::vec(-1.0..1.0f64, 50),
            c in prop_oneof![-100.0..-0.01f64, 0.01..100.0f64],
        ) {
            let y_hat: Vec<f64> = y.iter().zip(&noise).map(|(a, e)| a + e).collect();
            prop_assert!(mse(&y, &y_hat).unwrap() >= 0.0);
            if let Ok(r2) = r_squared(&y, &y) {
                prop_assert_eq!(r2, 1.0);
            }
            if let (Ok(a), Ok(b)) = (
                relative_l2(&y, &y_hat),
                relative_l2(
                    &y.iter().map(|v| c * v).collect::<Vec<_>>(),
                    &y_hat.iter().map(|v| c * v).collect::<Vec<_>>(),
                ),
            ) {
                prop_assert!((a - b).abs() <= 1e-10 * a.max(1e-300));
            }
        }
    }
}
