use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Batch-means point estimate with its standard error and the half-width of
/// the 95% Student-t confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub half_width: f64,
}

impl Estimate {
    /// `None` with fewer than two batches.
    pub fn from_batches(batch_means: &[f64]) -> Option<Self> {
        let n = batch_means.len();
        if n < 2 {
            return None;
        }
        let nf = n as f64;
        let mean = batch_means.iter().sum::<f64>() / nf;
        let var = batch_means.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
        let std_error = (var / nf).sqrt();
        Some(Self {
            mean,
            std_error,
            half_width: t_quantile_975(n - 1) * std_error,
        })
    }

    /// `|value − mean|` in units of the standard error.
    pub fn z_score(&self, value: f64) -> f64 {
        let diff = (value - self.mean).abs();
        if diff == 0.0 {
            0.0
        } else {
            diff / self.std_error
        }
    }
}

pub fn t_quantile_975(dof: usize) -> f64 {
    StudentsT::new(0.0, 1.0, dof as f64)
        .map(|t| t.inverse_cdf(0.975))
        .unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t_quantiles() {
        assert!((t_quantile_975(19) - 2.093024).abs() < 1e-5);
        assert!((t_quantile_975(1) - 12.7062).abs() < 1e-3);
    }

    #[test]
    fn batch_estimate() {
        let e = Estimate::from_batches(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(e.mean, 2.5);
        // sample variance 5/3, se = sqrt(5/12)
        assert!((e.std_error - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert!((e.half_width - 3.182446 * e.std_error).abs() < 1e-5);
        assert!(Estimate::from_batches(&[1.0]).is_none());
    }

    #[test]
    fn z_score_of_exact_match_is_zero() {
        let e = Estimate::from_batches(&[2.0, 2.0, 2.0]).unwrap();
        assert_eq!(e.z_score(2.0), 0.0);
        assert!(e.z_score(2.1).is_infinite());
    }
}
