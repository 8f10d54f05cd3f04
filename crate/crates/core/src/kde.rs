//! One-dimensional Gaussian kernel density estimation, used for the
//! empirical CDF in the quantile-matching step of random insult generation.

use crate::special::normal_cdf;

/// Gaussian KDE with Silverman's rule-of-thumb bandwidth
/// `1.06 * sigma_hat * n^(-1/5)`.
pub struct GaussianKde {
    points: Vec<f64>,
    bandwidth: f64,
}

impl GaussianKde {
    /// Returns `None` when the sample has (numerically) zero spread, in which
    /// case no meaningful CDF exists.
    pub fn new(values: &[f64]) -> Option<Self> {
        assert!(values.len() >= 2, "KDE needs at least two points");
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let sd = var.sqrt();
        // a numerically constant sample has no usable rank structure
        if !sd.is_finite() || sd <= 1e-12 * (1.0 + mean.abs()) {
            return None;
        }
        let bandwidth = 1.06 * sd * n.powf(-0.2);
        Some(GaussianKde {
            points: values.to_vec(),
            bandwidth,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Smoothed CDF: mean of the kernel CDFs. Strictly increasing in `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        let sum: f64 = self
            .points
            .iter()
            .map(|&p| normal_cdf((x - p) / self.bandwidth))
            .sum();
        sum / self.points.len() as f64
    }
}
