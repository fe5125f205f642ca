//! Monte Carlo estimates with standard errors.

use crate::math::{sqrt, NeumaierSum};

/// Sample mean of i.i.d. draws together with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MCEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub n: usize,
}

impl MCEstimate {
    /// Two-pass mean and standard error (`sd / sqrt(n)`, unbiased variance).
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std_err: f64::NAN,
                n,
            };
        }
        let mean = samples.iter().copied().collect::<NeumaierSum>().value() / n as f64;
        if n == 1 {
            return Self {
                mean,
                std_err: f64::NAN,
                n,
            };
        }
        let ss = samples
            .iter()
            .map(|x| (x - mean) * (x - mean))
            .collect::<NeumaierSum>()
            .value();
        let var = ss / (n - 1) as f64;
        Self {
            mean,
            std_err: sqrt(var / n as f64),
            n,
        }
    }

    /// `|mean - target| <= k * std_err`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_err
    }

    /// Standard error of the difference of two estimates, treating them as independent.
    pub fn joint_se(&self, other: &MCEstimate) -> f64 {
        sqrt(self.std_err * self.std_err + other.std_err * other.std_err)
    }

    /// Distance from `target` in standard errors.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.mean - target) / self.std_err
    }
}
