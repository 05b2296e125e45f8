//! Statistics kernel: empirical distributions and quantiles, summary
//! statistics, rank tests, one-way ANOVA and univariate OLS, kernel density
//! traces, and the variable transformation registry.
//!
//! Everything here is a pure function over immutable inputs; all quantile
//! queries share the single order-statistic interpolation rule documented on
//! [`EmpiricalDistribution::quantile`].

mod anova;
mod kde;
mod rank;
mod transform;

pub use anova::{anova_oneway, ols_univariate, OlsFit};
pub use kde::kde_density;
pub use rank::{mann_whitney_u, signed_rank_vs_reference};
pub use transform::Transformation;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A sorted sample of positive overrun factors (or any positive measurements).
///
/// Deserialization funnels through [`EmpiricalDistribution::new`], so decoded
/// samples are re-sorted and re-validated rather than trusted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution")]
pub struct EmpiricalDistribution {
    sample: Vec<f64>,
}

#[derive(Deserialize)]
struct RawDistribution {
    sample: Vec<f64>,
}

impl TryFrom<RawDistribution> for EmpiricalDistribution {
    type Error = Error;

    fn try_from(raw: RawDistribution) -> Result<Self> {
        EmpiricalDistribution::new(raw.sample)
    }
}

impl EmpiricalDistribution {
    /// Builds a distribution from raw values, sorting them ascending.
    ///
    /// Errors on an empty sample or any nonpositive/non-finite value.
    pub fn new(mut sample: Vec<f64>) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::validation("empty sample"));
        }
        if let Some(bad) = sample.iter().find(|v| !v.is_finite() || **v <= 0.0) {
            return Err(Error::validation(format!(
                "sample values must be finite and > 0, found {bad}"
            )));
        }
        sample.sort_by(|a, b| a.partial_cmp(b).expect("finite values compare"));
        Ok(EmpiricalDistribution { sample })
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.sample.len()
    }

    /// The sorted sample.
    pub fn sample(&self) -> &[f64] {
        &self.sample
    }

    /// Whether the sample is small enough that quantile-based uplifts should
    /// carry a small-sample warning (fewer than 20 observations).
    pub fn is_small_sample(&self) -> bool {
        self.sample.len() < 20
    }

    /// Order-statistic quantile with linear interpolation.
    ///
    /// Uses the rank h = (n − 1)q + 1 and returns
    /// x_(⌊h⌋) + (h − ⌊h⌋)(x_(⌊h⌋+1) − x_(⌊h⌋)), so q = 0 gives the minimum
    /// and q = 1 the maximum.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::validation(format!(
                "quantile level {q} outside [0, 1]"
            )));
        }
        let n = self.sample.len();
        let h = (n as f64 - 1.0) * q + 1.0;
        let lo = h.floor() as usize; // 1-based order statistic index
        let frac = h - h.floor();
        if lo >= n {
            return Ok(self.sample[n - 1]);
        }
        let x_lo = self.sample[lo - 1];
        let x_hi = self.sample[lo];
        Ok(x_lo + frac * (x_hi - x_lo))
    }

    /// Arithmetic mean.
    pub fn mean(&self) -> f64 {
        self.sample.iter().sum::<f64>() / self.sample.len() as f64
    }

    /// Fraction of the sample strictly above `threshold`.
    pub fn fraction_above(&self, threshold: f64) -> f64 {
        let k = self.sample.iter().filter(|v| **v > threshold).count();
        k as f64 / self.sample.len() as f64
    }

    /// Mean, median, and interquartile range in one pass.
    pub fn summarize(&self) -> Summary {
        let median = self.quantile(0.5).expect("0.5 in range");
        let q1 = self.quantile(0.25).expect("0.25 in range");
        let q3 = self.quantile(0.75).expect("0.75 in range");
        Summary {
            n: self.sample.len(),
            mean: self.mean(),
            median,
            iqr: q3 - q1,
        }
    }
}

/// Summary statistics of an empirical distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// Sample size.
    pub n: usize,
    /// Arithmetic mean.
    pub mean: f64,
    /// Median under the (n−1)q+1 interpolation rule.
    pub median: f64,
    /// quantile(0.75) − quantile(0.25).
    pub iqr: f64,
}

/// Sidedness of a hypothesis test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    /// Two-sided alternative.
    TwoSided,
    /// First sample (or differences) stochastically greater.
    Greater,
    /// First sample (or differences) stochastically less.
    Less,
}

impl Alternative {
    /// Short name used in reports.
    pub fn name(self) -> &'static str {
        match self {
            Alternative::TwoSided => "two_sided",
            Alternative::Greater => "greater",
            Alternative::Less => "less",
        }
    }
}

/// Outcome of a hypothesis test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// The test statistic (W for signed-rank, U for Mann-Whitney, F for ANOVA).
    pub statistic: f64,
    /// p-value in [0, 1].
    pub p_value: f64,
    /// Human-readable method description, including whether the p-value is
    /// exact or a normal approximation.
    pub method: String,
    /// The alternative hypothesis tested.
    pub alternative: Alternative,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(values: &[f64]) -> EmpiricalDistribution {
        EmpiricalDistribution::new(values.to_vec()).unwrap()
    }

    #[test]
    fn quantile_median_of_odd_sample() {
        assert_eq!(dist(&[1.0, 2.0, 3.0, 4.0, 5.0]).quantile(0.5).unwrap(), 3.0);
    }

    #[test]
    fn quantile_hits_order_statistic_exactly() {
        // h = 4*0.25 + 1 = 2 exactly, so the second order statistic is
        // returned with no interpolation arithmetic.
        assert_eq!(
            dist(&[1.0, 2.0, 3.0, 4.0, 5.0]).quantile(0.25).unwrap(),
            2.0
        );
    }

    #[test]
    fn quantile_singleton_is_constant() {
        let d = dist(&[7.0]);
        for q in [0.0, 0.3, 0.5, 0.99, 1.0] {
            assert_eq!(d.quantile(q).unwrap(), 7.0);
        }
    }

    #[test]
    fn quantile_extremes_are_min_and_max() {
        let d = dist(&[2.0, 9.0, 4.0, 1.5]);
        assert_eq!(d.quantile(0.0).unwrap(), 1.5);
        assert_eq!(d.quantile(1.0).unwrap(), 9.0);
    }

    #[test]
    fn quantile_rejects_out_of_range() {
        assert!(dist(&[1.0]).quantile(-0.1).is_err());
        assert!(dist(&[1.0]).quantile(1.1).is_err());
    }

    #[test]
    fn summarize_hand_example() {
        let s = dist(&[0.5, 1.0, 1.5, 2.5, 4.0]).summarize();
        assert!((s.mean - 1.9).abs() < 1e-12);
        assert_eq!(s.median, 1.5);
        // q1 at h = 2, q3 at h = 4: 2.5 - 1.0
        assert!((s.iqr - 1.5).abs() < 1e-12);
    }

    #[test]
    fn summarize_constant_sample() {
        let s = dist(&[1.0, 1.0, 1.0, 1.0]).summarize();
        assert_eq!(s.mean, 1.0);
        assert_eq!(s.median, 1.0);
        assert_eq!(s.iqr, 0.0);
    }

    #[test]
    fn fraction_above_direct_count() {
        let d = dist(&[0.9, 1.1, 1.27, 2.0]);
        assert_eq!(d.fraction_above(1.0), 0.75);
        // strictly-above plus at-or-below partitions the sample
        let below_or_eq = d.sample().iter().filter(|v| **v <= 1.0).count() as f64 / 4.0;
        assert_eq!(d.fraction_above(1.0) + below_or_eq, 1.0);
    }

    #[test]
    fn rejects_empty_and_nonpositive() {
        assert!(EmpiricalDistribution::new(vec![]).is_err());
        assert!(EmpiricalDistribution::new(vec![1.0, 0.0]).is_err());
        assert!(EmpiricalDistribution::new(vec![1.0, -2.0]).is_err());
        assert!(EmpiricalDistribution::new(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn deserialization_revalidates() {
        let d = dist(&[1.27, 0.9, 2.0]);
        let json = serde_json::to_string(&d).unwrap();
        let back: EmpiricalDistribution = serde_json::from_str(&json).unwrap();
        assert_eq!(back, d);

        // unsorted input is sorted on decode, invalid input is refused
        let unsorted: EmpiricalDistribution =
            serde_json::from_str(r#"{"sample":[2.0,1.0]}"#).unwrap();
        assert_eq!(unsorted.sample(), &[1.0, 2.0]);
        assert!(serde_json::from_str::<EmpiricalDistribution>(r#"{"sample":[-1.0]}"#).is_err());
        assert!(serde_json::from_str::<EmpiricalDistribution>(r#"{"sample":[]}"#).is_err());
    }
}
