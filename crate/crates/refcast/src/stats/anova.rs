//! One-way analysis of variance and univariate (transformed) least squares.

use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::error::{Error, Result};
use crate::stats::{Alternative, TestResult, Transformation};

/// Classical one-way ANOVA over `groups`.
///
/// Returns the F statistic on (k − 1, N − k) degrees of freedom and its
/// upper-tail p-value. Requires at least two groups with at least two
/// observations each; errors when every group has zero within-group variance
/// (the F ratio is undefined).
pub fn anova_oneway(groups: &[Vec<f64>]) -> Result<TestResult> {
    if groups.len() < 2 {
        return Err(Error::validation("ANOVA needs at least 2 groups"));
    }
    if let Some(g) = groups.iter().find(|g| g.len() < 2) {
        return Err(Error::validation(format!(
            "every ANOVA group needs at least 2 observations, found one with {}",
            g.len()
        )));
    }
    let k = groups.len();
    let n_total: usize = groups.iter().map(|g| g.len()).sum();
    let grand: f64 = groups.iter().flatten().sum::<f64>() / n_total as f64;

    let mut ss_within = 0.0;
    let mut ss_between = 0.0;
    for g in groups {
        let m = g.iter().sum::<f64>() / g.len() as f64;
        ss_within += g.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
        ss_between += g.len() as f64 * (m - grand) * (m - grand);
    }
    if ss_within == 0.0 {
        return Err(Error::validation(
            "zero within-group variance in all groups: F ratio undefined",
        ));
    }
    let df1 = (k - 1) as f64;
    let df2 = (n_total - k) as f64;
    let f = (ss_between / df1) / (ss_within / df2);
    let p = 1.0 - FisherSnedecor::new(df1, df2)
        .map_err(|e| Error::numeric(format!("F distribution: {e}")))?
        .cdf(f);
    Ok(TestResult {
        statistic: f,
        p_value: p.clamp(0.0, 1.0),
        method: format!("one-way ANOVA, F({df1}, {df2})"),
        alternative: Alternative::Greater,
    })
}

/// A fitted univariate least-squares line on (possibly transformed) axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OlsFit {
    /// Slope on the transformed scale.
    pub slope: f64,
    /// Intercept on the transformed scale.
    pub intercept: f64,
    /// Coefficient of determination.
    pub r2: f64,
    /// F statistic R²(n−2)/(1−R²) on (1, n−2) degrees of freedom.
    pub f_stat: f64,
    /// Two-sided p-value of the slope from the F distribution.
    pub p_value: f64,
    /// Points used.
    pub n: usize,
}

/// Ordinary least squares of `y_transform(y)` on `x_transform(x)`.
///
/// Needs at least 3 points and positive variance in the transformed x values.
/// A transformation domain violation on any point is an error (no silent
/// dropping here; listwise deletion belongs to design construction).
pub fn ols_univariate(
    x: &[f64],
    y: &[f64],
    x_transform: Transformation,
    y_transform: Transformation,
) -> Result<OlsFit> {
    if x.len() != y.len() {
        return Err(Error::validation(format!(
            "x and y lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::validation("univariate OLS needs at least 3 points"));
    }
    let n = x.len();
    let tx: Vec<f64> = x
        .iter()
        .map(|v| x_transform.forward(*v))
        .collect::<Result<_>>()?;
    let ty: Vec<f64> = y
        .iter()
        .map(|v| y_transform.forward(*v))
        .collect::<Result<_>>()?;

    let mx = tx.iter().sum::<f64>() / n as f64;
    let my = ty.iter().sum::<f64>() / n as f64;
    let sxx: f64 = tx.iter().map(|v| (v - mx) * (v - mx)).sum();
    let syy: f64 = ty.iter().map(|v| (v - my) * (v - my)).sum();
    let sxy: f64 = tx
        .iter()
        .zip(&ty)
        .map(|(a, b)| (a - mx) * (b - my))
        .sum();
    if sxx == 0.0 {
        return Err(Error::validation(
            "zero variance in the (transformed) x values",
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    // Constant y is perfectly explained by the intercept; define R² = 0.
    let r2 = if syy == 0.0 { 0.0 } else { (sxy * sxy) / (sxx * syy) };
    let df2 = (n - 2) as f64;
    let (f_stat, p_value) = if r2 >= 1.0 {
        (f64::INFINITY, 0.0)
    } else {
        let f = r2 * df2 / (1.0 - r2);
        let p = 1.0 - FisherSnedecor::new(1.0, df2)
            .map_err(|e| Error::numeric(format!("F distribution: {e}")))?
            .cdf(f);
        (f, p.clamp(0.0, 1.0))
    };
    Ok(OlsFit {
        slope,
        intercept,
        r2,
        f_stat,
        p_value,
        n,
    })
}
