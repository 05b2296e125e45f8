//! Reference class forecasting proper: empirical uplift curves, de-biased
//! budgets and schedules, viability verdicts, inflation and debt stress
//! arithmetic, and cross-asset benchmark comparison.
//!
//! An *uplift* is the fractional increase applied to an inside-view estimate
//! so that the de-biased figure is exceeded only with a chosen acceptable
//! risk; it is read off the empirical overrun distribution as
//! `quantile(1 − risk) − 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::EmpiricalDistribution;

/// Risk-to-uplift mapping over an empirical overrun distribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpliftCurve {
    source: EmpiricalDistribution,
}

impl UpliftCurve {
    pub fn new(source: EmpiricalDistribution) -> Self {
        UpliftCurve { source }
    }

    /// The underlying overrun distribution.
    pub fn source(&self) -> &EmpiricalDistribution {
        &self.source
    }

    /// Uplift fraction at the given acceptable risk; nonincreasing in risk.
    pub fn evaluate(&self, acceptable_risk: f64) -> Result<f64> {
        required_uplift(&self.source, acceptable_risk)
    }

    /// Whether uplifts from this curve should carry a small-sample warning.
    pub fn is_small_sample(&self) -> bool {
        self.source.is_small_sample()
    }

    /// Samples the curve on an even risk grid, returning
    /// (acceptable_risk, uplift_pct) pairs suitable for two-column CSV export.
    pub fn trace(&self, steps: usize) -> Result<Vec<(f64, f64)>> {
        if steps < 2 {
            return Err(Error::validation(format!(
                "uplift trace needs at least 2 steps, got {steps}"
            )));
        }
        // open interval: risks 1/(steps+1) .. steps/(steps+1)
        (1..=steps)
            .map(|i| {
                let risk = i as f64 / (steps + 1) as f64;
                Ok((risk, self.evaluate(risk)? * 100.0))
            })
            .collect()
    }
}

/// One row of the cross-asset benchmark table. Percentages are in percent
/// units (96 means +96%); fields are nullable where only ranges are
/// published, with the range recorded in `provenance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetClassBenchmark {
    pub category: String,
    #[serde(default)]
    pub mean_overrun_pct: Option<f64>,
    #[serde(default)]
    pub p50_uplift_pct: Option<f64>,
    #[serde(default)]
    pub p80_uplift_pct: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
}

impl AssetClassBenchmark {
    /// Checks internal consistency: a higher-certainty uplift can never be
    /// smaller than a lower-certainty one.
    pub fn validate(&self) -> Result<()> {
        if let (Some(p50), Some(p80)) = (self.p50_uplift_pct, self.p80_uplift_pct) {
            if p80 < p50 {
                return Err(Error::validation(format!(
                    "benchmark {:?}: p80 uplift {p80} < p50 uplift {p50}",
                    self.category
                )));
            }
        }
        Ok(())
    }
}

/// Outcome of a benefit-cost viability check after de-biasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViabilityVerdict {
    pub debiased_bcr: f64,
    /// True exactly when the de-biased benefit-cost ratio falls below 1.
    pub stranded: bool,
    pub assumptions: String,
}

/// Nominal overrun factor plus the spend-profile convention it assumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NominalOverrun {
    pub factor: f64,
    pub convention: String,
}

/// Uplift needed so the budget is exceeded only with probability
/// `acceptable_risk`: quantile(dist, 1 − risk) − 1.
///
/// May be negative (a downlift) when the relevant quantile is below 1;
/// callers should surface [`EmpiricalDistribution::is_small_sample`] as a
/// warning where it applies.
pub fn required_uplift(dist: &EmpiricalDistribution, acceptable_risk: f64) -> Result<f64> {
    if !(acceptable_risk > 0.0 && acceptable_risk < 1.0) {
        return Err(Error::validation(format!(
            "acceptable risk {acceptable_risk} outside (0, 1)"
        )));
    }
    Ok(dist.quantile(1.0 - acceptable_risk)? - 1.0)
}

/// Applies an uplift to an inside-view estimate: estimate × (1 + uplift).
pub fn debias(estimate: f64, uplift: f64) -> Result<f64> {
    if !(estimate > 0.0 && estimate.is_finite()) {
        return Err(Error::validation(format!(
            "estimate must be positive and finite, found {estimate}"
        )));
    }
    if !(uplift > -1.0 && uplift.is_finite()) {
        return Err(Error::validation(format!(
            "uplift must be a finite fraction > -1, found {uplift}"
        )));
    }
    Ok(estimate * (1.0 + uplift))
}

/// De-biases a forecast benefit-cost ratio by an expected cost overrun
/// factor and optional benefit shortfall; the project is stranded when the
/// result falls below 1.
pub fn viability(
    forecast_bcr: f64,
    cost_overrun_factor: f64,
    benefit_shortfall: f64,
) -> Result<ViabilityVerdict> {
    if !(forecast_bcr > 0.0 && forecast_bcr.is_finite()) {
        return Err(Error::validation(format!(
            "forecast benefit-cost ratio must be positive, found {forecast_bcr}"
        )));
    }
    if !(cost_overrun_factor > 0.0 && cost_overrun_factor.is_finite()) {
        return Err(Error::validation(format!(
            "cost overrun factor must be positive, found {cost_overrun_factor}"
        )));
    }
    if !(0.0..1.0).contains(&benefit_shortfall) {
        return Err(Error::validation(format!(
            "benefit shortfall must lie in [0, 1), found {benefit_shortfall}"
        )));
    }
    let debiased_bcr = forecast_bcr * (1.0 - benefit_shortfall) / cost_overrun_factor;
    Ok(ViabilityVerdict {
        debiased_bcr,
        stranded: debiased_bcr < 1.0,
        assumptions: format!(
            "forecast BCR {forecast_bcr} divided by cost overrun factor \
             {cost_overrun_factor}, benefits reduced by {:.1}%",
            benefit_shortfall * 100.0
        ),
    })
}

/// Converts a constant-currency overrun factor to nominal terms under the
/// lump-sum-at-completion convention: the whole estimate is assumed paid at
/// the planned end and the whole outturn at the actual end, so
/// nominal = real × (1 + actual_rate)^(actual_months/12)
///               / (1 + planned_rate)^(planned_months/12).
///
/// Rates are annual percentages (5 means 5%/yr).
pub fn nominal_overrun(
    real_overrun: f64,
    planned_inflation_pct_yr: f64,
    planned_months: f64,
    actual_inflation_pct_yr: f64,
    actual_months: f64,
) -> Result<NominalOverrun> {
    if !(real_overrun > 0.0 && real_overrun.is_finite()) {
        return Err(Error::validation(format!(
            "real overrun factor must be positive, found {real_overrun}"
        )));
    }
    for (months, label) in [(planned_months, "planned"), (actual_months, "actual")] {
        if !(months > 0.0 && months.is_finite()) {
            return Err(Error::validation(format!(
                "{label} schedule must be positive months, found {months}"
            )));
        }
    }
    for (rate, label) in [
        (planned_inflation_pct_yr, "planned"),
        (actual_inflation_pct_yr, "actual"),
    ] {
        if !(rate > -100.0 && rate.is_finite()) {
            return Err(Error::validation(format!(
                "{label} inflation must exceed -100%/yr, found {rate}"
            )));
        }
    }
    let growth = |pct: f64, months: f64| (1.0 + pct / 100.0).powf(months / 12.0);
    let factor = real_overrun * growth(actual_inflation_pct_yr, actual_months)
        / growth(planned_inflation_pct_yr, planned_months);
    Ok(NominalOverrun {
        factor,
        convention: format!(
            "lump-sum-at-completion convention: estimate inflated at \
             {planned_inflation_pct_yr}%/yr over {planned_months} months, outturn at \
             {actual_inflation_pct_yr}%/yr over {actual_months} months; no spend profile assumed"
        ),
    })
}

/// Project cost as a percentage of the growth in external debt over the
/// construction period: 100 × cost / (debt_after − debt_before).
pub fn debt_impact(dam_cost_nominal: f64, debt_before: f64, debt_after: f64) -> Result<f64> {
    if !(dam_cost_nominal >= 0.0 && dam_cost_nominal.is_finite()) {
        return Err(Error::validation(format!(
            "nominal cost must be nonnegative, found {dam_cost_nominal}"
        )));
    }
    if !(debt_after > debt_before) {
        return Err(Error::validation(format!(
            "debt must increase over the period: before {debt_before}, after {debt_after}"
        )));
    }
    Ok(100.0 * dam_cost_nominal / (debt_after - debt_before))
}

/// Builds the cross-asset comparison table: each benchmark row validated and
/// passed through, then the project's own class appended with its
/// distribution mean and its 50%- and 80%-certainty uplifts, all in percent.
pub fn compare_asset_classes(
    project_curve: &UpliftCurve,
    project_category: &str,
    benchmarks: &[AssetClassBenchmark],
) -> Result<Vec<AssetClassBenchmark>> {
    let mut table = Vec::with_capacity(benchmarks.len() + 1);
    for b in benchmarks {
        b.validate()?;
        table.push(b.clone());
    }
    let project = AssetClassBenchmark {
        category: project_category.to_string(),
        mean_overrun_pct: Some((project_curve.source().mean() - 1.0) * 100.0),
        p50_uplift_pct: Some(project_curve.evaluate(0.5)? * 100.0),
        p80_uplift_pct: Some(project_curve.evaluate(0.2)? * 100.0),
        provenance: Some("computed from the supplied overrun distribution".to_string()),
    };
    project.validate()?;
    table.push(project);
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 10-point quantile sketch of the cost-overrun distribution used by the
    /// bundled summary fixture (median 1.26, mean 1.96, 80th pct 1.99,
    /// IQR 0.86, 20% above 2x, 10% above 3x, 7 of 10 over budget).
    pub(crate) const COST_SKETCH: [f64; 10] =
        [0.70, 0.85, 0.98, 1.02, 1.20, 1.32, 1.70, 1.90, 2.35, 7.58];

    /// Companion schedule-slippage sketch (median 1.27, mean 1.44, 80th pct 1.66).
    pub(crate) const SCHEDULE_SKETCH: [f64; 10] =
        [0.85, 0.95, 1.02, 1.10, 1.21, 1.33, 1.45, 1.60, 1.90, 2.99];

    fn cost_dist() -> EmpiricalDistribution {
        EmpiricalDistribution::new(COST_SKETCH.to_vec()).unwrap()
    }

    fn schedule_dist() -> EmpiricalDistribution {
        EmpiricalDistribution::new(SCHEDULE_SKETCH.to_vec()).unwrap()
    }

    #[test]
    fn uplift_matches_summary_sketch() {
        let d = cost_dist();
        assert!((required_uplift(&d, 0.20).unwrap() - 0.99).abs() < 1e-12);
        assert!((required_uplift(&d, 0.50).unwrap() - 0.26).abs() < 1e-12);
        let s = schedule_dist();
        assert!((required_uplift(&s, 0.20).unwrap() - 0.66).abs() < 1e-12);
    }

    #[test]
    fn uplift_zero_for_degenerate_class() {
        let d = EmpiricalDistribution::new(vec![1.0; 8]).unwrap();
        for risk in [0.1, 0.5, 0.9] {
            assert_eq!(required_uplift(&d, risk).unwrap(), 0.0);
        }
    }

    #[test]
    fn uplift_can_be_negative_downlift() {
        let d = EmpiricalDistribution::new(vec![0.5, 0.6, 0.7, 0.8]).unwrap();
        assert!(required_uplift(&d, 0.5).unwrap() < 0.0);
    }

    #[test]
    fn uplift_rejects_risk_outside_open_interval() {
        let d = cost_dist();
        for risk in [0.0, 1.0, -0.2, 1.7, f64::NAN] {
            assert!(required_uplift(&d, risk).is_err());
        }
    }

    #[test]
    fn curve_is_antitone_and_traceable() {
        let curve = UpliftCurve::new(cost_dist());
        let trace = curve.trace(97).unwrap();
        assert_eq!(trace.len(), 97);
        for pair in trace.windows(2) {
            assert!(pair[0].1 >= pair[1].1, "uplift rose with risk: {pair:?}");
        }
        assert!(curve.is_small_sample());
        assert!(curve.trace(1).is_err());
    }

    #[test]
    fn debias_budget_and_schedule_examples() {
        // 894 × 1.99 = 1779.1, within 1% of the published 1788 (which rounds
        // the uplift to a factor of 2).
        let budget = debias(894.0, 0.99).unwrap();
        assert!((budget - 1779.06).abs() < 1e-9);
        assert!((budget / 1788.0 - 1.0).abs() < 0.01);

        let months = debias(120.0, 0.66).unwrap();
        assert!((months - 199.2).abs() < 1e-9); // nearly 17 years

        assert_eq!(debias(42.0, 0.0).unwrap(), 42.0);
    }

    #[test]
    fn debias_validates_inputs() {
        assert!(debias(0.0, 0.5).is_err());
        assert!(debias(-1.0, 0.5).is_err());
        assert!(debias(10.0, -1.0).is_err());
        assert!(debias(10.0, f64::INFINITY).is_err());
        // a mild downlift is legitimate
        assert!((debias(100.0, -0.2).unwrap() - 80.0).abs() < 1e-12);
    }

    #[test]
    fn viability_worked_examples() {
        let v = viability(1.43, 1.44, 0.0).unwrap();
        assert!((v.debiased_bcr - 0.9930555555555556).abs() < 1e-12);
        assert!(v.stranded);

        let v = viability(1.4, 1.0, 0.0).unwrap();
        assert!((v.debiased_bcr - 1.4).abs() < 1e-15);
        assert!(!v.stranded);

        let v = viability(1.43, 1.44, 0.11).unwrap();
        assert!((v.debiased_bcr - 0.8838194444444445).abs() < 1e-12);
        assert!(v.stranded);
    }

    #[test]
    fn viability_monotone_in_overrun() {
        // once stranded at some overrun, larger overruns keep it stranded
        let mut prev = f64::INFINITY;
        for overrun in [1.0, 1.2, 1.44, 2.0, 4.0] {
            let v = viability(1.43, overrun, 0.0).unwrap();
            assert!(v.debiased_bcr <= prev);
            assert_eq!(v.stranded, v.debiased_bcr < 1.0);
            prev = v.debiased_bcr;
        }
    }

    #[test]
    fn viability_validates_inputs() {
        assert!(viability(0.0, 1.0, 0.0).is_err());
        assert!(viability(1.4, 0.0, 0.0).is_err());
        assert!(viability(1.4, 1.0, 1.0).is_err());
        assert!(viability(1.4, 1.0, -0.1).is_err());
    }

    #[test]
    fn nominal_overrun_cancels_on_identical_paths() {
        let n = nominal_overrun(1.37, 4.5, 66.0, 4.5, 66.0).unwrap();
        assert_eq!(n.factor, 1.37);
        assert!(n.convention.contains("lump-sum-at-completion"));
    }

    #[test]
    fn nominal_overrun_hand_arithmetic() {
        // 1.2 × 1.05^6 / 1.02^4
        let n = nominal_overrun(1.2, 2.0, 48.0, 5.0, 72.0).unwrap();
        assert!((n.factor - 1.4856494736353736).abs() < 1e-12);
        assert!((n.factor - 1.4857).abs() < 1e-4);
    }

    #[test]
    fn nominal_overrun_cumulative_inflation_case() {
        // cumulative 380% over 16 years ⇒ (1+r)^16 = 4.8
        let annual_pct = (4.8_f64.powf(1.0 / 16.0) - 1.0) * 100.0;
        assert!((annual_pct - 10.3005244334).abs() < 1e-9);
        let n = nominal_overrun(1.0, 0.0, 192.0, annual_pct, 192.0).unwrap();
        assert!((n.factor - 4.8).abs() < 1e-9);
    }

    #[test]
    fn nominal_overrun_validates_inputs() {
        assert!(nominal_overrun(1.0, 0.0, 0.0, 5.0, 60.0).is_err());
        assert!(nominal_overrun(1.0, 0.0, 60.0, 5.0, -3.0).is_err());
        assert!(nominal_overrun(1.0, -100.0, 60.0, 5.0, 60.0).is_err());
        assert!(nominal_overrun(0.0, 0.0, 60.0, 5.0, 60.0).is_err());
    }

    #[test]
    fn debt_impact_table_rows() {
        assert!((debt_impact(168.7, 1296.6, 2699.6).unwrap() - 12.024233784747684).abs() < 1e-9);
        assert!((debt_impact(168.7, 1296.6, 2699.6).unwrap() - 12.0).abs() < 0.3);
        assert!((debt_impact(1497.9, 3252.4, 9692.8).unwrap() - 23.257872).abs() < 1e-4);
        assert!((debt_impact(1497.9, 3252.4, 9692.8).unwrap() - 23.0).abs() < 0.3);
        assert_eq!(debt_impact(0.0, 10.0, 20.0).unwrap(), 0.0);
        assert!(debt_impact(5.0, 20.0, 20.0).is_err());
        assert!(debt_impact(5.0, 20.0, 10.0).is_err());
    }

    #[test]
    fn comparison_table_appends_project_row() {
        let benchmarks = vec![
            AssetClassBenchmark {
                category: "Rail".into(),
                mean_overrun_pct: Some(45.0),
                p50_uplift_pct: Some(40.0),
                p80_uplift_pct: Some(57.0),
                provenance: None,
            },
            AssetClassBenchmark {
                category: "Roads".into(),
                mean_overrun_pct: Some(20.0),
                p50_uplift_pct: Some(15.0),
                p80_uplift_pct: Some(32.0),
                provenance: None,
            },
        ];
        let curve = UpliftCurve::new(cost_dist());
        let table = compare_asset_classes(&curve, "Dams", &benchmarks).unwrap();
        assert_eq!(table.len(), 3);
        assert_eq!(table[0].category, "Rail");
        let dams = &table[2];
        assert_eq!(dams.category, "Dams");
        assert!((dams.mean_overrun_pct.unwrap() - 96.0).abs() < 1e-9);
        assert!((dams.p50_uplift_pct.unwrap() - 26.0).abs() < 1e-9);
        assert!((dams.p80_uplift_pct.unwrap() - 99.0).abs() < 1e-9);

        // empty benchmark list → single project row
        let solo = compare_asset_classes(&curve, "Dams", &[]).unwrap();
        assert_eq!(solo.len(), 1);

        // inconsistent benchmark is refused
        let bad = AssetClassBenchmark {
            category: "Bad".into(),
            mean_overrun_pct: None,
            p50_uplift_pct: Some(50.0),
            p80_uplift_pct: Some(40.0),
            provenance: None,
        };
        assert!(compare_asset_classes(&curve, "Dams", &[bad]).is_err());
    }

    #[test]
    fn budget_coverage_matches_quantile_construction() {
        // The interpolated quantile at q = 1 − risk sits at fractional rank
        // h = (n−1)q + 1, so at least ⌊h⌋ of the n observations lie at or
        // below the debiased budget.
        let d = cost_dist();
        let n = d.n();
        for risk in [0.05, 0.2, 0.35, 0.5, 0.65, 0.8, 0.95] {
            let uplift = required_uplift(&d, risk).unwrap();
            let covered = d.sample().iter().filter(|v| **v <= 1.0 + uplift + 1e-12).count();
            let h = (n as f64 - 1.0) * (1.0 - risk) + 1.0;
            let guaranteed = (h + 1e-9).floor() as usize;
            assert!(
                covered >= guaranteed,
                "risk {risk}: covered {covered}/{n}, rank rule guarantees {guaranteed}"
            );
        }
    }
}
