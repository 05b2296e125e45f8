//! Reference-class data layer: project records, country macro series,
//! overrun observations, and the normalization/inflation arithmetic that
//! turns raw payment and deflator series into constant-currency quantities.
//!
//! All types are immutable after construction; every operation is a pure
//! function of its inputs.

mod countries;
mod csv_io;

pub use countries::{known_countries, region_of};
pub use csv_io::{
    ingest_macro_csv, ingest_reference_csv, write_macro_csv, write_reference_csv, Diagnostic,
    Severity, MACRO_HEADER, REFCLASS_HEADER,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wall height at or above which a project counts as a large dam; records
/// below the threshold are accepted with a warning, never dropped.
pub const LARGE_DAM_WALL_HEIGHT_M: f64 = 15.0;

/// Tolerance (months) between reported actual schedule and the span implied
/// by decision/completion years; the year fields are whole years, so the
/// implied span is coarse.
pub const SCHEDULE_CONSISTENCY_TOLERANCE_MONTHS: f64 = 24.0;

/// Polity2 score at or above which a country-year counts as a democracy.
pub const DEMOCRACY_POLITY2_THRESHOLD: i32 = 6;

/// World region of a project.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    NorthAmerica,
    SouthAsia,
    LatinAmerica,
    Africa,
    EastAsiaPacific,
    EuropeCentralAsia,
    MiddleEast,
}

impl Region {
    /// All regions, in display order.
    pub const ALL: [Region; 7] = [
        Region::NorthAmerica,
        Region::SouthAsia,
        Region::LatinAmerica,
        Region::Africa,
        Region::EastAsiaPacific,
        Region::EuropeCentralAsia,
        Region::MiddleEast,
    ];

    /// Display name, also the exact CSV cell value.
    pub fn name(self) -> &'static str {
        match self {
            Region::NorthAmerica => "North America",
            Region::SouthAsia => "South Asia",
            Region::LatinAmerica => "Latin America",
            Region::Africa => "Africa",
            Region::EastAsiaPacific => "East Asia & Pacific",
            Region::EuropeCentralAsia => "Europe & Central Asia",
            Region::MiddleEast => "Middle East",
        }
    }

    /// Parses the display name back into a region.
    pub fn parse(s: &str) -> Option<Region> {
        Region::ALL.into_iter().find(|r| r.name() == s)
    }
}

/// Primary purpose of the dam project.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectType {
    Hydropower,
    Irrigation,
    FloodControl,
    WaterSupply,
    Multipurpose,
}

impl ProjectType {
    /// CSV cell value.
    pub fn name(self) -> &'static str {
        match self {
            ProjectType::Hydropower => "hydropower",
            ProjectType::Irrigation => "irrigation",
            ProjectType::FloodControl => "flood_control",
            ProjectType::WaterSupply => "water_supply",
            ProjectType::Multipurpose => "multipurpose",
        }
    }

    /// Parses the CSV cell value.
    pub fn parse(s: &str) -> Option<ProjectType> {
        [
            ProjectType::Hydropower,
            ProjectType::Irrigation,
            ProjectType::FloodControl,
            ProjectType::WaterSupply,
            ProjectType::Multipurpose,
        ]
        .into_iter()
        .find(|t| t.name() == s)
    }
}

/// One completed (or proposed) project with its physical features, costs,
/// schedule, and country linkage.
///
/// Costs are in constant base-year local currency. Cost and schedule fields
/// are optional so that records with incomplete outturn data can still be
/// described; observation derivation requires all four.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DamRecord {
    pub id: String,
    pub name: String,
    /// ISO-3166 alpha-3 code; must be present in the fixed lookup table.
    pub country: String,
    pub region: Region,
    pub project_type: ProjectType,
    pub is_hydropower: bool,
    pub is_new_station: bool,
    pub wall_height_m: f64,
    pub wall_length_m: Option<f64>,
    pub installed_capacity_mw: Option<f64>,
    pub unit_capacity_mw: Option<f64>,
    pub reservoir_area_ha: Option<f64>,
    pub tunnel_length_km: Option<f64>,
    /// Estimated cost in constant base-year local currency.
    pub estimated_cost: Option<f64>,
    /// Actual outturn cost, same units as the estimate.
    pub actual_cost: Option<f64>,
    pub currency: String,
    /// Year whose prices the costs are expressed in (= year of decision to build).
    pub base_year: i32,
    pub year_decision: i32,
    pub year_completion: Option<i32>,
    pub estimated_schedule_months: Option<f64>,
    pub actual_schedule_months: Option<f64>,
    pub fx_cost_share_pct: Option<f64>,
    pub icb_share_pct: Option<f64>,
    pub local_contractor: Option<bool>,
    pub inflation_contingency_pct: Option<f64>,
    pub estimated_bcr: Option<f64>,
}

/// Per-country macroeconomic time series, each keyed by calendar year.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CountryMacroSeries {
    pub country: String,
    pub deflator: BTreeMap<i32, f64>,
    pub fx_rate_lcu_per_usd: BTreeMap<i32, f64>,
    pub per_capita_income_const2000usd: BTreeMap<i32, f64>,
    pub gdp_nominal_usd: BTreeMap<i32, f64>,
    pub polity2: BTreeMap<i32, i32>,
    pub muv_index: BTreeMap<i32, f64>,
}

impl CountryMacroSeries {
    /// Democracy dummy at `year`: polity2 score of +6 or above.
    pub fn democracy_at(&self, year: i32) -> Option<bool> {
        self.polity2
            .get(&year)
            .map(|p| *p >= DEMOCRACY_POLITY2_THRESHOLD)
    }

    /// Long-term inflation implied by this country's full deflator series.
    pub fn long_term_inflation(&self) -> Result<f64> {
        long_term_inflation(&self.deflator)
    }
}

/// Derived outcome ratios for one project.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverrunObservation {
    pub dam_id: String,
    /// Actual / estimated cost, both in constant base-year local currency.
    pub cost_overrun: f64,
    /// Actual / estimated implementation duration in months.
    pub schedule_slippage: f64,
}

/// A validated collection of project records plus the observations derivable
/// from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceClass {
    records: Vec<DamRecord>,
    /// Provenance of the filter predicate that selected these records.
    filter_description: String,
    observations: Vec<OverrunObservation>,
}

impl ReferenceClass {
    /// Builds a reference class, deriving observations from every record with
    /// complete cost and schedule fields. Errors on an empty record list.
    pub fn from_records(records: Vec<DamRecord>, filter_description: &str) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::validation("empty reference class"));
        }
        let observations = records
            .iter()
            .filter_map(|r| derive_observation(r).ok())
            .collect();
        Ok(ReferenceClass {
            records,
            filter_description: filter_description.to_string(),
            observations,
        })
    }

    pub fn records(&self) -> &[DamRecord] {
        &self.records
    }

    pub fn filter_description(&self) -> &str {
        &self.filter_description
    }

    pub fn observations(&self) -> &[OverrunObservation] {
        &self.observations
    }

    /// Cost-overrun factors of all derivable observations.
    pub fn cost_overruns(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.cost_overrun).collect()
    }

    /// Schedule-slippage factors of all derivable observations.
    pub fn schedule_slippages(&self) -> Vec<f64> {
        self.observations
            .iter()
            .map(|o| o.schedule_slippage)
            .collect()
    }

    /// Whether quantile queries should carry a small-sample warning
    /// (fewer than 20 observations).
    pub fn is_small_sample(&self) -> bool {
        self.observations.len() < 20
    }
}

/// Derives the overrun observation of a single record.
///
/// Requires all four cost/schedule fields present and positive; a zero or
/// absent estimate makes the ratio undefined.
pub fn derive_observation(record: &DamRecord) -> Result<OverrunObservation> {
    let field = |v: Option<f64>, name: &str| -> Result<f64> {
        match v {
            Some(x) if x > 0.0 => Ok(x),
            Some(x) => Err(Error::validation(format!(
                "undefined ratio: {name} = {x} must be > 0 for record {}",
                record.id
            ))),
            None => Err(Error::validation(format!(
                "undefined ratio: {name} absent for record {}",
                record.id
            ))),
        }
    };
    let est_cost = field(record.estimated_cost, "estimated_cost")?;
    let act_cost = field(record.actual_cost, "actual_cost")?;
    let est_sched = field(record.estimated_schedule_months, "estimated_schedule_months")?;
    let act_sched = field(record.actual_schedule_months, "actual_schedule_months")?;
    Ok(OverrunObservation {
        dam_id: record.id.clone(),
        cost_overrun: act_cost / est_cost,
        schedule_slippage: act_sched / est_sched,
    })
}

/// Converts nominal payments to a constant base-year amount:
/// Σ amount_t × deflator(base_year)/deflator(t).
///
/// Errors when the deflator series is missing any payment year or the base
/// year, naming the missing year.
pub fn normalize_to_constant(
    payments: &[(i32, f64)],
    deflator: &BTreeMap<i32, f64>,
    base_year: i32,
) -> Result<f64> {
    let base = *deflator
        .get(&base_year)
        .ok_or_else(|| Error::validation(format!("deflator missing base year {base_year}")))?;
    if base <= 0.0 {
        return Err(Error::validation(format!(
            "deflator at base year {base_year} must be positive, found {base}"
        )));
    }
    let mut total = 0.0;
    for (year, amount) in payments {
        let d = *deflator
            .get(year)
            .ok_or_else(|| Error::validation(format!("deflator missing year {year}")))?;
        if d <= 0.0 {
            return Err(Error::validation(format!(
                "deflator at year {year} must be positive, found {d}"
            )));
        }
        total += amount * base / d;
    }
    Ok(total)
}

/// Long-term annual inflation implied by a GDP deflator series, in percent
/// (8.0 means 8%/yr).
///
/// Fits ordinary least squares of ln(deflator) on calendar year and returns
/// (e^slope − 1) × 100. Invariant to positive rescaling of the deflator and
/// to shifting all years by a constant.
pub fn long_term_inflation(deflator: &BTreeMap<i32, f64>) -> Result<f64> {
    if deflator.len() < 2 {
        return Err(Error::validation(format!(
            "long-term inflation needs at least 2 deflator years, found {}",
            deflator.len()
        )));
    }
    let mut xs = Vec::with_capacity(deflator.len());
    let mut ys = Vec::with_capacity(deflator.len());
    for (year, value) in deflator {
        if *value <= 0.0 {
            return Err(Error::validation(format!(
                "deflator at year {year} must be positive, found {value}"
            )));
        }
        xs.push(*year as f64);
        ys.push(value.ln());
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok((slope.exp() - 1.0) * 100.0)
}

/// Shared test helpers for other modules' unit tests.
#[cfg(test)]
pub(crate) mod tests_support {
    pub(crate) use super::tests::sample_record;
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample_record(id: &str) -> DamRecord {
        DamRecord {
            id: id.to_string(),
            name: format!("Dam {id}"),
            country: "COL".to_string(),
            region: Region::LatinAmerica,
            project_type: ProjectType::Hydropower,
            is_hydropower: true,
            is_new_station: true,
            wall_height_m: 120.0,
            wall_length_m: Some(300.0),
            installed_capacity_mw: Some(1000.0),
            unit_capacity_mw: Some(250.0),
            reservoir_area_ha: None,
            tunnel_length_km: None,
            estimated_cost: Some(127.8),
            actual_cost: Some(168.7),
            currency: "COP".to_string(),
            base_year: 1970,
            year_decision: 1970,
            year_completion: Some(1977),
            estimated_schedule_months: Some(60.0),
            actual_schedule_months: Some(84.0),
            fx_cost_share_pct: Some(40.0),
            icb_share_pct: None,
            local_contractor: Some(false),
            inflation_contingency_pct: Some(10.0),
            estimated_bcr: Some(1.4),
        }
    }

    #[test]
    fn observation_chivor_style() {
        let obs = derive_observation(&sample_record("chivor")).unwrap();
        assert!((obs.cost_overrun - 168.7 / 127.8).abs() < 1e-15);
        assert!((obs.cost_overrun - 1.32).abs() < 0.005);
        assert!((obs.schedule_slippage - 1.4).abs() < 1e-12);
    }

    #[test]
    fn observation_identity_when_estimate_met() {
        let mut r = sample_record("exact");
        r.actual_cost = r.estimated_cost;
        r.actual_schedule_months = r.estimated_schedule_months;
        let obs = derive_observation(&r).unwrap();
        assert_eq!(obs.cost_overrun, 1.0);
        assert_eq!(obs.schedule_slippage, 1.0);
    }

    #[test]
    fn observation_table_mean_slippage() {
        let mut r = sample_record("means");
        r.estimated_schedule_months = Some(73.1);
        r.actual_schedule_months = Some(102.7);
        let obs = derive_observation(&r).unwrap();
        assert!((obs.schedule_slippage - 1.4049247606019153).abs() < 1e-12);
    }

    #[test]
    fn observation_requires_all_four_fields() {
        let mut r = sample_record("missing");
        r.actual_cost = None;
        let err = derive_observation(&r).unwrap_err();
        assert!(err.to_string().contains("actual_cost"));

        let mut r = sample_record("zero");
        r.estimated_cost = Some(0.0);
        assert!(derive_observation(&r).is_err());
    }

    #[test]
    fn normalize_flat_deflator_is_nominal_sum() {
        let deflator: BTreeMap<i32, f64> = [(2000, 1.0), (2001, 1.0)].into();
        let v = normalize_to_constant(&[(2000, 100.0), (2001, 100.0)], &deflator, 2000).unwrap();
        assert_eq!(v, 200.0);
    }

    #[test]
    fn normalize_discounts_later_payment() {
        let deflator: BTreeMap<i32, f64> = [(2000, 1.0), (2001, 1.1)].into();
        let v = normalize_to_constant(&[(2000, 100.0), (2001, 100.0)], &deflator, 2000).unwrap();
        assert!((v - (100.0 + 100.0 / 1.1)).abs() < 1e-12);
        assert!((v - 190.909090909).abs() < 1e-6);
    }

    #[test]
    fn normalize_halves_when_deflator_doubled() {
        let deflator: BTreeMap<i32, f64> = [(2000, 1.0), (2010, 2.0)].into();
        let v = normalize_to_constant(&[(2010, 100.0)], &deflator, 2000).unwrap();
        assert_eq!(v, 50.0);
    }

    #[test]
    fn normalize_names_missing_year() {
        let deflator: BTreeMap<i32, f64> = [(2000, 1.0)].into();
        let err = normalize_to_constant(&[(2003, 1.0)], &deflator, 2000).unwrap_err();
        assert!(err.to_string().contains("2003"));
    }

    #[test]
    fn inflation_exact_geometric_series() {
        let deflator: BTreeMap<i32, f64> =
            (0..10).map(|t| (1990 + t, 1.05_f64.powi(t))).collect();
        let rate = long_term_inflation(&deflator).unwrap();
        assert!((rate - 5.0).abs() < 1e-9, "rate = {rate}");
    }

    #[test]
    fn inflation_hand_ols_oracle() {
        // OLS of ln{1.00, 1.02, 1.081, 1.097} on years 0..3:
        // logs {0, 0.0198026, 0.0778875, 0.0925789}, slope 0.03358215,
        // so the annualized rate is (e^slope − 1)·100 = 3.41524% (hand oracle).
        let deflator: BTreeMap<i32, f64> =
            [(0, 1.00), (1, 1.02), (2, 1.081), (3, 1.097)].into();
        let rate = long_term_inflation(&deflator).unwrap();
        assert!((rate - 3.4152391).abs() < 1e-6, "rate = {rate}");
    }

    #[test]
    fn inflation_invariant_to_rescaling_and_year_shift() {
        let base: BTreeMap<i32, f64> = [(0, 1.00), (1, 1.02), (2, 1.081), (3, 1.097)].into();
        let scaled: BTreeMap<i32, f64> = base.iter().map(|(y, v)| (*y, v * 1000.0)).collect();
        let shifted: BTreeMap<i32, f64> = base.iter().map(|(y, v)| (y + 1950, *v)).collect();
        let r0 = long_term_inflation(&base).unwrap();
        assert!((long_term_inflation(&scaled).unwrap() - r0).abs() < 1e-9);
        assert!((long_term_inflation(&shifted).unwrap() - r0).abs() < 1e-9);
    }

    #[test]
    fn inflation_rejects_degenerate_series() {
        let one: BTreeMap<i32, f64> = [(2000, 1.0)].into();
        assert!(long_term_inflation(&one).is_err());
        let bad: BTreeMap<i32, f64> = [(2000, 1.0), (2001, -0.5)].into();
        assert!(long_term_inflation(&bad).is_err());
    }

    #[test]
    fn democracy_threshold_rule() {
        let mut m = CountryMacroSeries {
            country: "PAK".into(),
            ..Default::default()
        };
        m.polity2.insert(2000, 7);
        m.polity2.insert(2001, 6);
        m.polity2.insert(2002, 5);
        m.polity2.insert(2003, -3);
        assert_eq!(m.democracy_at(2000), Some(true));
        assert_eq!(m.democracy_at(2001), Some(true));
        assert_eq!(m.democracy_at(2002), Some(false));
        assert_eq!(m.democracy_at(2003), Some(false));
        assert_eq!(m.democracy_at(1999), None);
    }

    #[test]
    fn reference_class_skips_incomplete_records_in_observations() {
        let mut incomplete = sample_record("b");
        incomplete.actual_cost = None;
        let rc =
            ReferenceClass::from_records(vec![sample_record("a"), incomplete], "unit test").unwrap();
        assert_eq!(rc.records().len(), 2);
        assert_eq!(rc.observations().len(), 1);
        assert_eq!(rc.observations()[0].dam_id, "a");
        assert!(rc.is_small_sample());
    }
}
