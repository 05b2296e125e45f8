//! The four published regression models as frozen coefficient sets, plus the
//! two-pronged forecast workflow that combines them with reference-class
//! uplifts for a proposed project.
//!
//! Nothing here refits anything: coefficients are loaded verbatim from the
//! bundled fixture and applied as fixed effects only (no country random
//! intercepts were published). Two responses are modeled on a reciprocal
//! scale, which makes raw coefficient signs counterintuitive — reports
//! therefore always carry both the transformed-scale linear predictor and
//! the back-transformed factor.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rcf::{self, ViabilityVerdict};
use crate::refdata::ReferenceClass;
use crate::stats::{EmpiricalDistribution, Transformation};

/// Identifier of one of the four published models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelId {
    #[serde(rename = "M1_cost_overrun")]
    M1CostOverrun,
    #[serde(rename = "M2_est_schedule")]
    M2EstSchedule,
    #[serde(rename = "M3_schedule_slip")]
    M3ScheduleSlip,
    #[serde(rename = "M4_actual_schedule")]
    M4ActualSchedule,
}

impl ModelId {
    pub const ALL: [ModelId; 4] = [
        ModelId::M1CostOverrun,
        ModelId::M2EstSchedule,
        ModelId::M3ScheduleSlip,
        ModelId::M4ActualSchedule,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelId::M1CostOverrun => "M1_cost_overrun",
            ModelId::M2EstSchedule => "M2_est_schedule",
            ModelId::M3ScheduleSlip => "M3_schedule_slip",
            ModelId::M4ActualSchedule => "M4_actual_schedule",
        }
    }

    /// Parses the full name or the short alias (`M1` … `M4`).
    pub fn parse(s: &str) -> Option<ModelId> {
        ModelId::ALL
            .into_iter()
            .find(|m| m.name() == s || m.name().split('_').next() == Some(s))
    }
}

/// Printed inference statistics for one coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientStats {
    pub coefficient: f64,
    pub se: f64,
    pub t: f64,
    pub p: f64,
}

/// One covariate term of a published model: the descriptor field it reads,
/// the transformation applied to it, and the printed statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishedTerm {
    pub name: String,
    pub label: String,
    pub transformation: Transformation,
    #[serde(flatten)]
    pub stats: CoefficientStats,
}

/// One published model, frozen exactly as printed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishedModel {
    pub id: ModelId,
    pub title: String,
    /// What the back-transformed prediction is (e.g. `cost_overrun`).
    pub response: String,
    /// Transformation whose *inverse* maps the linear predictor back to the
    /// response scale.
    pub response_transformation: Transformation,
    pub observations: u32,
    pub provenance: String,
    pub intercept: CoefficientStats,
    pub terms: Vec<PublishedTerm>,
}

impl PublishedModel {
    /// Sum of absolute coefficient values (intercept included); a cheap
    /// checksum that freezes the printed numbers.
    pub fn coefficient_checksum(&self) -> f64 {
        self.intercept.coefficient.abs()
            + self
                .terms
                .iter()
                .map(|t| t.stats.coefficient.abs())
                .sum::<f64>()
    }

    /// Evaluates the linear predictor on a descriptor, collecting caveats
    /// for any derived term.
    pub fn linear_predictor(&self, d: &ProjectDescriptor) -> Result<(f64, Vec<String>)> {
        let mut lp = self.intercept.coefficient;
        let mut caveats = Vec::new();
        for term in &self.terms {
            let raw = d.term_value(&term.name)?;
            let x = term.transformation.forward(raw).map_err(|e| {
                Error::validation(format!(
                    "term {} of {}: {e}",
                    term.name,
                    self.id.name()
                ))
            })?;
            lp += term.stats.coefficient * x;
            if let Some(caveat) = d.term_caveat(&term.name) {
                caveats.push(caveat);
            }
        }
        Ok((lp, caveats))
    }
}

/// A published headline number that the frozen fixed effects cannot
/// reproduce; shipped as an annotated constant, never reconciled by tuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadlineClaim {
    pub model: ModelId,
    pub claim: String,
    pub status: String,
}

/// The full frozen model set as loaded from the bundled fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishedModelSet {
    pub df_note: String,
    pub headline_claims: Vec<HeadlineClaim>,
    pub models: Vec<PublishedModel>,
}

impl PublishedModelSet {
    pub fn model(&self, id: ModelId) -> Result<&PublishedModel> {
        self.models
            .iter()
            .find(|m| m.id == id)
            .ok_or_else(|| Error::input(format!("model {} not in the fixture set", id.name())))
    }

    /// Checksum over every model; freezes the whole coefficient table.
    pub fn coefficient_checksum(&self) -> f64 {
        self.models.iter().map(|m| m.coefficient_checksum()).sum()
    }
}

/// Inputs describing a proposed project. Fields required by a given model
/// are checked per call, not globally, so a partial descriptor can still
/// feed the models it covers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectDescriptor {
    pub name: String,
    #[serde(default)]
    pub country: Option<String>,
    #[serde(default)]
    pub estimated_cost: Option<f64>,
    #[serde(default)]
    pub currency: Option<String>,
    #[serde(default)]
    pub estimated_schedule_months: Option<f64>,
    /// Long-term inflation in percent units (8 means 8%/yr).
    #[serde(default)]
    pub long_term_inflation_pct: Option<f64>,
    #[serde(default)]
    pub democracy: Option<bool>,
    #[serde(default)]
    pub south_asia: Option<bool>,
    #[serde(default)]
    pub per_capita_income_2000usd: Option<f64>,
    #[serde(default)]
    pub wall_height_m: Option<f64>,
    #[serde(default)]
    pub wall_length_m: Option<f64>,
    #[serde(default)]
    pub installed_capacity_mw: Option<f64>,
    #[serde(default)]
    pub estimated_bcr: Option<f64>,
    #[serde(default)]
    pub year_decision: Option<i32>,
}

impl ProjectDescriptor {
    /// A descriptor with only a name; fill in fields as known.
    pub fn named(name: &str) -> Self {
        ProjectDescriptor {
            name: name.to_string(),
            country: None,
            estimated_cost: None,
            currency: None,
            estimated_schedule_months: None,
            long_term_inflation_pct: None,
            democracy: None,
            south_asia: None,
            per_capita_income_2000usd: None,
            wall_height_m: None,
            wall_length_m: None,
            installed_capacity_mw: None,
            estimated_bcr: None,
            year_decision: None,
        }
    }

    /// Positive physical quantities must be positive when present.
    pub fn validate(&self) -> Result<()> {
        for (value, field) in [
            (self.estimated_cost, "estimated_cost"),
            (self.estimated_schedule_months, "estimated_schedule_months"),
            (self.per_capita_income_2000usd, "per_capita_income_2000usd"),
            (self.wall_height_m, "wall_height_m"),
            (self.wall_length_m, "wall_length_m"),
            (self.installed_capacity_mw, "installed_capacity_mw"),
            (self.estimated_bcr, "estimated_bcr"),
        ] {
            if let Some(v) = value {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::validation(format!(
                        "descriptor field {field} must be positive, found {v}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn require(&self, v: Option<f64>, name: &str) -> Result<f64> {
        v.ok_or_else(|| {
            Error::validation(format!(
                "missing term: {name} (descriptor {:?})",
                self.name
            ))
        })
    }

    /// Raw (untransformed) value of a named model term.
    ///
    /// Dummies resolve to 0/1; `democracy_x_south_asia` is their product;
    /// `year_completion` is derived as decision year + estimated schedule.
    pub fn term_value(&self, name: &str) -> Result<f64> {
        let dummy = |v: Option<bool>| v.map(|b| if b { 1.0 } else { 0.0 });
        match name {
            "estimated_cost" => self.require(self.estimated_cost, name),
            "estimated_schedule_months" => self.require(self.estimated_schedule_months, name),
            "long_term_inflation_pct" => self.require(self.long_term_inflation_pct, name),
            "per_capita_income_2000usd" => self.require(self.per_capita_income_2000usd, name),
            "wall_height_m" => self.require(self.wall_height_m, name),
            "wall_length_m" => self.require(self.wall_length_m, name),
            "installed_capacity_mw" => self.require(self.installed_capacity_mw, name),
            "estimated_bcr" => self.require(self.estimated_bcr, name),
            "democracy" => self.require(dummy(self.democracy), name),
            "south_asia" => self.require(dummy(self.south_asia), name),
            "democracy_x_south_asia" => {
                let d = self.require(dummy(self.democracy), "democracy")?;
                let s = self.require(dummy(self.south_asia), "south_asia")?;
                Ok(d * s)
            }
            "year_decision" => self
                .require(self.year_decision.map(f64::from), name),
            "year_completion" => {
                let decision = self.require(self.year_decision.map(f64::from), "year_decision")?;
                let months =
                    self.require(self.estimated_schedule_months, "estimated_schedule_months")?;
                Ok(decision + months / 12.0)
            }
            other => Err(Error::input(format!("unknown model term {other:?}"))),
        }
    }

    /// Convention caveat attached to a term, if deriving it involves one.
    pub fn term_caveat(&self, name: &str) -> Option<String> {
        match name {
            "year_completion" => Some(
                "completion year derived as decision year + estimated schedule / 12; \
                 the actual completion year is unknown at appraisal"
                    .to_string(),
            ),
            _ => None,
        }
    }

    /// Returns a copy with `delta` added to the named term. Dummy terms must
    /// land exactly on 0 or 1; `year_completion` shifts the decision year.
    pub fn with_delta(&self, term: &str, delta: f64) -> Result<ProjectDescriptor> {
        let mut d = self.clone();
        let toggled = |v: Option<bool>, field: &str| -> Result<Option<bool>> {
            let base = self.require(v.map(|b| if b { 1.0 } else { 0.0 }), field)?;
            match base + delta {
                x if x == 0.0 => Ok(Some(false)),
                x if x == 1.0 => Ok(Some(true)),
                x => Err(Error::validation(format!(
                    "dummy term {field} must land on 0 or 1, got {x}"
                ))),
            }
        };
        match term {
            "estimated_cost" => {
                d.estimated_cost = Some(self.require(self.estimated_cost, term)? + delta)
            }
            "estimated_schedule_months" => {
                d.estimated_schedule_months =
                    Some(self.require(self.estimated_schedule_months, term)? + delta)
            }
            "long_term_inflation_pct" => {
                d.long_term_inflation_pct =
                    Some(self.require(self.long_term_inflation_pct, term)? + delta)
            }
            "per_capita_income_2000usd" => {
                d.per_capita_income_2000usd =
                    Some(self.require(self.per_capita_income_2000usd, term)? + delta)
            }
            "wall_height_m" => d.wall_height_m = Some(self.require(self.wall_height_m, term)? + delta),
            "wall_length_m" => d.wall_length_m = Some(self.require(self.wall_length_m, term)? + delta),
            "installed_capacity_mw" => {
                d.installed_capacity_mw =
                    Some(self.require(self.installed_capacity_mw, term)? + delta)
            }
            "democracy" => d.democracy = toggled(self.democracy, "democracy")?,
            "south_asia" => d.south_asia = toggled(self.south_asia, "south_asia")?,
            // shifting the decision year shifts the derived completion year
            // one-for-one, so both resolve to the same field
            "year_decision" | "year_completion" => {
                let base = self.require(self.year_decision.map(f64::from), "year_decision")?;
                let shifted = base + delta;
                if shifted.fract() != 0.0 {
                    return Err(Error::validation(format!(
                        "year shift must be a whole number of years, got {delta}"
                    )));
                }
                d.year_decision = Some(shifted as i32);
            }
            other => return Err(Error::input(format!("unknown model term {other:?}"))),
        }
        Ok(d)
    }
}

/// One model's prediction for a descriptor, on both scales.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PublishedPrediction {
    pub model: ModelId,
    pub response: String,
    /// Value of the linear predictor on the transformed response scale.
    pub linear_predictor: f64,
    /// Prediction mapped back to the response scale (a factor or months).
    pub back_transformed: f64,
    pub response_transformation: Transformation,
    pub caveats: Vec<String>,
}

/// Evaluates one frozen model on a descriptor: linear predictor from the
/// printed coefficients, then the inverse response transformation. Applies
/// fixed effects only — no random intercepts were published.
pub fn predict_published(
    set: &PublishedModelSet,
    id: ModelId,
    descriptor: &ProjectDescriptor,
) -> Result<PublishedPrediction> {
    descriptor.validate()?;
    let model = set.model(id)?;
    let (lp, mut caveats) = model.linear_predictor(descriptor)?;
    let back = model.response_transformation.inverse(lp).map_err(|_| {
        Error::numeric(format!(
            "{}: linear predictor {lp} is outside the domain of the inverse {} \
             back-transform; the prediction is undefined for these inputs",
            id.name(),
            model.response_transformation.name()
        ))
    })?;
    caveats.push(
        "fixed effects only: no country random intercept was published or applied".to_string(),
    );
    for claim in set.headline_claims.iter().filter(|c| c.model == id) {
        caveats.push(format!("published claim — {}: {}", claim.claim, claim.status));
    }
    Ok(PublishedPrediction {
        model: id,
        response: model.response.clone(),
        linear_predictor: lp,
        back_transformed: back,
        response_transformation: model.response_transformation,
        caveats,
    })
}

/// Finite-difference sensitivity of a model to one term.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sensitivity {
    pub model: ModelId,
    pub term: String,
    pub delta: f64,
    pub base: PublishedPrediction,
    pub shifted: PublishedPrediction,
    /// Change in the back-transformed prediction (shifted − base).
    pub change_back_transformed: f64,
}

/// Finite-difference of [`predict_published`] at the descriptor and at
/// descriptor + delta on the named term.
pub fn sensitivity(
    set: &PublishedModelSet,
    id: ModelId,
    descriptor: &ProjectDescriptor,
    term: &str,
    delta: f64,
) -> Result<Sensitivity> {
    let model = set.model(id)?;
    if !model.terms.iter().any(|t| t.name == term) {
        return Err(Error::input(format!(
            "term {term:?} is not part of {}",
            id.name()
        )));
    }
    let base = predict_published(set, id, descriptor)?;
    let shifted_descriptor = descriptor.with_delta(term, delta)?;
    let shifted = predict_published(set, id, &shifted_descriptor)?;
    let change_back_transformed = shifted.back_transformed - base.back_transformed;
    Ok(Sensitivity {
        model: id,
        term: term.to_string(),
        delta,
        base,
        shifted,
        change_back_transformed,
    })
}

/// The overrun distributions a forecast draws its uplifts from, with a label
/// naming their origin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceDistributions {
    pub label: String,
    pub cost: Option<EmpiricalDistribution>,
    pub schedule: Option<EmpiricalDistribution>,
}

impl ReferenceDistributions {
    pub fn new(
        label: &str,
        cost: Option<EmpiricalDistribution>,
        schedule: Option<EmpiricalDistribution>,
    ) -> Result<Self> {
        if cost.is_none() && schedule.is_none() {
            return Err(Error::validation(
                "reference distributions need at least one of cost or schedule",
            ));
        }
        Ok(ReferenceDistributions {
            label: label.to_string(),
            cost,
            schedule,
        })
    }

    /// Derives both distributions from an ingested reference class.
    pub fn from_reference_class(class: &ReferenceClass) -> Result<Self> {
        let cost = EmpiricalDistribution::new(class.cost_overruns()).ok();
        let schedule = EmpiricalDistribution::new(class.schedule_slippages()).ok();
        Self::new(class.filter_description(), cost, schedule)
    }
}

/// The reference-class branch of a forecast.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RcfBranch {
    pub acceptable_risk: f64,
    pub source_label: String,
    pub cost_uplift: Option<f64>,
    pub debiased_cost: Option<f64>,
    pub schedule_uplift: Option<f64>,
    pub debiased_schedule_months: Option<f64>,
    pub small_sample: bool,
}

/// The combined two-pronged forecast for a proposed project.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForecastReport {
    pub project: String,
    pub acceptable_risk: f64,
    pub rcf: Option<RcfBranch>,
    pub model_predictions: Vec<PublishedPrediction>,
    pub viability: Option<ViabilityVerdict>,
    pub caveats: Vec<String>,
}

/// Runs both forecast branches for a descriptor: reference-class uplifts on
/// cost and schedule, plus every published model the descriptor can feed.
/// Computes viability from the estimated benefit-cost ratio and the cost
/// uplift factor at the requested risk when both are available.
pub fn forecast_report(
    set: &PublishedModelSet,
    descriptor: &ProjectDescriptor,
    reference: &ReferenceDistributions,
    acceptable_risk: f64,
) -> Result<ForecastReport> {
    descriptor.validate()?;
    let mut caveats = Vec::new();

    let uplift_of = |dist: &Option<EmpiricalDistribution>| -> Result<Option<f64>> {
        dist.as_ref()
            .map(|d| rcf::required_uplift(d, acceptable_risk))
            .transpose()
    };
    let cost_uplift = uplift_of(&reference.cost)?;
    let schedule_uplift = uplift_of(&reference.schedule)?;

    let debias_with = |uplift: Option<f64>, estimate: Option<f64>| -> Result<Option<f64>> {
        match (uplift, estimate) {
            (Some(u), Some(e)) => rcf::debias(e, u).map(Some),
            _ => Ok(None),
        }
    };
    let debiased_cost = debias_with(cost_uplift, descriptor.estimated_cost)?;
    let debiased_schedule_months =
        debias_with(schedule_uplift, descriptor.estimated_schedule_months)?;

    let small_sample = reference
        .cost
        .iter()
        .chain(reference.schedule.iter())
        .any(EmpiricalDistribution::is_small_sample);
    let rcf_branch = if cost_uplift.is_some() || schedule_uplift.is_some() {
        if small_sample {
            caveats.push(format!(
                "reference distributions ({}) have fewer than 20 observations; \
                 quantile uplifts are coarse",
                reference.label
            ));
        }
        Some(RcfBranch {
            acceptable_risk,
            source_label: reference.label.clone(),
            cost_uplift,
            debiased_cost,
            schedule_uplift,
            debiased_schedule_months,
            small_sample,
        })
    } else {
        None
    };

    let mut model_predictions = Vec::new();
    for model in &set.models {
        match predict_published(set, model.id, descriptor) {
            Ok(p) => model_predictions.push(p),
            Err(e) => caveats.push(format!("{} not computed: {e}", model.id.name())),
        }
    }

    if rcf_branch.is_none() && model_predictions.is_empty() {
        return Err(Error::validation(
            "neither forecast branch is computable: no reference distribution applies and \
             the descriptor feeds no published model",
        ));
    }

    let viability = match (descriptor.estimated_bcr, cost_uplift) {
        (Some(bcr), Some(uplift)) => {
            let verdict = rcf::viability(bcr, 1.0 + uplift, 0.0)?;
            caveats.push(format!(
                "viability uses the reference-class cost uplift at risk {acceptable_risk} \
                 as the expected overrun factor; benefits taken at face value"
            ));
            Some(verdict)
        }
        (None, _) => {
            caveats.push("no BCR supplied; viability not assessed".to_string());
            None
        }
        (Some(_), None) => {
            caveats.push(
                "BCR supplied but no cost reference distribution; viability not assessed"
                    .to_string(),
            );
            None
        }
    };

    Ok(ForecastReport {
        project: descriptor.name.clone(),
        acceptable_risk,
        rcf: rcf_branch,
        model_predictions,
        viability,
        caveats,
    })
}

impl ForecastReport {
    /// Renders the report as a fixed-width text table.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "Forecast report: {}", self.project);
        let _ = writeln!(out, "Acceptable risk: {:.0}%", self.acceptable_risk * 100.0);
        if let Some(rcf) = &self.rcf {
            let _ = writeln!(out, "\nReference-class branch ({}):", rcf.source_label);
            if let Some(u) = rcf.cost_uplift {
                let _ = writeln!(out, "  cost uplift          {:>10.1}%", u * 100.0);
            }
            if let Some(c) = rcf.debiased_cost {
                let _ = writeln!(out, "  de-biased budget     {:>10.1}", c);
            }
            if let Some(u) = rcf.schedule_uplift {
                let _ = writeln!(out, "  schedule uplift      {:>10.1}%", u * 100.0);
            }
            if let Some(m) = rcf.debiased_schedule_months {
                let _ = writeln!(out, "  de-biased schedule   {:>10.1} months", m);
            }
        }
        if !self.model_predictions.is_empty() {
            let _ = writeln!(out, "\nPublished-model branch:");
            let _ = writeln!(
                out,
                "  {:<20} {:>18} {:>16}  response",
                "model", "linear predictor", "back-transformed"
            );
            for p in &self.model_predictions {
                let _ = writeln!(
                    out,
                    "  {:<20} {:>18.4} {:>16.3}  {}",
                    p.model.name(),
                    p.linear_predictor,
                    p.back_transformed,
                    p.response
                );
            }
        }
        if let Some(v) = &self.viability {
            let _ = writeln!(
                out,
                "\nViability: de-biased BCR {:.3} → {}",
                v.debiased_bcr,
                if v.stranded { "STRANDED (below 1)" } else { "viable" }
            );
            let _ = writeln!(out, "  assumptions: {}", v.assumptions);
        }
        let mut caveats: Vec<&str> = self.caveats.iter().map(String::as_str).collect();
        caveats.extend(
            self.model_predictions
                .iter()
                .flat_map(|p| p.caveats.iter().map(String::as_str)),
        );
        if !caveats.is_empty() {
            let _ = writeln!(out, "\nCaveats:");
            for c in caveats {
                let _ = writeln!(out, "  - {c}");
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn diamer() -> ProjectDescriptor {
        fixtures::diamer_bhasha().unwrap()
    }

    fn models() -> PublishedModelSet {
        fixtures::published_models().unwrap()
    }

    #[test]
    fn m1_cost_overrun_hand_oracle() {
        // 1.402 − 0.100·ln 120 − 0.085·ln 8
        let p = predict_published(&models(), ModelId::M1CostOverrun, &diamer()).unwrap();
        assert!((p.linear_predictor - 0.7464982947).abs() < 1e-9);
        assert!((p.back_transformed - 1.3395877889).abs() < 1e-9);
        assert!((p.back_transformed - 1.339).abs() < 1e-3);
        assert!(p
            .caveats
            .iter()
            .any(|c| c.contains("44%")), "M1 must carry its headline-gap caveat");
    }

    #[test]
    fn m2_estimated_schedule_hand_oracle() {
        let mut d = ProjectDescriptor::named("hypothetical");
        d.wall_height_m = Some(100.0);
        d.wall_length_m = Some(1000.0);
        d.installed_capacity_mw = Some(1000.0);
        let p = predict_published(&models(), ModelId::M2EstSchedule, &d).unwrap();
        assert!((p.linear_predictor - 4.2451738906).abs() < 1e-9);
        assert!((p.back_transformed - 69.7678910727).abs() < 1e-8);
        assert!((p.back_transformed - 69.8).abs() < 0.1);
    }

    #[test]
    fn m3_schedule_slip_hand_oracles() {
        let p = predict_published(&models(), ModelId::M3ScheduleSlip, &diamer()).unwrap();
        assert!((p.linear_predictor - 0.6115160014).abs() < 1e-9);
        assert!((p.back_transformed - 1.6352801852).abs() < 1e-9);
        // within 4 pp of the published 60%
        assert!((p.back_transformed - 1.60).abs() < 0.04);

        // same dimensions relocated to a high-income non-South-Asia democracy
        let mut us = diamer();
        us.country = Some("USA".into());
        us.south_asia = Some(false);
        us.per_capita_income_2000usd = Some(38_000.0);
        let p = predict_published(&models(), ModelId::M3ScheduleSlip, &us).unwrap();
        assert!((p.linear_predictor - 0.9214048432).abs() < 1e-9);
        assert!((p.back_transformed - 1.0852992660).abs() < 1e-9);
        assert!(
            p.caveats.iter().any(|c| c.contains("0.05%")),
            "M3 must carry the unresolved relocation-claim caveat"
        );
    }

    #[test]
    fn m4_actual_schedule_hand_oracle() {
        let mut d = ProjectDescriptor::named("hypothetical");
        d.wall_length_m = Some(1364.0);
        d.year_decision = Some(1970);
        d.estimated_schedule_months = Some(120.0); // completion 1980
        let p = predict_published(&models(), ModelId::M4ActualSchedule, &d).unwrap();
        assert!((p.linear_predictor - 4.8259085680).abs() < 1e-9);
        assert!((p.back_transformed - 124.6997151040).abs() < 1e-7);
        assert!((p.back_transformed - 124.7).abs() < 0.5);
        assert!(
            p.caveats.iter().any(|c| c.contains("completion year derived")),
            "derived completion year must be flagged"
        );
    }

    #[test]
    fn missing_term_is_named() {
        let mut d = diamer();
        d.long_term_inflation_pct = None;
        let err = predict_published(&models(), ModelId::M1CostOverrun, &d).unwrap_err();
        assert!(err.to_string().contains("long_term_inflation_pct"));
    }

    #[test]
    fn back_transform_domain_guard() {
        // push the M1 linear predictor below zero with an absurd duration
        // and inflation; must error, never produce a negative factor
        let mut d = diamer();
        d.estimated_schedule_months = Some(1e9);
        d.long_term_inflation_pct = Some(1e9);
        let err = predict_published(&models(), ModelId::M1CostOverrun, &d).unwrap_err();
        assert!(err.to_string().contains("undefined"));
    }

    #[test]
    fn nonpositive_log_input_is_an_error() {
        let mut d = diamer();
        d.long_term_inflation_pct = Some(0.0);
        assert!(predict_published(&models(), ModelId::M1CostOverrun, &d).is_err());
    }

    #[test]
    fn sensitivity_duration_at_low_predictor_baseline() {
        // baseline chosen so the linear predictor sits near 0.45, where a
        // one-year duration increase moves the overrun by ~5 pp
        let mut d = ProjectDescriptor::named("stress");
        d.estimated_schedule_months = Some(120.0);
        d.long_term_inflation_pct = Some(261.8198765377);
        let m = models();
        let base = predict_published(&m, ModelId::M1CostOverrun, &d).unwrap();
        assert!((base.linear_predictor - 0.45).abs() < 1e-9);

        let s = sensitivity(&m, ModelId::M1CostOverrun, &d, "estimated_schedule_months", 12.0)
            .unwrap();
        assert!(s.change_back_transformed > 0.0);
        assert!((s.change_back_transformed - 0.0480852020).abs() < 1e-9);
        assert!(
            s.change_back_transformed > 0.04 && s.change_back_transformed < 0.065,
            "one extra year should add roughly 5 pp of overrun here"
        );
    }

    #[test]
    fn sensitivity_democracy_toggle_raises_slippage() {
        let mut d = ProjectDescriptor::named("autocracy-baseline");
        d.democracy = Some(false);
        d.south_asia = Some(false);
        d.per_capita_income_2000usd = Some(38_000.0);
        d.wall_length_m = Some(998.0);
        d.installed_capacity_mw = Some(4500.0);
        let s = sensitivity(&models(), ModelId::M3ScheduleSlip, &d, "democracy", 1.0).unwrap();
        // −0.134 on the reciprocal scale lowers 1/slip, i.e. raises slippage
        assert!(
            s.change_back_transformed > 0.0,
            "democracy must raise predicted slippage, got {}",
            s.change_back_transformed
        );
        assert!(sensitivity(&models(), ModelId::M3ScheduleSlip, &d, "democracy", 0.5).is_err());
    }

    #[test]
    fn sensitivity_rejects_foreign_term() {
        let err = sensitivity(&models(), ModelId::M1CostOverrun, &diamer(), "wall_length_m", 1.0)
            .unwrap_err();
        assert!(err.to_string().contains("not part of"));
    }

    #[test]
    fn forecast_report_worked_example() {
        let summary = fixtures::paper_summary().unwrap();
        let reference = summary.reference_distributions().unwrap();
        let report = forecast_report(&models(), &diamer(), &reference, 0.20).unwrap();

        let rcf = report.rcf.as_ref().unwrap();
        let budget = rcf.debiased_cost.unwrap();
        assert!((budget - 1779.06).abs() < 1e-6);
        assert!((budget / 1788.0 - 1.0).abs() < 0.01);
        let months = rcf.debiased_schedule_months.unwrap();
        assert!((months - 199.2).abs() < 1e-9);
        assert!(rcf.small_sample);

        assert_eq!(report.model_predictions.len(), 4);
        let v = report.viability.as_ref().unwrap();
        assert!(v.stranded);
        assert!((v.debiased_bcr - 1.43 / 1.99).abs() < 1e-9);

        let text = report.to_text();
        assert!(text.contains("STRANDED"));
        assert!(text.contains("M1_cost_overrun"));
    }

    #[test]
    fn forecast_report_without_bcr_adds_caveat() {
        let mut d = diamer();
        d.estimated_bcr = None;
        let summary = fixtures::paper_summary().unwrap();
        let reference = summary.reference_distributions().unwrap();
        let report = forecast_report(&models(), &d, &reference, 0.20).unwrap();
        assert!(report.viability.is_none());
        assert!(report.caveats.iter().any(|c| c.contains("no BCR supplied")));
    }

    #[test]
    fn forecast_report_partial_descriptor_skips_models() {
        let mut d = ProjectDescriptor::named("partial");
        d.estimated_cost = Some(100.0);
        d.estimated_schedule_months = Some(60.0);
        d.long_term_inflation_pct = Some(5.0);
        let summary = fixtures::paper_summary().unwrap();
        let reference = summary.reference_distributions().unwrap();
        let report = forecast_report(&models(), &d, &reference, 0.20).unwrap();
        // only M1 is computable from these fields
        assert_eq!(report.model_predictions.len(), 1);
        assert_eq!(report.model_predictions[0].model, ModelId::M1CostOverrun);
        assert!(report.caveats.iter().any(|c| c.contains("M2_est_schedule")));
    }

    #[test]
    fn forecast_report_errors_when_nothing_computable() {
        let d = ProjectDescriptor::named("blank");
        let schedule_only = ReferenceDistributions::new(
            "unit",
            None,
            Some(EmpiricalDistribution::new(vec![1.0, 1.2, 1.4]).unwrap()),
        )
        .unwrap();
        // schedule distribution exists, so the RCF branch computes an uplift
        // even for a blank descriptor
        assert!(forecast_report(&models(), &d, &schedule_only, 0.2).is_ok());
        assert!(ReferenceDistributions::new("unit", None, None).is_err());
    }

    #[test]
    fn model_id_parsing() {
        assert_eq!(ModelId::parse("M1"), Some(ModelId::M1CostOverrun));
        assert_eq!(ModelId::parse("M3_schedule_slip"), Some(ModelId::M3ScheduleSlip));
        assert_eq!(ModelId::parse("M9"), None);
    }
}
