//! Linear mixed-effects model engine: design construction from reference
//! classes, profiled ML/REML fitting with a single random intercept per
//! country, inference, best linear unbiased predictions of the group
//! effects, backward stepwise selection, and prediction.
//!
//! The scope is deliberately narrow — exactly one random-intercept level
//! (projects nested in countries), Gaussian errors, and a handful of fixed
//! effects — which lets the likelihood be profiled down to a one-dimensional
//! search over the variance ratio and keeps every fit deterministic.

mod design;
mod fit;
mod stepwise;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::Transformation;

pub use design::{build_design, Design, DropReport, RowDrop, VARIABLES};
pub use fit::{fit, predict, Prediction};
pub use stepwise::{stepwise, EliminationStep, StepwiseOutcome};

/// Estimation method for the variance components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "ML")]
    Ml,
    #[serde(rename = "REML")]
    Reml,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Ml => "ML",
            Method::Reml => "REML",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s.to_ascii_lowercase().as_str() {
            "ml" => Some(Method::Ml),
            "reml" => Some(Method::Reml),
            _ => None,
        }
    }
}

/// The response side of a model: which variable, and the scale it is
/// modeled on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseSpec {
    pub variable: String,
    pub transformation: Transformation,
}

/// What a design column is made of.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TermKind {
    /// A transformed continuous variable.
    Covariate {
        variable: String,
        transformation: Transformation,
    },
    /// A 0/1 indicator resolved from a boolean variable.
    Dummy { variable: String },
    /// Elementwise product of two previously declared terms.
    Interaction { left: String, right: String },
}

/// One named design column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub name: String,
    #[serde(flatten)]
    pub kind: TermKind,
}

impl Term {
    /// Continuous covariate whose column name is the variable name.
    pub fn covariate(variable: &str, transformation: Transformation) -> Term {
        Term {
            name: variable.to_string(),
            kind: TermKind::Covariate {
                variable: variable.to_string(),
                transformation,
            },
        }
    }

    /// Indicator covariate from a boolean variable.
    pub fn dummy(variable: &str) -> Term {
        Term {
            name: variable.to_string(),
            kind: TermKind::Dummy {
                variable: variable.to_string(),
            },
        }
    }

    /// Product of two declared terms.
    pub fn interaction(name: &str, left: &str, right: &str) -> Term {
        Term {
            name: name.to_string(),
            kind: TermKind::Interaction {
                left: left.to_string(),
                right: right.to_string(),
            },
        }
    }

    /// Names of the terms this term's column is computed from (empty for
    /// non-interactions).
    pub fn references(&self) -> Vec<&str> {
        match &self.kind {
            TermKind::Interaction { left, right } => vec![left, right],
            _ => Vec::new(),
        }
    }
}

/// Full specification of one model: response, fixed-effect terms, grouping
/// variable for the random intercept, and whether an intercept column is
/// included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub response: ResponseSpec,
    pub terms: Vec<Term>,
    /// Grouping variable for the random intercept (only `country` is
    /// supported).
    pub grouping: String,
    pub intercept: bool,
}

impl ModelSpec {
    pub fn new(response: ResponseSpec, terms: Vec<Term>) -> ModelSpec {
        ModelSpec {
            response,
            terms,
            grouping: "country".to_string(),
            intercept: true,
        }
    }

    /// Checks structural invariants: unique term names, interactions
    /// referencing declared non-interaction terms, supported grouping.
    pub fn validate(&self) -> Result<()> {
        if self.grouping != "country" {
            return Err(Error::validation(format!(
                "unsupported grouping variable {:?}: only country-level random intercepts \
                 are implemented",
                self.grouping
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for term in &self.terms {
            if term.name == "(intercept)" {
                return Err(Error::validation(
                    "term name (intercept) is reserved for the intercept column",
                ));
            }
            if !seen.insert(term.name.as_str()) {
                return Err(Error::validation(format!(
                    "duplicate term name {:?}",
                    term.name
                )));
            }
        }
        for term in &self.terms {
            for reference in term.references() {
                let target = self.terms.iter().find(|t| t.name == reference);
                match target {
                    None => {
                        return Err(Error::validation(format!(
                            "interaction {:?} references undeclared term {:?}",
                            term.name, reference
                        )))
                    }
                    Some(t) if matches!(t.kind, TermKind::Interaction { .. }) => {
                        return Err(Error::validation(format!(
                            "interaction {:?} references interaction {:?}; \
                             only first-order interactions are supported",
                            term.name, reference
                        )))
                    }
                    Some(_) => {}
                }
            }
        }
        Ok(())
    }

    /// Design column names in order: intercept (when present) then terms.
    pub fn column_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.terms.len() + 1);
        if self.intercept {
            names.push("(intercept)".to_string());
        }
        names.extend(self.terms.iter().map(|t| t.name.clone()));
        names
    }
}

/// A fitted mixed model: estimates, inference, variance components, group
/// effects, and the bookkeeping needed to audit the fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub spec: ModelSpec,
    /// Design column names aligned with `beta`/`se`/`t_stats`/`p_values`.
    pub columns: Vec<String>,
    pub beta: Vec<f64>,
    pub se: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub p_values: Vec<f64>,
    /// Random-intercept variance (≥ 0).
    pub sigma2_group: f64,
    /// Residual variance (> 0).
    pub sigma2_resid: f64,
    /// Best linear unbiased prediction of each group's intercept shift.
    pub group_effects: BTreeMap<String, f64>,
    pub loglik: f64,
    pub method: Method,
    /// Residual degrees of freedom used for the t tests.
    pub df_resid: f64,
    /// The documented df rule behind `df_resid`.
    pub df_convention: String,
    pub n_used: usize,
    pub n_dropped: usize,
    /// Sum of squared conditional residuals (observed − fixed − group
    /// effect) on the transformed scale.
    pub rss_conditional: f64,
    pub warnings: Vec<String>,
}

impl FittedModel {
    /// Renders the printed four-column coefficient table plus variance
    /// components.
    pub fn coefficient_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<28} {:>12} {:>12} {:>8} {:>8}",
            "term", "coefficient", "std error", "t", "p(2-tail)"
        );
        for (i, name) in self.columns.iter().enumerate() {
            let _ = writeln!(
                out,
                "{:<28} {:>12.4} {:>12.4} {:>8.3} {:>8.3}",
                name, self.beta[i], self.se[i], self.t_stats[i], self.p_values[i]
            );
        }
        let _ = writeln!(out, "\nmethod: {}   log-likelihood: {:.4}", self.method.name(), self.loglik);
        let _ = writeln!(
            out,
            "variance components: group {:.6}  residual {:.6}",
            self.sigma2_group, self.sigma2_resid
        );
        let _ = writeln!(out, "df: {} ({})", self.df_resid, self.df_convention);
        let _ = writeln!(
            out,
            "rows used: {}   rows dropped: {}   groups: {}",
            self.n_used,
            self.n_dropped,
            self.group_effects.len()
        );
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }

    /// Serializes the model to deterministic JSON.
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::input(format!("cannot serialize fitted model: {e}")))
    }

    /// Deserializes a model previously written by [`FittedModel::to_json`].
    pub fn from_json(text: &str) -> Result<FittedModel> {
        let model: FittedModel = serde_json::from_str(text)
            .map_err(|e| Error::input(format!("cannot parse fitted model JSON: {e}")))?;
        model.check_invariants()?;
        Ok(model)
    }

    /// Structural invariants every fitted (or deserialized) model must hold.
    pub fn check_invariants(&self) -> Result<()> {
        self.spec.validate()?;
        let k = self.columns.len();
        if self.beta.len() != k
            || self.se.len() != k
            || self.t_stats.len() != k
            || self.p_values.len() != k
        {
            return Err(Error::validation(
                "coefficient vectors must all match the column count",
            ));
        }
        if !(self.sigma2_group >= 0.0) || !(self.sigma2_resid > 0.0) {
            return Err(Error::validation(format!(
                "variances out of range: group {} residual {}",
                self.sigma2_group, self.sigma2_resid
            )));
        }
        if self.p_values.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::validation("p-values must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Shared helpers for this module's unit tests.
#[cfg(test)]
pub(crate) mod tests_support {
    use nalgebra::DVector;

    /// Projects `e` orthogonal to the span of `cols` (modified Gram–Schmidt,
    /// applied twice for stability). Used to build datasets whose noise is
    /// exactly uncorrelated with the design and the group indicators, so
    /// least-squares recovery and zero variance components are exact.
    pub(crate) fn project_out(mut e: DVector<f64>, cols: &[DVector<f64>]) -> DVector<f64> {
        let mut basis: Vec<DVector<f64>> = Vec::new();
        for col in cols {
            let mut v = col.clone();
            for b in &basis {
                let p = b.dot(&v);
                v.axpy(-p, b, 1.0);
            }
            if v.norm() > 1e-9 {
                let norm = v.norm();
                basis.push(v / norm);
            }
        }
        for _ in 0..2 {
            for b in &basis {
                let p = b.dot(&e);
                e.axpy(-p, b, 1.0);
            }
        }
        e
    }
}
