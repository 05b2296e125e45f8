//! Backward stepwise elimination: repeatedly drop the least significant
//! droppable term until everything surviving clears the significance
//! threshold.
//!
//! Interactions shield their main effects — a main is never dropped while
//! an interaction referencing it survives — and exact p-value ties break
//! toward the later-declared term, with the tie recorded in the trace.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::refdata::{CountryMacroSeries, ReferenceClass};

use super::{build_design, fit, FittedModel, Method, ModelSpec, TermKind};

/// One elimination decision.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EliminationStep {
    pub term: String,
    pub p_value: f64,
    /// Rows used by the fit that made this decision (listwise deletion can
    /// change as terms leave the model).
    pub n_used: usize,
    /// Records p-value ties and how they were broken.
    pub note: Option<String>,
}

/// The surviving specification, the ordered elimination trace, and the
/// final fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepwiseOutcome {
    pub spec: ModelSpec,
    pub trace: Vec<EliminationStep>,
    pub fit: FittedModel,
    pub alpha: f64,
    pub warnings: Vec<String>,
}

/// Runs backward elimination from the candidate specification.
///
/// Each round fits the current model, finds the unprotected term with the
/// largest p-value above `alpha`, drops it, and refits; mains referenced by
/// a surviving interaction are protected, so interactions always leave
/// before the terms they are built from.
pub fn stepwise(
    rc: &ReferenceClass,
    macros: &BTreeMap<String, CountryMacroSeries>,
    candidates: &ModelSpec,
    alpha: f64,
    method: Method,
) -> Result<StepwiseOutcome> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::validation(format!(
            "alpha must lie in (0, 1), found {alpha}"
        )));
    }
    candidates.validate()?;
    if candidates.terms.is_empty() {
        return Err(Error::validation(
            "stepwise needs at least one candidate term",
        ));
    }

    let mut spec = candidates.clone();
    let mut trace = Vec::new();
    let mut warnings = Vec::new();

    loop {
        let design = build_design(rc, macros, &spec)?;
        let fitted = fit(&design, method)?;
        let offset = usize::from(spec.intercept);

        let protected: BTreeSet<&str> = spec
            .terms
            .iter()
            .filter(|t| matches!(t.kind, TermKind::Interaction { .. }))
            .flat_map(|t| t.references())
            .collect();

        // droppable terms above the threshold, in declaration order
        let droppable: Vec<(usize, f64)> = spec
            .terms
            .iter()
            .enumerate()
            .filter(|(_, t)| !protected.contains(t.name.as_str()))
            .map(|(i, _)| (i, fitted.p_values[offset + i]))
            .filter(|(_, p)| *p > alpha)
            .collect();

        let Some(&(_, max_p)) = droppable
            .iter()
            .max_by(|a, b| a.1.partial_cmp(&b.1).expect("p-values are never NaN"))
        else {
            if spec.terms.is_empty() {
                warnings.push(
                    "all candidate terms were eliminated; returning the intercept-only model"
                        .to_string(),
                );
            }
            return Ok(StepwiseOutcome {
                spec,
                trace,
                fit: fitted,
                alpha,
                warnings,
            });
        };

        // ties break toward the later-declared term
        let tied: Vec<usize> = droppable
            .iter()
            .filter(|(_, p)| *p == max_p)
            .map(|(i, _)| *i)
            .collect();
        let chosen = *tied.last().expect("tied set is nonempty");
        let note = (tied.len() > 1).then(|| {
            let others: Vec<&str> = tied[..tied.len() - 1]
                .iter()
                .map(|&i| spec.terms[i].name.as_str())
                .collect();
            format!(
                "tied with {} at p = {max_p}; dropped the later-declared term",
                others.join(", ")
            )
        });

        trace.push(EliminationStep {
            term: spec.terms[chosen].name.clone(),
            p_value: max_p,
            n_used: fitted.n_used,
            note,
        });
        spec.terms.remove(chosen);

        if spec.terms.is_empty() && !spec.intercept {
            return Err(Error::validation(
                "all candidate terms were eliminated and the specification has no intercept",
            ));
        }
    }
}
