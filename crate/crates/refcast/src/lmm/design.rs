//! Design-matrix construction: resolving named variables from project
//! records and country macro series, applying per-term transformations,
//! coding dummies and interactions, and listwise-deleting rows that cannot
//! supply every term — each with a recorded reason, never silently.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::refdata::{CountryMacroSeries, DamRecord, ReferenceClass, Region};

use super::{ModelSpec, Term, TermKind};

/// Variable names the resolver understands, with their source.
pub const VARIABLES: &[(&str, &str)] = &[
    ("cost_overrun", "record: actual_cost / estimated_cost"),
    ("schedule_slippage", "record: actual / estimated schedule months"),
    ("estimated_cost", "record field"),
    ("actual_cost", "record field"),
    ("estimated_schedule_months", "record field"),
    ("actual_schedule_months", "record field"),
    ("wall_height_m", "record field"),
    ("wall_length_m", "record field"),
    ("installed_capacity_mw", "record field"),
    ("unit_capacity_mw", "record field"),
    ("reservoir_area_ha", "record field"),
    ("tunnel_length_km", "record field"),
    ("year_decision", "record field"),
    ("year_completion", "record field"),
    ("is_hydropower", "record field (dummy)"),
    ("is_new_station", "record field (dummy)"),
    ("south_asia", "record region (dummy)"),
    ("democracy", "macro: polity2 at the decision year (dummy)"),
    (
        "per_capita_income_2000usd",
        "macro: series value at the decision year",
    ),
    (
        "long_term_inflation_pct",
        "macro: geometric trend of the country's full deflator series",
    ),
];

/// Resolves a raw (untransformed) variable value for one record, or
/// explains why it is unavailable.
fn variable_value(
    record: &DamRecord,
    macros: &BTreeMap<String, CountryMacroSeries>,
    name: &str,
) -> std::result::Result<f64, String> {
    let field = |v: Option<f64>, what: &str| v.ok_or_else(|| format!("{what} absent"));
    let ratio = |num: Option<f64>, den: Option<f64>, what: &str| match (num, den) {
        (Some(n), Some(d)) if n > 0.0 && d > 0.0 => Ok(n / d),
        _ => Err(format!("{what} requires both components present and positive")),
    };
    let series = || {
        macros
            .get(&record.country)
            .ok_or_else(|| format!("no macro series for country {}", record.country))
    };
    match name {
        "cost_overrun" => ratio(record.actual_cost, record.estimated_cost, "cost_overrun"),
        "schedule_slippage" => ratio(
            record.actual_schedule_months,
            record.estimated_schedule_months,
            "schedule_slippage",
        ),
        "estimated_cost" => field(record.estimated_cost, name),
        "actual_cost" => field(record.actual_cost, name),
        "estimated_schedule_months" => field(record.estimated_schedule_months, name),
        "actual_schedule_months" => field(record.actual_schedule_months, name),
        "wall_height_m" => Ok(record.wall_height_m),
        "wall_length_m" => field(record.wall_length_m, name),
        "installed_capacity_mw" => field(record.installed_capacity_mw, name),
        "unit_capacity_mw" => field(record.unit_capacity_mw, name),
        "reservoir_area_ha" => field(record.reservoir_area_ha, name),
        "tunnel_length_km" => field(record.tunnel_length_km, name),
        "year_decision" => Ok(f64::from(record.year_decision)),
        "year_completion" => Ok(f64::from(
            record
                .year_completion
                .ok_or_else(|| "year_completion absent".to_string())?,
        )),
        "is_hydropower" => Ok(if record.is_hydropower { 1.0 } else { 0.0 }),
        "is_new_station" => Ok(if record.is_new_station { 1.0 } else { 0.0 }),
        "south_asia" => Ok(if record.region == Region::SouthAsia {
            1.0
        } else {
            0.0
        }),
        "democracy" => {
            let s = series()?;
            s.democracy_at(record.year_decision)
                .map(|d| if d { 1.0 } else { 0.0 })
                .ok_or_else(|| {
                    format!(
                        "no polity2 score for {} in {}",
                        record.country, record.year_decision
                    )
                })
        }
        "per_capita_income_2000usd" => {
            let s = series()?;
            s.per_capita_income_const2000usd
                .get(&record.year_decision)
                .copied()
                .ok_or_else(|| {
                    format!(
                        "no per-capita income for {} in {}",
                        record.country, record.year_decision
                    )
                })
        }
        "long_term_inflation_pct" => {
            let s = series()?;
            s.long_term_inflation().map_err(|e| e.to_string())
        }
        other => Err(format!("unknown variable {other:?}")),
    }
}

/// One listwise-deleted row and why it was dropped.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowDrop {
    pub dam_id: String,
    pub reason: String,
}

/// Accounting for the listwise deletion pass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DropReport {
    pub n_input: usize,
    pub n_used: usize,
    pub n_dropped: usize,
    pub drops: Vec<RowDrop>,
}

/// A realized design: transformed response, design matrix, group labels,
/// and the deletion report.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub spec: ModelSpec,
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub columns: Vec<String>,
    pub groups: Vec<String>,
    pub report: DropReport,
}

impl Design {
    /// Builds a design directly from raw arrays (rows of `x` aligned with
    /// `y` and `groups`); used for synthetic and oracle inputs that do not
    /// come from a reference class.
    pub fn from_parts(
        spec: ModelSpec,
        y: Vec<f64>,
        x_rows: Vec<Vec<f64>>,
        groups: Vec<String>,
    ) -> Result<Design> {
        spec.validate()?;
        let columns = spec.column_names();
        let n = y.len();
        if x_rows.len() != n || groups.len() != n {
            return Err(Error::validation(
                "y, design rows, and group labels must have equal length",
            ));
        }
        if x_rows.iter().any(|r| r.len() != columns.len()) {
            return Err(Error::validation(format!(
                "every design row must have {} columns",
                columns.len()
            )));
        }
        let x = DMatrix::from_fn(n, columns.len(), |i, j| x_rows[i][j]);
        Ok(Design {
            spec,
            y: DVector::from_vec(y),
            x,
            columns,
            groups,
            report: DropReport {
                n_input: n,
                n_used: n,
                n_dropped: 0,
                drops: Vec::new(),
            },
        })
    }
}

/// Computes the column value of every term for one record, in two passes so
/// interactions can multiply the referenced terms' already-transformed
/// values.
fn term_values(
    record: &DamRecord,
    macros: &BTreeMap<String, CountryMacroSeries>,
    terms: &[Term],
) -> std::result::Result<Vec<f64>, String> {
    let mut computed: BTreeMap<&str, f64> = BTreeMap::new();
    for term in terms {
        match &term.kind {
            TermKind::Covariate {
                variable,
                transformation,
            } => {
                let raw =
                    variable_value(record, macros, variable).map_err(|e| format!("{}: {e}", term.name))?;
                let value = transformation.forward(raw).map_err(|e| {
                    format!("{}: {} of {raw} undefined ({e})", term.name, transformation.name())
                })?;
                computed.insert(term.name.as_str(), value);
            }
            TermKind::Dummy { variable } => {
                let raw =
                    variable_value(record, macros, variable).map_err(|e| format!("{}: {e}", term.name))?;
                if raw != 0.0 && raw != 1.0 {
                    return Err(format!(
                        "{}: variable {variable} is not 0/1 (found {raw})",
                        term.name
                    ));
                }
                computed.insert(term.name.as_str(), raw);
            }
            TermKind::Interaction { .. } => {}
        }
    }
    for term in terms {
        if let TermKind::Interaction { left, right } = &term.kind {
            let l = *computed
                .get(left.as_str())
                .ok_or_else(|| format!("{}: left factor {left} not computed", term.name))?;
            let r = *computed
                .get(right.as_str())
                .ok_or_else(|| format!("{}: right factor {right} not computed", term.name))?;
            computed.insert(term.name.as_str(), l * r);
        }
    }
    Ok(terms
        .iter()
        .map(|t| computed[t.name.as_str()])
        .collect())
}

/// Builds the response vector, design matrix, and group labels for a model
/// over a reference class, listwise-deleting (and reporting) every row that
/// cannot supply all terms or whose values fall outside a transformation's
/// domain.
pub fn build_design(
    rc: &ReferenceClass,
    macros: &BTreeMap<String, CountryMacroSeries>,
    spec: &ModelSpec,
) -> Result<Design> {
    spec.validate()?;
    let columns = spec.column_names();
    let mut y = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut groups = Vec::new();
    let mut drops = Vec::new();

    for record in rc.records() {
        let outcome = (|| -> std::result::Result<(f64, Vec<f64>), String> {
            let raw = variable_value(record, macros, &spec.response.variable)
                .map_err(|e| format!("response {}: {e}", spec.response.variable))?;
            let response = spec.response.transformation.forward(raw).map_err(|e| {
                format!(
                    "response {}: {} of {raw} undefined ({e})",
                    spec.response.variable,
                    spec.response.transformation.name()
                )
            })?;
            let terms = term_values(record, macros, &spec.terms)?;
            Ok((response, terms))
        })();
        match outcome {
            Ok((response, terms)) => {
                y.push(response);
                let mut row = Vec::with_capacity(columns.len());
                if spec.intercept {
                    row.push(1.0);
                }
                row.extend(terms);
                rows.push(row);
                groups.push(record.country.clone());
            }
            Err(reason) => drops.push(RowDrop {
                dam_id: record.id.clone(),
                reason,
            }),
        }
    }

    let n_input = rc.records().len();
    let n_used = y.len();
    if n_used == 0 {
        let first = drops
            .first()
            .map(|d| format!("; first drop: {} ({})", d.dam_id, d.reason))
            .unwrap_or_default();
        return Err(Error::validation(format!(
            "no usable rows: all {n_input} records were listwise-deleted{first}"
        )));
    }
    let x = DMatrix::from_fn(n_used, columns.len(), |i, j| rows[i][j]);
    Ok(Design {
        spec: spec.clone(),
        y: DVector::from_vec(y),
        x,
        columns,
        groups,
        report: DropReport {
            n_input,
            n_used,
            n_dropped: n_input - n_used,
            drops,
        },
    })
}
