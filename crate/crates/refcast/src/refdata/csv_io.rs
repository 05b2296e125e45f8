//! CSV ingestion and serialization for reference-class records and country
//! macro series.
//!
//! Ingestion is diagnostic-driven: structurally malformed CSV is a hard
//! error, while semantically invalid rows become [`Diagnostic`]s — either
//! warnings (row kept) or rejections (row dropped). `strict` mode turns any
//! diagnostic into a failure. Floats are written with Rust's shortest
//! round-trip formatting so a write → ingest cycle reproduces every value
//! bit-exactly.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{
    region_of, CountryMacroSeries, DamRecord, ProjectType, ReferenceClass, Region,
    LARGE_DAM_WALL_HEIGHT_M, SCHEDULE_CONSISTENCY_TOLERANCE_MONTHS,
};

/// Exact column order of `refclass.csv`.
pub const REFCLASS_HEADER: [&str; 26] = [
    "id",
    "name",
    "country",
    "region",
    "project_type",
    "is_hydropower",
    "is_new_station",
    "wall_height_m",
    "wall_length_m",
    "installed_capacity_mw",
    "unit_capacity_mw",
    "reservoir_area_ha",
    "tunnel_length_km",
    "estimated_cost",
    "actual_cost",
    "currency",
    "base_year",
    "year_decision",
    "year_completion",
    "estimated_schedule_months",
    "actual_schedule_months",
    "fx_cost_share_pct",
    "icb_share_pct",
    "local_contractor",
    "inflation_contingency_pct",
    "estimated_bcr",
];

/// Exact column order of `macro.csv` (long format, one row per country-year).
pub const MACRO_HEADER: [&str; 8] = [
    "country",
    "year",
    "deflator",
    "fx_rate",
    "per_capita_income_2000usd",
    "gdp_nominal_usd",
    "polity2",
    "muv_index",
];

/// How severely a diagnostic affects its row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    /// Row kept, but flagged.
    Warning,
    /// Row dropped from the ingested class.
    Rejection,
}

impl Severity {
    pub fn name(self) -> &'static str {
        match self {
            Severity::Warning => "warning",
            Severity::Rejection => "rejection",
        }
    }
}

/// One validation finding for one ingested row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    /// 1-based data row number (the header line is not counted).
    pub row: usize,
    /// Column the finding is about.
    pub field: String,
    pub severity: Severity,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "row {}: [{}] {}: {}",
            self.row,
            self.severity.name(),
            self.field,
            self.message
        )
    }
}

fn reject(row: usize, field: &str, message: impl Into<String>) -> Diagnostic {
    Diagnostic {
        row,
        field: field.to_string(),
        severity: Severity::Rejection,
        message: message.into(),
    }
}

fn warn(row: usize, field: &str, message: impl Into<String>) -> Diagnostic {
    Diagnostic {
        row,
        field: field.to_string(),
        severity: Severity::Warning,
        message: message.into(),
    }
}

fn req_str(cell: &str, row: usize, field: &str) -> std::result::Result<String, Diagnostic> {
    if cell.is_empty() {
        Err(reject(row, field, "required field is empty"))
    } else {
        Ok(cell.to_string())
    }
}

fn parse_opt_f64(
    cell: &str,
    row: usize,
    field: &str,
) -> std::result::Result<Option<f64>, Diagnostic> {
    if cell.is_empty() {
        return Ok(None);
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(reject(row, field, format!("not a finite number: {cell:?}"))),
    }
}

fn parse_req_f64(cell: &str, row: usize, field: &str) -> std::result::Result<f64, Diagnostic> {
    parse_opt_f64(cell, row, field)?
        .ok_or_else(|| reject(row, field, "required field is empty"))
}

fn parse_opt_i32(
    cell: &str,
    row: usize,
    field: &str,
) -> std::result::Result<Option<i32>, Diagnostic> {
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse::<i32>()
        .map(Some)
        .map_err(|_| reject(row, field, format!("not an integer: {cell:?}")))
}

fn parse_req_i32(cell: &str, row: usize, field: &str) -> std::result::Result<i32, Diagnostic> {
    parse_opt_i32(cell, row, field)?
        .ok_or_else(|| reject(row, field, "required field is empty"))
}

fn parse_opt_bool(
    cell: &str,
    row: usize,
    field: &str,
) -> std::result::Result<Option<bool>, Diagnostic> {
    match cell {
        "" => Ok(None),
        "true" => Ok(Some(true)),
        "false" => Ok(Some(false)),
        other => Err(reject(
            row,
            field,
            format!("expected \"true\" or \"false\", found {other:?}"),
        )),
    }
}

fn parse_req_bool(cell: &str, row: usize, field: &str) -> std::result::Result<bool, Diagnostic> {
    parse_opt_bool(cell, row, field)?
        .ok_or_else(|| reject(row, field, "required field is empty"))
}

/// Parses one data row. `Err` is a rejection diagnostic (row dropped);
/// `Ok` carries the record plus any warnings attached to it.
fn parse_row(
    row: usize,
    rec: &csv::StringRecord,
) -> std::result::Result<(DamRecord, Vec<Diagnostic>), Diagnostic> {
    let cell = |i: usize| rec.get(i).unwrap_or("");
    let mut warnings = Vec::new();

    let id = req_str(cell(0), row, "id")?;
    let name = req_str(cell(1), row, "name")?;

    let country = req_str(cell(2), row, "country")?;
    let mapped_region = region_of(&country)
        .ok_or_else(|| reject(row, "country", format!("unknown country code {country:?}")))?;
    let region_cell = req_str(cell(3), row, "region")?;
    let region = Region::parse(&region_cell)
        .ok_or_else(|| reject(row, "region", format!("unknown region {region_cell:?}")))?;
    if region != mapped_region {
        return Err(reject(
            row,
            "region",
            format!(
                "region {:?} inconsistent with country {country} (expected {:?})",
                region.name(),
                mapped_region.name()
            ),
        ));
    }

    let project_type_cell = req_str(cell(4), row, "project_type")?;
    let project_type = ProjectType::parse(&project_type_cell).ok_or_else(|| {
        reject(
            row,
            "project_type",
            format!("unknown project type {project_type_cell:?}"),
        )
    })?;

    let is_hydropower = parse_req_bool(cell(5), row, "is_hydropower")?;
    let is_new_station = parse_req_bool(cell(6), row, "is_new_station")?;

    let wall_height_m = parse_req_f64(cell(7), row, "wall_height_m")?;
    if wall_height_m <= 0.0 {
        return Err(reject(
            row,
            "wall_height_m",
            format!("must be positive, found {wall_height_m}"),
        ));
    }
    if wall_height_m < LARGE_DAM_WALL_HEIGHT_M {
        warnings.push(warn(
            row,
            "wall_height_m",
            format!("below large-dam threshold {LARGE_DAM_WALL_HEIGHT_M} m"),
        ));
    }

    // Optional physical features: positive (or nonnegative) when present.
    let positive_opt = |i: usize, field: &str| -> std::result::Result<Option<f64>, Diagnostic> {
        match parse_opt_f64(cell(i), row, field)? {
            Some(v) if v <= 0.0 => Err(reject(row, field, format!("must be positive, found {v}"))),
            other => Ok(other),
        }
    };
    let nonnegative_opt = |i: usize, field: &str| -> std::result::Result<Option<f64>, Diagnostic> {
        match parse_opt_f64(cell(i), row, field)? {
            Some(v) if v < 0.0 => Err(reject(
                row,
                field,
                format!("must be nonnegative, found {v}"),
            )),
            other => Ok(other),
        }
    };
    let pct_opt = |i: usize, field: &str| -> std::result::Result<Option<f64>, Diagnostic> {
        match parse_opt_f64(cell(i), row, field)? {
            Some(v) if !(0.0..=100.0).contains(&v) => Err(reject(
                row,
                field,
                format!("must lie in [0, 100], found {v}"),
            )),
            other => Ok(other),
        }
    };

    let wall_length_m = positive_opt(8, "wall_length_m")?;
    let installed_capacity_mw = nonnegative_opt(9, "installed_capacity_mw")?;
    let unit_capacity_mw = positive_opt(10, "unit_capacity_mw")?;
    let reservoir_area_ha = positive_opt(11, "reservoir_area_ha")?;
    let tunnel_length_km = nonnegative_opt(12, "tunnel_length_km")?;

    // Cost and schedule fields: absent → warning (row kept, no observation);
    // present but nonpositive → rejection.
    let cost_field = |i: usize, field: &str| -> std::result::Result<Option<f64>, Diagnostic> {
        match parse_opt_f64(cell(i), row, field)? {
            Some(v) if v <= 0.0 => Err(reject(row, field, format!("must be positive, found {v}"))),
            Some(v) => Ok(Some(v)),
            None => Ok(None),
        }
    };
    let estimated_cost = cost_field(13, "estimated_cost")?;
    let actual_cost = cost_field(14, "actual_cost")?;

    let currency = req_str(cell(15), row, "currency")?;
    let base_year = parse_req_i32(cell(16), row, "base_year")?;
    let year_decision = parse_req_i32(cell(17), row, "year_decision")?;
    let year_completion = parse_opt_i32(cell(18), row, "year_completion")?;
    if let Some(yc) = year_completion {
        if yc < year_decision {
            return Err(reject(
                row,
                "year_completion",
                format!("completion year {yc} precedes decision year {year_decision}"),
            ));
        }
    }

    let estimated_schedule_months = cost_field(19, "estimated_schedule_months")?;
    let actual_schedule_months = cost_field(20, "actual_schedule_months")?;
    if let (Some(yc), Some(actual)) = (year_completion, actual_schedule_months) {
        let implied = f64::from(yc - year_decision) * 12.0;
        if (actual - implied).abs() > SCHEDULE_CONSISTENCY_TOLERANCE_MONTHS {
            return Err(reject(
                row,
                "actual_schedule_months",
                format!(
                    "{actual} months inconsistent with year span {year_decision}–{yc} \
                     ({implied} months ± {SCHEDULE_CONSISTENCY_TOLERANCE_MONTHS})"
                ),
            ));
        }
    }

    for (value, field) in [
        (estimated_cost, "estimated_cost"),
        (actual_cost, "actual_cost"),
        (estimated_schedule_months, "estimated_schedule_months"),
        (actual_schedule_months, "actual_schedule_months"),
    ] {
        if value.is_none() {
            warnings.push(warn(
                row,
                field,
                format!("{field} absent; record excluded from observations"),
            ));
        }
    }

    let fx_cost_share_pct = pct_opt(21, "fx_cost_share_pct")?;
    let icb_share_pct = pct_opt(22, "icb_share_pct")?;
    let local_contractor = parse_opt_bool(cell(23), row, "local_contractor")?;
    let inflation_contingency_pct = nonnegative_opt(24, "inflation_contingency_pct")?;
    let estimated_bcr = positive_opt(25, "estimated_bcr")?;

    Ok((
        DamRecord {
            id,
            name,
            country,
            region,
            project_type,
            is_hydropower,
            is_new_station,
            wall_height_m,
            wall_length_m,
            installed_capacity_mw,
            unit_capacity_mw,
            reservoir_area_ha,
            tunnel_length_km,
            estimated_cost,
            actual_cost,
            currency,
            base_year,
            year_decision,
            year_completion,
            estimated_schedule_months,
            actual_schedule_months,
            fx_cost_share_pct,
            icb_share_pct,
            local_contractor,
            inflation_contingency_pct,
            estimated_bcr,
        },
        warnings,
    ))
}

/// Ingests `refclass.csv` data from `source`.
///
/// Returns the reference class built from all accepted rows together with
/// every diagnostic raised. Structural problems (unreadable CSV, wrong
/// header, ragged rows) are hard errors, as is an input whose accepted rows
/// form an empty reference class. With `strict = true`, any diagnostic at
/// all is promoted to an error.
pub fn ingest_reference_csv<R: io::Read>(
    source: R,
    strict: bool,
) -> Result<(ReferenceClass, Vec<Diagnostic>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| Error::input(format!("malformed CSV: {e}")))?;
    if headers != &csv::StringRecord::from(REFCLASS_HEADER.as_slice()) {
        return Err(Error::input(format!(
            "unexpected refclass.csv header: expected {:?}, found {:?}",
            REFCLASS_HEADER.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }

    let mut records = Vec::new();
    let mut diagnostics = Vec::new();
    let mut seen_ids: HashSet<String> = HashSet::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::input(format!("malformed CSV at data row {row}: {e}")))?;
        match parse_row(row, &rec) {
            Ok((record, warnings)) => {
                if !seen_ids.insert(record.id.clone()) {
                    diagnostics.push(reject(
                        row,
                        "id",
                        format!("duplicate id {:?}", record.id),
                    ));
                    continue;
                }
                diagnostics.extend(warnings);
                records.push(record);
            }
            Err(diag) => diagnostics.push(diag),
        }
    }

    if strict {
        if let Some(first) = diagnostics.first() {
            return Err(Error::validation(format!(
                "strict mode: {} diagnostic(s); first: {first}",
                diagnostics.len()
            )));
        }
    }
    let class = ReferenceClass::from_records(records, "all ingested records")?;
    Ok((class, diagnostics))
}

fn fmt_opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn fmt_opt_i32(v: Option<i32>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn fmt_opt_bool(v: Option<bool>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes records in `refclass.csv` format. Floats use shortest round-trip
/// formatting, so re-ingesting reproduces them bit-exactly.
pub fn write_reference_csv<W: io::Write>(records: &[DamRecord], out: W) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().from_writer(out);
    let io_err = |e: csv::Error| Error::input(format!("CSV write failed: {e}"));
    writer.write_record(REFCLASS_HEADER).map_err(io_err)?;
    for r in records {
        writer
            .write_record([
                r.id.as_str(),
                r.name.as_str(),
                r.country.as_str(),
                r.region.name(),
                r.project_type.name(),
                &r.is_hydropower.to_string(),
                &r.is_new_station.to_string(),
                &r.wall_height_m.to_string(),
                &fmt_opt_f64(r.wall_length_m),
                &fmt_opt_f64(r.installed_capacity_mw),
                &fmt_opt_f64(r.unit_capacity_mw),
                &fmt_opt_f64(r.reservoir_area_ha),
                &fmt_opt_f64(r.tunnel_length_km),
                &fmt_opt_f64(r.estimated_cost),
                &fmt_opt_f64(r.actual_cost),
                r.currency.as_str(),
                &r.base_year.to_string(),
                &r.year_decision.to_string(),
                &fmt_opt_i32(r.year_completion),
                &fmt_opt_f64(r.estimated_schedule_months),
                &fmt_opt_f64(r.actual_schedule_months),
                &fmt_opt_f64(r.fx_cost_share_pct),
                &fmt_opt_f64(r.icb_share_pct),
                &fmt_opt_bool(r.local_contractor),
                &fmt_opt_f64(r.inflation_contingency_pct),
                &fmt_opt_f64(r.estimated_bcr),
            ])
            .map_err(io_err)?;
    }
    writer
        .flush()
        .map_err(|e| Error::input(format!("CSV write failed: {e}")))?;
    Ok(())
}

/// Ingests `macro.csv` (long format). Unlike reference ingestion this is
/// all-or-nothing: any invalid cell is a hard error naming the row, because
/// macro series are curated inputs with no per-row salvage semantics.
/// Country codes are not checked against the region table here — linkage is
/// validated where a project record references the series.
pub fn ingest_macro_csv<R: io::Read>(source: R) -> Result<BTreeMap<String, CountryMacroSeries>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| Error::input(format!("malformed CSV: {e}")))?;
    if headers != &csv::StringRecord::from(MACRO_HEADER.as_slice()) {
        return Err(Error::input(format!(
            "unexpected macro.csv header: expected {:?}, found {:?}",
            MACRO_HEADER.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }

    let mut out: BTreeMap<String, CountryMacroSeries> = BTreeMap::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::input(format!("malformed CSV at data row {row}: {e}")))?;
        let cell = |i: usize| rec.get(i).unwrap_or("");
        let bad = |field: &str, msg: String| {
            Error::validation(format!("macro.csv row {row}, {field}: {msg}"))
        };

        let country = cell(0).to_string();
        if country.is_empty() {
            return Err(bad("country", "required field is empty".into()));
        }
        let year: i32 = cell(1)
            .parse()
            .map_err(|_| bad("year", format!("not an integer: {:?}", cell(1))))?;

        let positive = |i: usize, field: &str| -> Result<Option<f64>> {
            let c = cell(i);
            if c.is_empty() {
                return Ok(None);
            }
            match c.parse::<f64>() {
                Ok(v) if v.is_finite() && v > 0.0 => Ok(Some(v)),
                Ok(v) => Err(bad(field, format!("must be positive, found {v}"))),
                Err(_) => Err(bad(field, format!("not a number: {c:?}"))),
            }
        };
        let deflator = positive(2, "deflator")?;
        let fx_rate = positive(3, "fx_rate")?;
        let income = positive(4, "per_capita_income_2000usd")?;
        let gdp = positive(5, "gdp_nominal_usd")?;
        let polity2 = if cell(6).is_empty() {
            None
        } else {
            let p: i32 = cell(6)
                .parse()
                .map_err(|_| bad("polity2", format!("not an integer: {:?}", cell(6))))?;
            if !(-10..=10).contains(&p) {
                return Err(bad("polity2", format!("must lie in [-10, 10], found {p}")));
            }
            Some(p)
        };
        let muv = positive(7, "muv_index")?;

        let series = out.entry(country.clone()).or_insert_with(|| {
            let mut s = CountryMacroSeries::default();
            s.country = country.clone();
            s
        });
        let insert_f64 = |map: &mut BTreeMap<i32, f64>, v: Option<f64>, field: &str| {
            match v {
                Some(v) if map.insert(year, v).is_some() => Err(bad(
                    field,
                    format!("duplicate value for {country} year {year}"),
                )),
                _ => Ok(()),
            }
        };
        insert_f64(&mut series.deflator, deflator, "deflator")?;
        insert_f64(&mut series.fx_rate_lcu_per_usd, fx_rate, "fx_rate")?;
        insert_f64(
            &mut series.per_capita_income_const2000usd,
            income,
            "per_capita_income_2000usd",
        )?;
        insert_f64(&mut series.gdp_nominal_usd, gdp, "gdp_nominal_usd")?;
        if let Some(p) = polity2 {
            if series.polity2.insert(year, p).is_some() {
                return Err(bad(
                    "polity2",
                    format!("duplicate value for {country} year {year}"),
                ));
            }
        }
        insert_f64(&mut series.muv_index, muv, "muv_index")?;
    }
    Ok(out)
}

/// Writes macro series in `macro.csv` long format, one row per country-year,
/// countries and years in ascending order.
pub fn write_macro_csv<W: io::Write>(
    series: &BTreeMap<String, CountryMacroSeries>,
    out: W,
) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().from_writer(out);
    let io_err = |e: csv::Error| Error::input(format!("CSV write failed: {e}"));
    writer.write_record(MACRO_HEADER).map_err(io_err)?;
    for (country, s) in series {
        let mut years: BTreeSet<i32> = BTreeSet::new();
        years.extend(s.deflator.keys());
        years.extend(s.fx_rate_lcu_per_usd.keys());
        years.extend(s.per_capita_income_const2000usd.keys());
        years.extend(s.gdp_nominal_usd.keys());
        years.extend(s.polity2.keys());
        years.extend(s.muv_index.keys());
        for year in years {
            writer
                .write_record([
                    country.as_str(),
                    &year.to_string(),
                    &fmt_opt_f64(s.deflator.get(&year).copied()),
                    &fmt_opt_f64(s.fx_rate_lcu_per_usd.get(&year).copied()),
                    &fmt_opt_f64(s.per_capita_income_const2000usd.get(&year).copied()),
                    &fmt_opt_f64(s.gdp_nominal_usd.get(&year).copied()),
                    &fmt_opt_i32(s.polity2.get(&year).copied()),
                    &fmt_opt_f64(s.muv_index.get(&year).copied()),
                ])
                .map_err(io_err)?;
        }
    }
    writer
        .flush()
        .map_err(|e| Error::input(format!("CSV write failed: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::tests::sample_record;
    use super::*;

    fn col(name: &str) -> usize {
        REFCLASS_HEADER.iter().position(|h| *h == name).unwrap()
    }

    /// Default valid row matching `sample_record`, as mutable cells.
    fn cells(id: &str) -> Vec<String> {
        let r = sample_record(id);
        vec![
            r.id,
            r.name,
            r.country,
            r.region.name().to_string(),
            r.project_type.name().to_string(),
            r.is_hydropower.to_string(),
            r.is_new_station.to_string(),
            r.wall_height_m.to_string(),
            fmt_opt_f64(r.wall_length_m),
            fmt_opt_f64(r.installed_capacity_mw),
            fmt_opt_f64(r.unit_capacity_mw),
            fmt_opt_f64(r.reservoir_area_ha),
            fmt_opt_f64(r.tunnel_length_km),
            fmt_opt_f64(r.estimated_cost),
            fmt_opt_f64(r.actual_cost),
            r.currency,
            r.base_year.to_string(),
            r.year_decision.to_string(),
            fmt_opt_i32(r.year_completion),
            fmt_opt_f64(r.estimated_schedule_months),
            fmt_opt_f64(r.actual_schedule_months),
            fmt_opt_f64(r.fx_cost_share_pct),
            fmt_opt_f64(r.icb_share_pct),
            fmt_opt_bool(r.local_contractor),
            fmt_opt_f64(r.inflation_contingency_pct),
            fmt_opt_f64(r.estimated_bcr),
        ]
    }

    fn csv_of(rows: &[Vec<String>]) -> String {
        let mut s = REFCLASS_HEADER.join(",");
        s.push('\n');
        for row in rows {
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }

    #[test]
    fn ingest_valid_rows_and_derive() {
        let text = csv_of(&[cells("chivor"), cells("b")]);
        let (class, diags) = ingest_reference_csv(text.as_bytes(), true).unwrap();
        assert!(diags.is_empty());
        assert_eq!(class.records().len(), 2);
        assert_eq!(class.observations().len(), 2);
        // 168.7 / 127.8 ≈ 1.32: a 32% overrun.
        assert!((class.observations()[0].cost_overrun - 1.32).abs() < 0.005);
    }

    #[test]
    fn low_wall_is_warned_not_dropped() {
        let mut row = cells("low");
        row[col("wall_height_m")] = "12".to_string();
        let (class, diags) = ingest_reference_csv(csv_of(&[row]).as_bytes(), false).unwrap();
        assert_eq!(class.records().len(), 1);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].severity, Severity::Warning);
        assert!(diags[0].message.contains("below large-dam threshold 15 m"));
    }

    #[test]
    fn missing_actual_cost_warns_and_excludes_observation() {
        let mut row = cells("partial");
        row[col("actual_cost")] = String::new();
        let text = csv_of(&[cells("full"), row]);
        let (class, diags) = ingest_reference_csv(text.as_bytes(), false).unwrap();
        assert_eq!(class.records().len(), 2);
        assert_eq!(class.observations().len(), 1);
        assert_eq!(class.observations()[0].dam_id, "full");
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].severity, Severity::Warning);
        assert!(diags[0].message.contains("actual_cost absent"));
    }

    #[test]
    fn bad_rows_are_rejected_with_named_reasons() {
        let mut unknown_country = cells("r1");
        unknown_country[col("country")] = "XXX".to_string();
        let mut mismatched_region = cells("r2");
        mismatched_region[col("region")] = "Africa".to_string();
        let mut negative_cost = cells("r3");
        negative_cost[col("actual_cost")] = "-5".to_string();
        let mut inconsistent_schedule = cells("r4");
        inconsistent_schedule[col("actual_schedule_months")] = "600".to_string();
        let text = csv_of(&[
            cells("good"),
            unknown_country,
            mismatched_region,
            negative_cost,
            inconsistent_schedule,
        ]);
        let (class, diags) = ingest_reference_csv(text.as_bytes(), false).unwrap();
        assert_eq!(class.records().len(), 1);
        assert_eq!(diags.len(), 4);
        assert!(diags.iter().all(|d| d.severity == Severity::Rejection));
        assert!(diags[0].message.contains("unknown country code"));
        assert!(diags[1].message.contains("inconsistent with country"));
        assert!(diags[2].message.contains("must be positive"));
        assert!(diags[3].message.contains("inconsistent with year span"));
        assert_eq!(diags[3].row, 5);
    }

    #[test]
    fn duplicate_id_rejected() {
        let text = csv_of(&[cells("dup"), cells("dup")]);
        let (class, diags) = ingest_reference_csv(text.as_bytes(), false).unwrap();
        assert_eq!(class.records().len(), 1);
        assert_eq!(diags.len(), 1);
        assert!(diags[0].message.contains("duplicate id"));
    }

    #[test]
    fn strict_mode_promotes_any_diagnostic() {
        let mut row = cells("low");
        row[col("wall_height_m")] = "12".to_string();
        let text = csv_of(&[cells("ok"), row]);
        assert!(ingest_reference_csv(text.as_bytes(), false).is_ok());
        let err = ingest_reference_csv(text.as_bytes(), true).unwrap_err();
        assert!(err.to_string().contains("strict mode"));
    }

    #[test]
    fn structural_problems_are_hard_errors() {
        let bad_header = "id,name\nx,y\n";
        assert!(ingest_reference_csv(bad_header.as_bytes(), false).is_err());

        let mut ragged = csv_of(&[cells("a")]);
        ragged.push_str("only,three,cells\n");
        assert!(ingest_reference_csv(ragged.as_bytes(), false).is_err());

        let empty = csv_of(&[]);
        let err = ingest_reference_csv(empty.as_bytes(), false).unwrap_err();
        assert!(err.to_string().contains("empty reference class"));
    }

    #[test]
    fn reference_round_trip_is_bit_exact() {
        let mut a = sample_record("a");
        a.estimated_cost = Some(127.8);
        a.actual_cost = Some(168.7);
        a.wall_height_m = 123.456789012345;
        let mut b = sample_record("b");
        b.reservoir_area_ha = Some(0.1 + 0.2); // deliberately non-representable
        b.tunnel_length_km = Some(12.0);
        b.local_contractor = None;
        b.estimated_bcr = None;
        let records = vec![a, b];

        let mut buf = Vec::new();
        write_reference_csv(&records, &mut buf).unwrap();
        let (class, diags) = ingest_reference_csv(buf.as_slice(), true).unwrap();
        assert!(diags.is_empty());
        assert_eq!(class.records(), records.as_slice());

        let direct = ReferenceClass::from_records(records, "direct").unwrap();
        assert_eq!(class.observations(), direct.observations());
    }

    #[test]
    fn macro_round_trip_and_validation() {
        let mut s = CountryMacroSeries {
            country: "PAK".into(),
            ..Default::default()
        };
        s.deflator.insert(2000, 1.0);
        s.deflator.insert(2001, 1.0825);
        s.fx_rate_lcu_per_usd.insert(2000, 53.65);
        s.per_capita_income_const2000usd.insert(2000, 497.0);
        s.polity2.insert(2000, -6);
        let mut map = BTreeMap::new();
        map.insert("PAK".to_string(), s);

        let mut buf = Vec::new();
        write_macro_csv(&map, &mut buf).unwrap();
        let back = ingest_macro_csv(buf.as_slice()).unwrap();
        assert_eq!(back, map);

        let text = "country,year,deflator,fx_rate,per_capita_income_2000usd,gdp_nominal_usd,polity2,muv_index\nPAK,2000,1.0,,,,11,\n";
        let err = ingest_macro_csv(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("polity2"));

        let text = "country,year,deflator,fx_rate,per_capita_income_2000usd,gdp_nominal_usd,polity2,muv_index\nPAK,2000,-1.0,,,,,\n";
        assert!(ingest_macro_csv(text.as_bytes()).is_err());

        let dup = "country,year,deflator,fx_rate,per_capita_income_2000usd,gdp_nominal_usd,polity2,muv_index\nPAK,2000,1.0,,,,,\nPAK,2000,1.1,,,,,\n";
        let err = ingest_macro_csv(dup.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }
}
