//! Command-line surface for the refcast toolkit.
//!
//! Every subcommand reads plain files (CSV data, JSON specs), writes its
//! primary payload to stdout (or `--out`), and keeps diagnostics on stderr.
//! Exit codes: 0 success, 2 unreadable or malformed input, 3 validation or
//! model error.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use refcast::fixtures;
use refcast::lmm::{
    build_design, fit, predict, stepwise, FittedModel, Method, ModelSpec, StepwiseOutcome,
};
use refcast::papermodels::{
    forecast_report, predict_published, ModelId, ProjectDescriptor, ReferenceDistributions,
};
use refcast::rcf::{compare_asset_classes, debias, UpliftCurve};
use refcast::refdata::{
    derive_observation, ingest_macro_csv, ingest_reference_csv, write_macro_csv,
    write_reference_csv, CountryMacroSeries, ReferenceClass, Region,
};
use refcast::stats::EmpiricalDistribution;
use refcast::synth::{gen_reference_class, SynthSpec};
use refcast::{Error, Result};

#[derive(Parser)]
#[command(
    name = "refcast",
    version,
    about = "Reference-class forecasting and risk toolkit for large infrastructure projects"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output format for the primary payload.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    /// Write the primary payload to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed override for synthetic generation.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Promote ingestion warnings to errors.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Side {
    Cost,
    Schedule,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FitMethod {
    Reml,
    Ml,
}

impl From<FitMethod> for Method {
    fn from(m: FitMethod) -> Method {
        match m {
            FitMethod::Reml => Method::Reml,
            FitMethod::Ml => Method::Ml,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Preset {
    FatTail,
    Recovery,
}

#[derive(Subcommand)]
enum Command {
    /// Validate and summarize a reference-class CSV (and optional macro CSV).
    Ingest {
        /// Path to the project-record CSV.
        #[arg(long)]
        refclass: PathBuf,
        /// Path to the country-year macro CSV.
        #[arg(long = "macro")]
        macro_path: Option<PathBuf>,
    },
    /// Describe the outcome distributions of a reference class.
    Describe {
        /// Path to the project-record CSV.
        #[arg(long)]
        refclass: Option<PathBuf>,
        /// Use the bundled summary distributions instead of a file.
        #[arg(long)]
        builtin: bool,
    },
    /// Export uplift curves or evaluate uplifts at chosen risk levels.
    Rcf {
        /// Path to the project-record CSV.
        #[arg(long)]
        refclass: Option<PathBuf>,
        /// Use the bundled summary distributions instead of a file.
        #[arg(long)]
        builtin: bool,
        /// Which outcome ratio to use.
        #[arg(long, value_enum, default_value_t = Side::Cost)]
        which: Side,
        /// Acceptable risk level(s); repeat or comma-separate. When absent,
        /// the full curve is exported.
        #[arg(long, value_delimiter = ',')]
        risk: Vec<f64>,
        /// Inside-view estimate to de-bias at each risk level.
        #[arg(long)]
        estimate: Option<f64>,
        /// Number of grid points when exporting the full curve.
        #[arg(long, default_value_t = 99)]
        steps: usize,
    },
    /// Fit a mixed model (optionally with backward elimination).
    Fit {
        /// Path to the project-record CSV.
        #[arg(long)]
        refclass: PathBuf,
        /// Path to the country-year macro CSV.
        #[arg(long = "macro")]
        macro_path: PathBuf,
        /// Path to the model-specification JSON.
        #[arg(long)]
        model: PathBuf,
        /// Estimation method.
        #[arg(long, value_enum, default_value_t = FitMethod::Reml)]
        method: FitMethod,
        /// Run backward elimination over the model's terms.
        #[arg(long)]
        stepwise: bool,
        /// Retention threshold for backward elimination.
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Predict from a previously fitted model.
    Predict {
        /// Path to a fitted-model JSON (as written by `fit --out`).
        #[arg(long)]
        model: PathBuf,
        /// Path to a JSON object mapping variable names to values.
        #[arg(long)]
        values: PathBuf,
        /// Country code whose random intercept should be applied.
        #[arg(long)]
        group: Option<String>,
    },
    /// Full outside-view forecast for one project descriptor.
    Forecast {
        /// Path to a project-descriptor JSON.
        #[arg(long)]
        descriptor: Option<PathBuf>,
        /// Path to a project-record CSV providing the reference
        /// distributions.
        #[arg(long)]
        refclass: Option<PathBuf>,
        /// Use the bundled summary distributions (and, when no descriptor is
        /// given, the bundled example descriptor).
        #[arg(long)]
        builtin: bool,
        /// Acceptable risk level(s); repeat or comma-separate.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.2])]
        risk: Vec<f64>,
        /// Restrict published-model predictions to these models; any that
        /// cannot be computed becomes a hard error instead of a caveat.
        #[arg(long, value_delimiter = ',')]
        models: Vec<String>,
    },
    /// Generate a synthetic reference class with a known truth record.
    Synth {
        /// Path to a generator-specification JSON.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Built-in generator preset.
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        /// Countries for the fat-tail preset.
        #[arg(long, default_value_t = 20)]
        countries: usize,
        /// Projects per country for the fat-tail preset.
        #[arg(long, default_value_t = 5)]
        projects: usize,
        /// Directory to write refclass.csv, macro.csv, and truth.json into.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Compare this reference class against published asset-class benchmarks.
    Compare {
        /// Path to a project-record CSV.
        #[arg(long)]
        refclass: Option<PathBuf>,
        /// Use the bundled summary distributions instead of a file.
        #[arg(long)]
        builtin: bool,
        /// Row label for this reference class.
        #[arg(long, default_value = "Large dams (this distribution)")]
        category: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            match e {
                Error::Input(_) => ExitCode::from(2),
                Error::Validation(_) | Error::Numeric(_) => ExitCode::from(3),
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let format = cli.format;
    let out = cli.out.as_deref();
    match cli.command {
        Command::Ingest {
            refclass,
            macro_path,
        } => cmd_ingest(&refclass, macro_path.as_deref(), cli.strict, format, out),
        Command::Describe { refclass, builtin } => {
            cmd_describe(refclass.as_deref(), builtin, cli.strict, format, out)
        }
        Command::Rcf {
            refclass,
            builtin,
            which,
            risk,
            estimate,
            steps,
        } => cmd_rcf(
            refclass.as_deref(),
            builtin,
            which,
            &risk,
            estimate,
            steps,
            cli.strict,
            format,
            out,
        ),
        Command::Fit {
            refclass,
            macro_path,
            model,
            method,
            stepwise,
            alpha,
        } => cmd_fit(
            &refclass,
            &macro_path,
            &model,
            method.into(),
            stepwise,
            alpha,
            cli.strict,
            format,
            out,
        ),
        Command::Predict {
            model,
            values,
            group,
        } => cmd_predict(&model, &values, group.as_deref(), format, out),
        Command::Forecast {
            descriptor,
            refclass,
            builtin,
            risk,
            models,
        } => cmd_forecast(
            descriptor.as_deref(),
            refclass.as_deref(),
            builtin,
            &risk,
            &models,
            cli.strict,
            format,
            out,
        ),
        Command::Synth {
            spec,
            preset,
            countries,
            projects,
            out_dir,
        } => cmd_synth(
            spec.as_deref(),
            preset,
            countries,
            projects,
            cli.seed,
            out_dir.as_deref(),
            format,
            out,
        ),
        Command::Compare {
            refclass,
            builtin,
            category,
        } => cmd_compare(refclass.as_deref(), builtin, &category, cli.strict, format, out),
    }
}

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::input(format!("cannot read {}: {e}", path.display())))
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = read_file(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::input(format!("malformed {what} in {}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| Error::numeric(format!("JSON serialization failed: {e}")))
}

/// Writes the primary payload to `--out` or stdout.
fn emit(payload: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, payload)
                .map_err(|e| Error::input(format!("cannot write {}: {e}", path.display())))?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
        None => {
            print!("{payload}");
            Ok(())
        }
    }
}

/// Loads a reference class from CSV, printing row diagnostics to stderr.
/// An input whose accepted rows form an empty class is an input problem,
/// so it maps to the input exit code.
fn load_refclass(path: &Path, strict: bool) -> Result<ReferenceClass> {
    let text = read_file(path)?;
    let (class, diagnostics) =
        ingest_reference_csv(text.as_bytes(), strict).map_err(|e| match e {
            Error::Validation(msg) if msg.contains("empty reference class") => {
                Error::input("empty reference class".to_string())
            }
            other => other,
        })?;
    for d in &diagnostics {
        eprintln!("{d}");
    }
    Ok(class)
}

fn load_macros(path: &Path) -> Result<BTreeMap<String, CountryMacroSeries>> {
    let text = read_file(path)?;
    ingest_macro_csv(text.as_bytes())
}

/// Builds the requested outcome distribution from a file or the bundled
/// summary, returning it with a label describing the source.
fn load_distribution(
    refclass: Option<&Path>,
    builtin: bool,
    which: Side,
    strict: bool,
) -> Result<(EmpiricalDistribution, String)> {
    match (refclass, builtin) {
        (Some(path), false) => {
            let class = load_refclass(path, strict)?;
            let values = match which {
                Side::Cost => class.cost_overruns(),
                Side::Schedule => class.schedule_slippages(),
            };
            let dist = EmpiricalDistribution::new(values)?;
            Ok((dist, path.display().to_string()))
        }
        (None, true) => {
            let summary = fixtures::paper_summary()?;
            let dist = match which {
                Side::Cost => summary.cost_distribution()?,
                Side::Schedule => summary.schedule_distribution()?,
            };
            Ok((dist, summary.label.clone()))
        }
        _ => Err(Error::input(
            "exactly one of --refclass PATH or --builtin is required",
        )),
    }
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct IngestSummary {
    records: usize,
    observations: usize,
    small_sample: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    macro_countries: Option<usize>,
}

fn cmd_ingest(
    refclass: &Path,
    macro_path: Option<&Path>,
    strict: bool,
    format: Format,
    out: Option<&Path>,
) -> Result<()> {
    let class = load_refclass(refclass, strict)?;
    let macro_countries = match macro_path {
        Some(p) => Some(load_macros(p)?.len()),
        None => None,
    };
    let summary = IngestSummary {
        records: class.records().len(),
        observations: class.observations().len(),
        small_sample: class.is_small_sample(),
        macro_countries,
    };
    let payload = match format {
        Format::Json => to_json(&summary)?,
        Format::Text | Format::Csv => {
            let mut s = format!(
                "records: {}\nobservations: {}\nsmall sample: {}\n",
                summary.records, summary.observations, summary.small_sample
            );
            if let Some(k) = summary.macro_countries {
                s.push_str(&format!("countries with macro data: {k}\n"));
            }
            s
        }
    };
    emit(&payload, out)
}

// ---------------------------------------------------------------------------
// describe
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct OutcomeDescription {
    n: usize,
    mean: f64,
    median: f64,
    iqr: f64,
    fraction_over: f64,
}

impl OutcomeDescription {
    fn from_distribution(dist: &EmpiricalDistribution) -> OutcomeDescription {
        let s = dist.summarize();
        OutcomeDescription {
            n: s.n,
            mean: s.mean,
            median: s.median,
            iqr: s.iqr,
            fraction_over: dist.fraction_above(1.0),
        }
    }
}

#[derive(Serialize)]
struct RegionBreakdown {
    region: String,
    projects: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_cost_overrun: Option<f64>,
}

#[derive(Serialize)]
struct DescribeReport {
    source: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    projects: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cost: Option<OutcomeDescription>,
    #[serde(skip_serializing_if = "Option::is_none")]
    schedule: Option<OutcomeDescription>,
    regions: Vec<RegionBreakdown>,
}

impl DescribeReport {
    fn to_text(&self) -> String {
        let mut s = format!("source: {}\n", self.source);
        if let Some(n) = self.projects {
            s.push_str(&format!("projects: {n}\n"));
        }
        let block = |s: &mut String, title: &str, over: &str, d: &OutcomeDescription| {
            s.push_str(&format!("{title} (actual / estimated)\n"));
            s.push_str(&format!("  n: {}\n", d.n));
            s.push_str(&format!("  mean: {}\n", fmt(d.mean)));
            s.push_str(&format!("  median: {}\n", fmt(d.median)));
            s.push_str(&format!("  IQR: {}\n", fmt(d.iqr)));
            s.push_str(&format!("  {over}: {}\n", fmt(d.fraction_over)));
        };
        match &self.cost {
            Some(d) => block(&mut s, "cost overrun", "fraction over budget", d),
            None => s.push_str("cost overrun: no derivable observations\n"),
        }
        match &self.schedule {
            Some(d) => block(&mut s, "schedule slippage", "fraction over schedule", d),
            None => s.push_str("schedule slippage: no derivable observations\n"),
        }
        if self.regions.is_empty() {
            s.push_str("by region: unavailable (no project records)\n");
        } else {
            s.push_str("by region\n");
            for r in &self.regions {
                match r.mean_cost_overrun {
                    Some(m) => s.push_str(&format!(
                        "  {}: projects {}, mean cost overrun {}\n",
                        r.region,
                        r.projects,
                        fmt(m)
                    )),
                    None => s.push_str(&format!(
                        "  {}: projects {}, no derivable cost overruns\n",
                        r.region, r.projects
                    )),
                }
            }
        }
        s
    }

    fn to_csv(&self) -> String {
        let mut s = String::from("metric,value\n");
        if let Some(n) = self.projects {
            s.push_str(&format!("projects,{n}\n"));
        }
        if let Some(d) = &self.cost {
            s.push_str(&format!("cost_n,{}\n", d.n));
            s.push_str(&format!("cost_mean,{}\n", fmt(d.mean)));
            s.push_str(&format!("cost_median,{}\n", fmt(d.median)));
            s.push_str(&format!("cost_iqr,{}\n", fmt(d.iqr)));
            s.push_str(&format!("fraction_over_budget,{}\n", fmt(d.fraction_over)));
        }
        if let Some(d) = &self.schedule {
            s.push_str(&format!("schedule_n,{}\n", d.n));
            s.push_str(&format!("schedule_mean,{}\n", fmt(d.mean)));
            s.push_str(&format!("schedule_median,{}\n", fmt(d.median)));
            s.push_str(&format!("schedule_iqr,{}\n", fmt(d.iqr)));
            s.push_str(&format!(
                "fraction_over_schedule,{}\n",
                fmt(d.fraction_over)
            ));
        }
        for r in &self.regions {
            s.push_str(&format!(
                "region_{},{}\n",
                r.region.replace([' ', '&'], "_"),
                r.projects
            ));
        }
        s
    }
}

fn cmd_describe(
    refclass: Option<&Path>,
    builtin: bool,
    strict: bool,
    format: Format,
    out: Option<&Path>,
) -> Result<()> {
    let report = match (refclass, builtin) {
        (Some(path), false) => {
            let class = load_refclass(path, strict)?;
            describe_records(&class, &path.display().to_string())?
        }
        (None, true) => {
            let summary = fixtures::paper_summary()?;
            let cost = summary.cost_distribution()?;
            let schedule = summary.schedule_distribution()?;
            DescribeReport {
                source: summary.label.clone(),
                projects: None,
                cost: Some(OutcomeDescription::from_distribution(&cost)),
                schedule: Some(OutcomeDescription::from_distribution(&schedule)),
                regions: Vec::new(),
            }
        }
        _ => {
            return Err(Error::input(
                "exactly one of --refclass PATH or --builtin is required",
            ))
        }
    };
    let payload = match format {
        Format::Text => report.to_text(),
        Format::Json => to_json(&report)?,
        Format::Csv => report.to_csv(),
    };
    emit(&payload, out)
}

fn describe_records(class: &ReferenceClass, source: &str) -> Result<DescribeReport> {
    let cost_values = class.cost_overruns();
    let schedule_values = class.schedule_slippages();
    let cost = EmpiricalDistribution::new(cost_values)
        .ok()
        .map(|d| OutcomeDescription::from_distribution(&d));
    let schedule = EmpiricalDistribution::new(schedule_values)
        .ok()
        .map(|d| OutcomeDescription::from_distribution(&d));

    let mut regions: BTreeMap<&str, (usize, Vec<f64>)> = BTreeMap::new();
    for record in class.records() {
        let entry = regions.entry(record.region.name()).or_default();
        entry.0 += 1;
        if let Ok(obs) = derive_observation(record) {
            entry.1.push(obs.cost_overrun);
        }
    }
    let regions = Region::ALL
        .iter()
        .filter_map(|r| {
            regions.get(r.name()).map(|(count, overruns)| RegionBreakdown {
                region: r.name().to_string(),
                projects: *count,
                mean_cost_overrun: if overruns.is_empty() {
                    None
                } else {
                    Some(overruns.iter().sum::<f64>() / overruns.len() as f64)
                },
            })
        })
        .collect();

    Ok(DescribeReport {
        source: source.to_string(),
        projects: Some(class.records().len()),
        cost,
        schedule,
        regions,
    })
}

// ---------------------------------------------------------------------------
// rcf
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct UpliftRow {
    acceptable_risk: f64,
    uplift_pct: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    debiased_estimate: Option<f64>,
}

#[allow(clippy::too_many_arguments)]
fn cmd_rcf(
    refclass: Option<&Path>,
    builtin: bool,
    which: Side,
    risks: &[f64],
    estimate: Option<f64>,
    steps: usize,
    strict: bool,
    format: Format,
    out: Option<&Path>,
) -> Result<()> {
    let (dist, source) = load_distribution(refclass, builtin, which, strict)?;
    let curve = UpliftCurve::new(dist);
    if curve.is_small_sample() {
        eprintln!(
            "warning: fewer than 20 observations in {source}; quantile uplifts are coarse"
        );
    }

    let rows: Vec<UpliftRow> = if risks.is_empty() {
        curve
            .trace(steps)?
            .into_iter()
            .map(|(risk, uplift_pct)| {
                let debiased = estimate
                    .map(|e| debias(e, uplift_pct / 100.0))
                    .transpose()?;
                Ok(UpliftRow {
                    acceptable_risk: risk,
                    uplift_pct,
                    debiased_estimate: debiased,
                })
            })
            .collect::<Result<_>>()?
    } else {
        risks
            .iter()
            .map(|&risk| {
                let uplift = curve.evaluate(risk)?;
                let debiased = estimate.map(|e| debias(e, uplift)).transpose()?;
                Ok(UpliftRow {
                    acceptable_risk: risk,
                    uplift_pct: uplift * 100.0,
                    debiased_estimate: debiased,
                })
            })
            .collect::<Result<_>>()?
    };

    let payload = match format {
        Format::Json => to_json(&rows)?,
        Format::Csv => {
            let mut s = if estimate.is_some() {
                String::from("acceptable_risk,uplift_pct,debiased_estimate\n")
            } else {
                String::from("acceptable_risk,uplift_pct\n")
            };
            for r in &rows {
                match r.debiased_estimate {
                    Some(d) => s.push_str(&format!(
                        "{},{},{}\n",
                        fmt(r.acceptable_risk),
                        fmt(r.uplift_pct),
                        fmt(d)
                    )),
                    None => {
                        s.push_str(&format!("{},{}\n", fmt(r.acceptable_risk), fmt(r.uplift_pct)))
                    }
                }
            }
            s
        }
        Format::Text => {
            let mut s = format!("uplift curve from {source}\n");
            for r in &rows {
                s.push_str(&format!(
                    "  risk {}: uplift {}%",
                    fmt(r.acceptable_risk),
                    fmt(r.uplift_pct)
                ));
                if let Some(d) = r.debiased_estimate {
                    s.push_str(&format!(", debiased estimate {}", fmt(d)));
                }
                s.push('\n');
            }
            s
        }
    };
    emit(&payload, out)
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
fn cmd_fit(
    refclass: &Path,
    macro_path: &Path,
    model: &Path,
    method: Method,
    run_stepwise: bool,
    alpha: f64,
    strict: bool,
    format: Format,
    out: Option<&Path>,
) -> Result<()> {
    let class = load_refclass(refclass, strict)?;
    let macros = load_macros(macro_path)?;
    let spec: ModelSpec = parse_json(model, "model specification")?;

    let (fitted, outcome): (FittedModel, Option<StepwiseOutcome>) = if run_stepwise {
        let outcome = stepwise(&class, &macros, &spec, alpha, method)?;
        (outcome.fit.clone(), Some(outcome))
    } else {
        let design = build_design(&class, &macros, &spec)?;
        if design.report.n_dropped > 0 {
            eprintln!(
                "dropped {} of {} rows (listwise deletion):",
                design.report.n_dropped, design.report.n_input
            );
            for drop in &design.report.drops {
                eprintln!("  {}: {}", drop.dam_id, drop.reason);
            }
        }
        (fit(&design, method)?, None)
    };

    for w in &fitted.warnings {
        eprintln!("warning: {w}");
    }

    let payload = match format {
        Format::Json => match &outcome {
            Some(o) => to_json(o)?,
            None => to_json(&fitted)?,
        },
        Format::Csv => {
            let mut s = String::from("term,estimate,std_error,t,p\n");
            for (i, name) in fitted.columns.iter().enumerate() {
                s.push_str(&format!(
                    "{},{},{},{},{}\n",
                    name,
                    fmt(fitted.beta[i]),
                    fmt(fitted.se[i]),
                    fmt(fitted.t_stats[i]),
                    fmt(fitted.p_values[i])
                ));
            }
            s
        }
        Format::Text => {
            let mut s = String::new();
            if let Some(o) = &outcome {
                s.push_str(&format!("backward elimination (alpha = {})\n", o.alpha));
                if o.trace.is_empty() {
                    s.push_str("  no terms eliminated\n");
                }
                for step in &o.trace {
                    s.push_str(&format!(
                        "  dropped {} (p = {}, n = {})\n",
                        step.term,
                        fmt(step.p_value),
                        step.n_used
                    ));
                    if let Some(note) = &step.note {
                        s.push_str(&format!("    note: {note}\n"));
                    }
                }
                for w in &o.warnings {
                    s.push_str(&format!("  warning: {w}\n"));
                }
                s.push('\n');
            }
            s.push_str(&fitted.coefficient_table());
            s
        }
    };

    if let Some(path) = out {
        if format == Format::Text || format == Format::Csv {
            // text/CSV to stdout stays visible; --out always captures the
            // serialized model for later `predict` calls
            let json = fitted.to_json()?;
            fs::write(path, json)
                .map_err(|e| Error::input(format!("cannot write {}: {e}", path.display())))?;
            eprintln!("wrote fitted model to {}", path.display());
            print!("{payload}");
            return Ok(());
        }
    }
    emit(&payload, out)
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

/// Accepts either a serialized fitted model or a stepwise-outcome document
/// (whose `fit` field holds one), so every artifact `fit --out` can write
/// rounds back into `predict`.
fn load_fitted_model(text: &str) -> Result<FittedModel> {
    match FittedModel::from_json(text) {
        Ok(fitted) => Ok(fitted),
        Err(first) => {
            let doc: serde_json::Value = match serde_json::from_str(text) {
                Ok(v) => v,
                Err(_) => return Err(first),
            };
            match doc.get("fit") {
                Some(fit) => FittedModel::from_json(&fit.to_string()),
                None => Err(first),
            }
        }
    }
}

fn cmd_predict(
    model: &Path,
    values: &Path,
    group: Option<&str>,
    format: Format,
    out: Option<&Path>,
) -> Result<()> {
    let text = read_file(model)?;
    let fitted = load_fitted_model(&text)?;
    let new_row: BTreeMap<String, f64> = parse_json(values, "variable-value map")?;
    let prediction = predict(&fitted, &new_row, group)?;

    let payload = match format {
        Format::Json => to_json(&prediction)?,
        Format::Text | Format::Csv => {
            let mut s = format!(
                "linear predictor: {}\nresponse ({}): {}\n",
                fmt(prediction.linear_predictor),
                fitted.spec.response.variable,
                fmt(prediction.back_transformed)
            );
            if let Some(b) = prediction.random_effect {
                s.push_str(&format!("random effect: {}\n", fmt(b)));
            }
            for f in &prediction.flags {
                s.push_str(&format!("note: {f}\n"));
            }
            s
        }
    };
    emit(&payload, out)
}

// ---------------------------------------------------------------------------
// forecast
// ---------------------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
fn cmd_forecast(
    descriptor: Option<&Path>,
    refclass: Option<&Path>,
    builtin: bool,
    risks: &[f64],
    model_filter: &[String],
    strict: bool,
    format: Format,
    out: Option<&Path>,
) -> Result<()> {
    if risks.is_empty() {
        return Err(Error::input("at least one --risk level is required"));
    }
    let descriptor: ProjectDescriptor = match descriptor {
        Some(path) => {
            let d: ProjectDescriptor = parse_json(path, "project descriptor")?;
            d.validate()?;
            d
        }
        None if builtin => fixtures::diamer_bhasha()?,
        None => {
            return Err(Error::input(
                "a project descriptor is required (--descriptor PATH, or --builtin for the bundled example)",
            ))
        }
    };

    let reference = match (refclass, builtin) {
        (Some(path), _) => {
            let class = load_refclass(path, strict)?;
            ReferenceDistributions::from_reference_class(&class)?
        }
        (None, true) => fixtures::paper_summary()?.reference_distributions()?,
        (None, false) => {
            return Err(Error::input(
                "reference distributions are required (--refclass PATH or --builtin)",
            ))
        }
    };

    let requested: Vec<ModelId> = model_filter
        .iter()
        .map(|s| {
            ModelId::parse(s)
                .ok_or_else(|| Error::input(format!("unknown model id {s:?} in --models")))
        })
        .collect::<Result<_>>()?;

    let set = fixtures::published_models()?;
    let mut reports = Vec::with_capacity(risks.len());
    for &risk in risks {
        let mut report = forecast_report(&set, &descriptor, &reference, risk)?;
        if !requested.is_empty() {
            // explicit model requests are strict: failures become errors
            for id in &requested {
                predict_published(&set, *id, &descriptor)?;
            }
            report.model_predictions.retain(|p| requested.contains(&p.model));
        }
        reports.push(report);
    }

    let payload = match format {
        Format::Json => to_json(&reports)?,
        Format::Csv => {
            let mut s = String::from(
                "acceptable_risk,cost_uplift_pct,debiased_cost,schedule_uplift_pct,debiased_schedule_months,debiased_bcr\n",
            );
            for r in &reports {
                let opt = |v: Option<f64>| v.map(fmt).unwrap_or_default();
                let branch = r.rcf.as_ref();
                s.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    fmt(r.acceptable_risk),
                    opt(branch.and_then(|b| b.cost_uplift).map(|u| u * 100.0)),
                    opt(branch.and_then(|b| b.debiased_cost)),
                    opt(branch.and_then(|b| b.schedule_uplift).map(|u| u * 100.0)),
                    opt(branch.and_then(|b| b.debiased_schedule_months)),
                    opt(r.viability.as_ref().map(|v| v.debiased_bcr)),
                ));
            }
            s
        }
        Format::Text => {
            let mut s = String::new();
            for (i, r) in reports.iter().enumerate() {
                if i > 0 {
                    s.push('\n');
                }
                s.push_str(&r.to_text());
            }
            s
        }
    };
    emit(&payload, out)
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
fn cmd_synth(
    spec_path: Option<&Path>,
    preset: Option<Preset>,
    countries: usize,
    projects: usize,
    seed_override: Option<u64>,
    out_dir: Option<&Path>,
    format: Format,
    out: Option<&Path>,
) -> Result<()> {
    let mut spec: SynthSpec = match (spec_path, preset) {
        (Some(path), None) => parse_json(path, "generator specification")?,
        (None, Some(Preset::FatTail)) => SynthSpec::fat_tail(countries, projects, 0),
        (None, Some(Preset::Recovery)) => SynthSpec::lmm_recovery(0),
        (None, None) => SynthSpec::fat_tail(countries, projects, 0),
        (Some(_), Some(_)) => {
            return Err(Error::input("--spec and --preset are mutually exclusive"))
        }
    };
    if let Some(seed) = seed_override {
        spec.seed = seed;
    }

    let dataset = gen_reference_class(&spec)?;

    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)
            .map_err(|e| Error::input(format!("cannot create {}: {e}", dir.display())))?;
        let refclass_path = dir.join("refclass.csv");
        let macro_path = dir.join("macro.csv");
        let truth_path = dir.join("truth.json");

        let mut refclass_csv = Vec::new();
        write_reference_csv(dataset.reference_class.records(), &mut refclass_csv)?;
        fs::write(&refclass_path, &refclass_csv)
            .map_err(|e| Error::input(format!("cannot write {}: {e}", refclass_path.display())))?;

        let mut macro_csv = Vec::new();
        write_macro_csv(&dataset.macros, &mut macro_csv)?;
        fs::write(&macro_path, &macro_csv)
            .map_err(|e| Error::input(format!("cannot write {}: {e}", macro_path.display())))?;

        fs::write(&truth_path, to_json(&dataset.truth)?)
            .map_err(|e| Error::input(format!("cannot write {}: {e}", truth_path.display())))?;

        eprintln!(
            "wrote {}, {}, {}",
            refclass_path.display(),
            macro_path.display(),
            truth_path.display()
        );
        return Ok(());
    }

    let payload = match format {
        Format::Json => to_json(&dataset)?,
        Format::Text | Format::Csv => {
            let mut csv = Vec::new();
            write_reference_csv(dataset.reference_class.records(), &mut csv)?;
            String::from_utf8(csv)
                .map_err(|e| Error::numeric(format!("CSV is not UTF-8: {e}")))?
        }
    };
    emit(&payload, out)
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

fn cmd_compare(
    refclass: Option<&Path>,
    builtin: bool,
    category: &str,
    strict: bool,
    format: Format,
    out: Option<&Path>,
) -> Result<()> {
    let (dist, _source) = load_distribution(refclass, builtin, Side::Cost, strict)?;
    let curve = UpliftCurve::new(dist);
    let benchmarks = fixtures::benchmarks()?;
    let table = compare_asset_classes(&curve, category, &benchmarks.benchmarks)?;

    let payload = match format {
        Format::Json => to_json(&table)?,
        Format::Csv => {
            let mut s = String::from("category,mean_overrun_pct,p50_uplift_pct,p80_uplift_pct\n");
            for row in &table {
                let opt = |v: Option<f64>| v.map(fmt).unwrap_or_default();
                s.push_str(&format!(
                    "{},{},{},{}\n",
                    row.category,
                    opt(row.mean_overrun_pct),
                    opt(row.p50_uplift_pct),
                    opt(row.p80_uplift_pct)
                ));
            }
            s
        }
        Format::Text => {
            let mut s = String::from(
                "category                                  mean overrun %   p50 uplift %   p80 uplift %\n",
            );
            for row in &table {
                let opt = |v: Option<f64>| v.map(|x| format!("{x:.1}")).unwrap_or_else(|| "—".into());
                s.push_str(&format!(
                    "{:<42}{:>14}{:>15}{:>15}\n",
                    row.category,
                    opt(row.mean_overrun_pct),
                    opt(row.p50_uplift_pct),
                    opt(row.p80_uplift_pct)
                ));
                if let Some(p) = &row.provenance {
                    s.push_str(&format!("    {p}\n"));
                }
            }
            s
        }
    };
    emit(&payload, out)
}
