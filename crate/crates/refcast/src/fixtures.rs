//! Bundled data fixtures: the reconstructed overrun summary distributions,
//! the cross-asset benchmark table, the frozen regression coefficient sets,
//! and a worked example project descriptor.
//!
//! All four files are embedded in the binary. Setting the environment
//! variable named by [`ENV_FIXTURE_DIR`] redirects loading to
//! `<dir>/<name>.json` instead, which must then exist and parse — a missing
//! or malformed override is a hard error, never a silent fallback.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::papermodels::{ProjectDescriptor, PublishedModelSet, ReferenceDistributions};
use crate::rcf::{AssetClassBenchmark, UpliftCurve};
use crate::stats::EmpiricalDistribution;

/// Environment variable naming a directory of replacement fixture files.
pub const ENV_FIXTURE_DIR: &str = "REFCAST_FIXTURES";

const PAPER_SUMMARY_JSON: &str = include_str!("../fixtures/paper_summary.json");
const BENCHMARKS_JSON: &str = include_str!("../fixtures/benchmarks.json");
const PAPER_MODELS_JSON: &str = include_str!("../fixtures/paper_models.json");
const DIAMER_BHASHA_JSON: &str = include_str!("../fixtures/diamer_bhasha.json");

/// A published constant quoted as-is because its derivation inputs were
/// never released.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuotedConstant {
    pub value: f64,
    pub note: String,
}

/// The reconstructed summary-distribution fixture: 10-point quantile
/// sketches of the cost and schedule overrun distributions plus quoted
/// constants that cannot be re-derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFixture {
    pub label: String,
    pub provenance: String,
    pub cost_overrun_sample: Vec<f64>,
    pub schedule_slippage_sample: Vec<f64>,
    pub quoted_constants: BTreeMap<String, QuotedConstant>,
}

impl SummaryFixture {
    pub fn cost_distribution(&self) -> Result<EmpiricalDistribution> {
        EmpiricalDistribution::new(self.cost_overrun_sample.clone())
    }

    pub fn schedule_distribution(&self) -> Result<EmpiricalDistribution> {
        EmpiricalDistribution::new(self.schedule_slippage_sample.clone())
    }

    pub fn cost_uplift_curve(&self) -> Result<UpliftCurve> {
        Ok(UpliftCurve::new(self.cost_distribution()?))
    }

    pub fn schedule_uplift_curve(&self) -> Result<UpliftCurve> {
        Ok(UpliftCurve::new(self.schedule_distribution()?))
    }

    /// Both sketches bundled for the forecast workflow, labeled by origin.
    pub fn reference_distributions(&self) -> Result<ReferenceDistributions> {
        ReferenceDistributions::new(
            &self.label,
            Some(self.cost_distribution()?),
            Some(self.schedule_distribution()?),
        )
    }

    pub fn quoted(&self, key: &str) -> Result<&QuotedConstant> {
        self.quoted_constants
            .get(key)
            .ok_or_else(|| Error::input(format!("no quoted constant named {key:?}")))
    }
}

/// The benchmark table fixture: overrun summaries across asset classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTable {
    pub provenance: String,
    pub benchmarks: Vec<AssetClassBenchmark>,
}

impl BenchmarkTable {
    pub fn row(&self, category: &str) -> Result<&AssetClassBenchmark> {
        self.benchmarks
            .iter()
            .find(|b| b.category == category)
            .ok_or_else(|| Error::input(format!("no benchmark row for category {category:?}")))
    }
}

/// Reads the text of fixture `name` either from `dir` (when given) or from
/// the embedded copy. Split out from the env lookup so the directory path
/// is directly testable.
fn text_from(dir: Option<PathBuf>, name: &str, embedded: &'static str) -> Result<String> {
    match dir {
        Some(dir) => {
            let path = dir.join(format!("{name}.json"));
            std::fs::read_to_string(&path).map_err(|e| {
                Error::input(format!(
                    "fixture override {} could not be read: {e}",
                    path.display()
                ))
            })
        }
        None => Ok(embedded.to_string()),
    }
}

fn override_dir() -> Option<PathBuf> {
    std::env::var_os(ENV_FIXTURE_DIR).map(PathBuf::from)
}

fn load<T: serde::de::DeserializeOwned>(name: &str, embedded: &'static str) -> Result<T> {
    let text = text_from(override_dir(), name, embedded)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::input(format!("fixture {name}.json did not parse: {e}")))
}

/// Loads the reconstructed summary-distribution fixture.
pub fn paper_summary() -> Result<SummaryFixture> {
    let fixture: SummaryFixture = load("paper_summary", PAPER_SUMMARY_JSON)?;
    // validate eagerly so a broken override fails at load, not first use
    fixture.cost_distribution()?;
    fixture.schedule_distribution()?;
    Ok(fixture)
}

/// Loads the cross-asset benchmark table.
pub fn benchmarks() -> Result<BenchmarkTable> {
    let table: BenchmarkTable = load("benchmarks", BENCHMARKS_JSON)?;
    for row in &table.benchmarks {
        row.validate()?;
    }
    Ok(table)
}

/// Loads the frozen published-model coefficient sets.
pub fn published_models() -> Result<PublishedModelSet> {
    let set: PublishedModelSet = load("paper_models", PAPER_MODELS_JSON)?;
    if set.models.is_empty() {
        return Err(Error::input("paper_models.json holds no models"));
    }
    Ok(set)
}

/// Loads the bundled worked-example project descriptor.
pub fn diamer_bhasha() -> Result<ProjectDescriptor> {
    let descriptor: ProjectDescriptor = load("diamer_bhasha", DIAMER_BHASHA_JSON)?;
    descriptor.validate()?;
    Ok(descriptor)
}

/// Writes copies of every embedded fixture into `dir`, so users can start
/// an override directory from the shipped versions.
pub fn export_embedded(dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::input(format!("cannot create {}: {e}", dir.display())))?;
    let mut written = Vec::new();
    for (name, text) in [
        ("paper_summary", PAPER_SUMMARY_JSON),
        ("benchmarks", BENCHMARKS_JSON),
        ("paper_models", PAPER_MODELS_JSON),
        ("diamer_bhasha", DIAMER_BHASHA_JSON),
    ] {
        let path = dir.join(format!("{name}.json"));
        std::fs::write(&path, text)
            .map_err(|e| Error::input(format!("cannot write {}: {e}", path.display())))?;
        written.push(path);
    }
    Ok(written)
}
