//! Seeded witness experiments and persisted run records.
//!
//! Each experiment takes a JSON config (missing keys take defaults, unknown
//! keys are rejected) and a seed, and returns a [`RunRecord`] whose verdict
//! is backed by the numbers in its checks, series and tables.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::evolve::EvolveError;
use crate::hash::sha256_hex;
use crate::observables::{CompactObservable, ObservableError};
use crate::operator::{Basis, ForgeError};
use crate::scaling::{ScalingError, ScalingEstimate};
use crate::series::TimeAverageSeries;

mod anderson;
mod eigenweight;
mod intermittency;
mod last_bound;
mod rage;
mod record;
mod sr_sd;
mod vk;

pub use anderson::AndersonSpectrumConfig;
pub use eigenweight::EigenweightConfig;
pub use intermittency::{IntermittencyConfig, WitnessFamily};
pub use last_bound::LastBoundConfig;
pub use rage::RageConfig;
pub use record::{report, Report, ReportRow};
pub use sr_sd::{SrSdConfig, SrSdFamily};
pub use vk::{BasePotential, VkConfig};

pub const CODE_VERSION: &str = concat!("intermittency-core ", env!("CARGO_PKG_VERSION"));

/// Experiment names accepted by [`run_experiment`].
pub const EXPERIMENTS: [&str; 7] = [
    "rage",
    "intermittency",
    "anderson_spectrum",
    "vk_bound_state",
    "eigenweight",
    "last_bound",
    "sr_sd",
];

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("unknown experiment {0:?}")]
    UnknownExperiment(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("corrupt run record {path}: {reason}")]
    Corrupt { path: String, reason: String },
    #[error(transparent)]
    Forge(#[from] ForgeError),
    #[error(transparent)]
    Evolve(#[from] EvolveError),
    #[error(transparent)]
    Observable(#[from] ObservableError),
    #[error(transparent)]
    Scaling(#[from] ScalingError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl ExperimentError {
    /// True for problems with the request rather than with the computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            ExperimentError::UnknownExperiment(_)
                | ExperimentError::InvalidConfig(_)
                | ExperimentError::Json(_)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        }
    }

    /// Any fail wins, then any inconclusive, else pass.
    pub fn combine(items: impl IntoIterator<Item = Verdict>) -> Self {
        let mut out = Verdict::Pass;
        for v in items {
            match v {
                Verdict::Fail => return Verdict::Fail,
                Verdict::Inconclusive => out = Verdict::Inconclusive,
                Verdict::Pass => {}
            }
        }
        out
    }
}

/// One verdict-bearing comparison. Controls check that a known answer
/// comes out as expected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub control: bool,
    pub verdict: Verdict,
    pub evidence: BTreeMap<String, f64>,
    pub note: String,
}

impl Check {
    pub fn new(name: &str, verdict: Verdict) -> Self {
        Self {
            name: name.into(),
            control: false,
            verdict,
            evidence: BTreeMap::new(),
            note: String::new(),
        }
    }

    pub fn control(name: &str, verdict: Verdict) -> Self {
        Self {
            control: true,
            ..Self::new(name, verdict)
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.evidence.insert(key.into(), value);
        self
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedSeries {
    pub name: String,
    pub series: TimeAverageSeries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedEstimate {
    pub name: String,
    pub estimate: ScalingEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: vec![],
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|x| format!("{x:e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Everything an experiment body produces.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub series: Vec<NamedSeries>,
    pub estimates: Vec<NamedEstimate>,
    pub tables: Vec<Table>,
    pub summary: BTreeMap<String, f64>,
}

impl Outcome {
    fn series(&mut self, name: &str, series: TimeAverageSeries) {
        self.series.push(NamedSeries {
            name: name.into(),
            series,
        });
    }

    fn estimate(&mut self, name: &str, estimate: ScalingEstimate) {
        self.estimates.push(NamedEstimate {
            name: name.into(),
            estimate,
        });
    }

    fn key(&mut self, name: &str, value: f64) {
        self.summary.insert(name.into(), value);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub experiment: String,
    /// Fully resolved configuration, defaults included.
    pub config: Value,
    pub seed: u64,
    /// SHA-256 of `{experiment, config, seed}`; names the record file.
    pub config_hash: String,
    pub verdict: Verdict,
    pub checks: Vec<Check>,
    pub series: Vec<NamedSeries>,
    pub estimates: Vec<NamedEstimate>,
    pub tables: Vec<Table>,
    pub summary: BTreeMap<String, f64>,
    pub code_version: String,
    pub wall_time_s: f64,
    /// SHA-256 of the record with this field emptied and the wall time zeroed.
    pub record_hash: String,
}

impl RunRecord {
    pub fn compute_record_hash(&self) -> String {
        let mut copy = self.clone();
        copy.record_hash.clear();
        copy.wall_time_s = 0.0;
        sha256_hex(&serde_json::to_vec(&copy).expect("records serialize"))
    }

    /// JSON with the wall time zeroed: identical for identical runs.
    pub fn canonical_json(&self) -> String {
        let mut copy = self.clone();
        copy.wall_time_s = 0.0;
        serde_json::to_string_pretty(&copy).expect("records serialize")
    }

    pub fn short_hash(&self) -> &str {
        &self.config_hash[..16]
    }
}

pub fn config_hash(experiment: &str, config: &Value, seed: u64) -> String {
    let doc = serde_json::json!({ "experiment": experiment, "config": config, "seed": seed });
    sha256_hex(&serde_json::to_vec(&doc).expect("json values serialize"))
}

fn parse_config<C: DeserializeOwned + Default>(config: &Value) -> Result<C, ExperimentError> {
    match config {
        Value::Null => Ok(C::default()),
        v => serde_json::from_value(v.clone()).map_err(|e| ExperimentError::InvalidConfig(e.to_string())),
    }
}

/// Runs experiment `name` with a JSON config (`null` for defaults).
pub fn run_experiment(name: &str, config: &Value, seed: u64) -> Result<RunRecord, ExperimentError> {
    let start = Instant::now();
    macro_rules! dispatch {
        ($cfg:ty, $body:path) => {{
            let cfg: $cfg = parse_config(config)?;
            let resolved = serde_json::to_value(&cfg)?;
            (resolved, $body(&cfg, seed)?)
        }};
    }
    let (resolved, outcome) = match name {
        "rage" => dispatch!(RageConfig, rage::run),
        "intermittency" => dispatch!(IntermittencyConfig, intermittency::run),
        "anderson_spectrum" => dispatch!(AndersonSpectrumConfig, anderson::run),
        "vk_bound_state" => dispatch!(VkConfig, vk::run),
        "eigenweight" => dispatch!(EigenweightConfig, eigenweight::run),
        "last_bound" => dispatch!(LastBoundConfig, last_bound::run),
        "sr_sd" => dispatch!(SrSdConfig, sr_sd::run),
        other => return Err(ExperimentError::UnknownExperiment(other.into())),
    };
    let verdict = Verdict::combine(outcome.checks.iter().map(|c| c.verdict));
    let mut record = RunRecord {
        experiment: name.into(),
        config_hash: config_hash(name, &resolved, seed),
        config: resolved,
        seed,
        verdict,
        checks: outcome.checks,
        series: outcome.series,
        estimates: outcome.estimates,
        tables: outcome.tables,
        summary: outcome.summary,
        code_version: CODE_VERSION.into(),
        wall_time_s: start.elapsed().as_secs_f64(),
        record_hash: String::new(),
    };
    record.record_hash = record.compute_record_hash();
    Ok(record)
}

// ---------------------------------------------------------------------------
// Shared config pieces
// ---------------------------------------------------------------------------

/// Compact observable named in a config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableSpec {
    /// `|e_n⟩⟨e_n|` for lattice site `n`.
    SiteProjector { site: i64 },
    /// Random positive operator of rank `rank` on sites `|n| <= radius`.
    RandomPositive { rank: usize, radius: usize },
    Zero,
}

impl Default for ObservableSpec {
    fn default() -> Self {
        ObservableSpec::SiteProjector { site: 0 }
    }
}

impl ObservableSpec {
    pub fn build(&self, basis: &Basis, seed: u64) -> Result<CompactObservable, ExperimentError> {
        let dim = basis.dim();
        let Basis::Sites { half_width } = *basis else {
            return Err(ExperimentError::InvalidConfig("observable needs a lattice basis".into()));
        };
        match *self {
            ObservableSpec::SiteProjector { site } => {
                if site.unsigned_abs() as usize > half_width {
                    return Err(ExperimentError::InvalidConfig(format!("site {site} outside window")));
                }
                Ok(CompactObservable::basis_projector(dim, (site + half_width as i64) as usize)?)
            }
            ObservableSpec::RandomPositive { rank, radius } => {
                if radius > half_width {
                    return Err(ExperimentError::InvalidConfig("radius exceeds window".into()));
                }
                let support = half_width - radius..half_width + radius + 1;
                Ok(CompactObservable::random_positive(dim, rank, Some(support), seed, 0)?)
            }
            ObservableSpec::Zero => Ok(CompactObservable::zero(dim)),
        }
    }

    pub fn support_radius(&self) -> usize {
        match *self {
            ObservableSpec::SiteProjector { site } => site.unsigned_abs() as usize,
            ObservableSpec::RandomPositive { radius, .. } => radius,
            ObservableSpec::Zero => 0,
        }
    }
}

fn require(cond: bool, msg: impl Into<String>) -> Result<(), ExperimentError> {
    if cond {
        Ok(())
    } else {
        Err(ExperimentError::InvalidConfig(msg.into()))
    }
}
