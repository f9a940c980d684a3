use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "intermittency-lab", version, about = "Time-averaged quantum dynamics on finite windows")]
pub struct Cli {
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true, env = "INTERMITTENCY_LAB_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build an operator and write it as JSON.
    Forge(ForgeArgs),
    /// Evolve a state to time t and write its amplitudes.
    Evolve(EvolveArgs),
    /// Time-averaged series on a log-spaced grid, as CSV.
    Observe(ObserveArgs),
    /// Slope envelopes, D2 and transport proxies, alpha scans.
    Exponents(ExponentsArgs),
    /// Run a named experiment and persist its record.
    Experiment(ExperimentArgs),
    /// Summarize the run records under a directory.
    Report(ReportArgs),
}

/// Fields shared by every command that builds an operator. `size` is the
/// half-width N for lattices, the dimension for dense matrices and the box
/// half-width L for continuum operators.
macro_rules! with_operator_fields {
    (
        $(#[$m:meta])*
        pub struct $name:ident { $($(#[$fm:meta])* pub $f:ident: $t:ty,)* }
    ) => {
        $(#[$m])*
        pub struct $name {
            $($(#[$fm])* pub $f: $t,)*
            #[arg(long)]
            pub size: Option<f64>,
            #[arg(long)]
            pub seed: Option<u64>,
            /// Ensemble index of a random operator.
            #[arg(long)]
            pub realization: Option<u64>,
            /// Anderson disorder bound b.
            #[arg(long)]
            pub disorder: Option<f64>,
            #[arg(long)]
            pub barrier_height: Option<f64>,
            #[arg(long)]
            pub first_exponent: Option<u32>,
            /// JSON array with an explicit potential.
            #[arg(long)]
            pub potential: Option<PathBuf>,
            #[arg(long)]
            pub spacing: Option<f64>,
            /// Norm cap (dense) or potential cap C (continuum).
            #[arg(long)]
            pub cap: Option<f64>,
            /// Apply the V_k construction with this k.
            #[arg(long)]
            pub k: Option<u32>,
        }

        impl $name {
            pub fn operator_params(&self) -> crate::specs::OperatorParams {
                crate::specs::OperatorParams {
                    size: self.size,
                    seed: self.seed.unwrap_or(0),
                    realization: self.realization.unwrap_or(0),
                    disorder: self.disorder,
                    barrier_height: self.barrier_height,
                    first_exponent: self.first_exponent,
                    potential: self.potential.clone(),
                    spacing: self.spacing,
                    cap: self.cap,
                    k: self.k,
                }
            }
        }
    };
}

with_operator_fields! {
    #[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
    #[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
    pub struct ForgeArgs {
        /// JSON file whose keys mirror the flags; flags win.
        #[arg(long)]
        #[serde(skip)]
        pub config: Option<PathBuf>,
        /// free, anderson, jacobi, continuum or dense.
        #[arg(long)]
        pub kind: Option<String>,
        /// Output file; stdout when absent.
        #[arg(long)]
        pub out: Option<PathBuf>,
    }
}

with_operator_fields! {
    #[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
    #[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
    pub struct EvolveArgs {
        #[arg(long)]
        #[serde(skip)]
        pub config: Option<PathBuf>,
        /// Operator kind, or a JSON file written by forge.
        #[arg(long)]
        pub operator: Option<String>,
        /// e<label>, gauss:<center>:<width> or file:<path>.
        #[arg(long)]
        pub xi: Option<String>,
        #[arg(long)]
        pub t: Option<f64>,
        #[arg(long)]
        pub safety: Option<f64>,
        #[arg(long)]
        pub out: Option<PathBuf>,
    }
}

with_operator_fields! {
    #[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
    #[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
    pub struct ObserveArgs {
        #[arg(long)]
        #[serde(skip)]
        pub config: Option<PathBuf>,
        #[arg(long)]
        pub operator: Option<String>,
        #[arg(long)]
        pub xi: Option<String>,
        /// proj:<state>, rank:<r>:<radius> or zero.
        #[arg(long = "A")]
        #[serde(rename = "A")]
        pub a: Option<String>,
        /// expectation, return-prob or moment.
        #[arg(long)]
        pub quantity: Option<String>,
        #[arg(long)]
        pub q: Option<f64>,
        /// lo:hi in decades of t.
        #[arg(long)]
        pub t_decades: Option<String>,
        #[arg(long)]
        pub points_per_decade: Option<usize>,
        #[arg(long)]
        pub safety: Option<f64>,
        #[arg(long)]
        pub out: Option<PathBuf>,
    }
}

with_operator_fields! {
    #[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
    #[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
    pub struct ExponentsArgs {
        #[arg(long)]
        #[serde(skip)]
        pub config: Option<PathBuf>,
        /// envelope, d2, beta or alpha.
        #[arg(long)]
        pub estimator: Option<String>,
        /// Series CSV written by observe; otherwise one is computed.
        #[arg(long)]
        pub series: Option<PathBuf>,
        #[arg(long)]
        pub operator: Option<String>,
        #[arg(long)]
        pub xi: Option<String>,
        #[arg(long = "A")]
        #[serde(rename = "A")]
        pub a: Option<String>,
        #[arg(long)]
        pub quantity: Option<String>,
        #[arg(long)]
        pub q: Option<f64>,
        #[arg(long)]
        pub t_decades: Option<String>,
        #[arg(long)]
        pub points_per_decade: Option<usize>,
        #[arg(long)]
        pub safety: Option<f64>,
        /// Comma-separated window widths in decades.
        #[arg(long)]
        pub windows: Option<String>,
        /// Divide by ln t + c before taking D2 slopes.
        #[arg(long)]
        pub log_correction: bool,
        /// power:<p>, logpower:<p>, iterlog or table:<csv>.
        #[arg(long)]
        pub alpha: Option<String>,
        #[arg(long)]
        pub out: Option<PathBuf>,
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub name: Option<String>,
    /// JSON file with the experiment parameters.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Record root; records land in <out>/<name>/<hash>.json.
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    #[arg(default_value = "runs")]
    pub dir: PathBuf,
}

pub fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{} is not valid JSON: {e}", path.display())))
}

/// Overlay the flags that were given on the config file, then re-parse so
/// that unknown keys in the file are rejected.
pub fn merge<T: Serialize + DeserializeOwned>(cli: &T, config: Option<&Path>) -> Result<T, CliError> {
    let mut base = match config {
        None => Map::new(),
        Some(p) => match read_json(p)? {
            Value::Object(m) => m,
            _ => return Err(CliError::Validation(format!("{} must hold a JSON object", p.display()))),
        },
    };
    let Value::Object(flags) = serde_json::to_value(cli).map_err(|e| CliError::Internal(e.to_string()))? else {
        unreachable!("argument structs serialize to objects");
    };
    for (k, v) in flags {
        if !(v.is_null() || v == Value::Bool(false)) {
            base.insert(k, v);
        }
    }
    serde_json::from_value(Value::Object(base)).map_err(|e| CliError::Validation(format!("config: {e}")))
}

pub fn required<T: Clone>(v: &Option<T>, flag: &str) -> Result<T, CliError> {
    v.clone()
        .ok_or_else(|| CliError::Validation(format!("missing required flag --{flag}")))
}
