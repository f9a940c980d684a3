//! Command-line front end: `forge`, `evolve`, `observe`, `exponents`,
//! `experiment` and `report`. Data goes to files under `--out` or to
//! stdout; diagnostics go to stderr.
//!
//! Exit codes: 0 success, 1 internal error, 2 invalid input, 3 inconclusive
//! experiment.

use std::ffi::OsString;

use clap::Parser;
use intermittency_core::evolve::EvolveError;
use intermittency_core::experiments::ExperimentError;
use intermittency_core::observables::ObservableError;
use intermittency_core::operator::ForgeError;
use intermittency_core::scaling::ScalingError;
use thiserror::Error;

pub mod args;
mod commands;
pub mod specs;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

fn evolve_is_internal(e: &EvolveError) -> bool {
    matches!(
        e,
        EvolveError::NonConvergence | EvolveError::Residual { .. } | EvolveError::SolverFailure(_)
    )
}

fn classify(internal: bool, msg: String) -> CliError {
    if internal {
        CliError::Internal(msg)
    } else {
        CliError::Validation(msg)
    }
}

impl From<ForgeError> for CliError {
    fn from(e: ForgeError) -> Self {
        classify(matches!(e, ForgeError::Eigensolver), e.to_string())
    }
}

impl From<EvolveError> for CliError {
    fn from(e: EvolveError) -> Self {
        classify(evolve_is_internal(&e), e.to_string())
    }
}

impl From<ObservableError> for CliError {
    fn from(e: ObservableError) -> Self {
        let internal = matches!(&e, ObservableError::Evolve(inner) if evolve_is_internal(inner));
        classify(internal, e.to_string())
    }
}

impl From<ScalingError> for CliError {
    fn from(e: ScalingError) -> Self {
        match e {
            ScalingError::Observable(inner) => inner.into(),
            ScalingError::Evolve(inner) => inner.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Forge(inner) => inner.into(),
            ExperimentError::Evolve(inner) => inner.into(),
            ExperimentError::Observable(inner) => inner.into(),
            ExperimentError::Scaling(inner) => inner.into(),
            other => classify(!other.is_validation(), other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

/// Parse `argv` (program name first), run the command, return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match args::Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    match cli.threads {
        Some(0) => {
            eprintln!("error: --threads must be at least 1");
            return EXIT_VALIDATION;
        }
        Some(n) => builder = builder.num_threads(n),
        None => {}
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return EXIT_INTERNAL;
        }
    };
    match pool.install(|| commands::dispatch(cli.command)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
