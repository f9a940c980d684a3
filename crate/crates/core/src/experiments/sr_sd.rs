// Central truncations T_N of a reference operator converge to it in both the
// resolvent and the dynamical sense on a fixed wave packet. Both error
// columns must shrink by the required factor along the ladder.

use serde::{Deserialize, Serialize};

use super::{require, Check, ExperimentError, Outcome, Table, Verdict};
use crate::evolve::{sr_sd_check, SrSdRow, StateVector};
use crate::forge::{build_free_laplacian, sample_anderson, AndersonSpec};
use crate::operator::Operator;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SrSdFamily {
    Free,
    /// Truncations of one Anderson sample on the reference window.
    Anderson { disorder: f64 },
    /// Every rung is the reference itself.
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SrSdConfig {
    pub family: SrSdFamily,
    pub ladder: Vec<usize>,
    pub reference: usize,
    pub t: f64,
    pub packet_width: f64,
    /// Required shrink factor from the first rung to the last.
    pub shrink: f64,
    /// Errors at or below this count as zero.
    pub zero_tolerance: f64,
    /// Reference window of the constant-ladder control.
    pub control_reference: usize,
}

impl Default for SrSdConfig {
    fn default() -> Self {
        Self {
            family: SrSdFamily::Free,
            ladder: vec![64, 128, 256, 512, 1024],
            reference: 2048,
            t: 20.0,
            packet_width: 64.0,
            shrink: 4.0,
            zero_tolerance: 1e-12,
            control_reference: 64,
        }
    }
}

fn reference(family: &SrSdFamily, half_width: usize, seed: u64) -> Result<Operator, ExperimentError> {
    Ok(match *family {
        SrSdFamily::Free | SrSdFamily::Constant => build_free_laplacian(half_width)?.into(),
        SrSdFamily::Anderson { disorder } => {
            sample_anderson(&AndersonSpec::uniform(half_width, disorder, seed))?.into()
        }
    })
}

fn ladder(
    family: &SrSdFamily,
    limit: &Operator,
    sizes: &[usize],
) -> Result<Vec<Operator>, ExperimentError> {
    sizes
        .iter()
        .map(|&n| match family {
            SrSdFamily::Constant => Ok(limit.clone()),
            _ => Ok(limit.truncate(n as f64)?),
        })
        .collect()
}

/// True when `last` is `shrink` times smaller than `first`, or both vanish.
fn shrinks(first: f64, last: f64, shrink: f64, zero: f64) -> bool {
    (first <= zero && last <= zero) || last * shrink <= first
}

fn table(rows: &[SrSdRow], name: &str) -> Table {
    let mut t = Table::new(name, &["dim", "resolvent_error", "dynamical_error"]);
    for r in rows {
        t.push(vec![r.dim as f64, r.resolvent_error, r.dynamical_error]);
    }
    t
}

pub(super) fn run(cfg: &SrSdConfig, seed: u64) -> Result<Outcome, ExperimentError> {
    require(cfg.ladder.len() >= 2, "ladder needs at least two rungs")?;
    require(cfg.ladder.windows(2).all(|w| w[0] < w[1]), "ladder must be increasing")?;
    require(
        *cfg.ladder.last().unwrap() <= cfg.reference,
        "ladder must stay inside the reference window",
    )?;
    require(cfg.shrink > 1.0, "shrink factor must exceed 1")?;
    require(cfg.packet_width > 0.0, "packet width must be positive")?;

    let limit = reference(&cfg.family, cfg.reference, seed)?;
    let u = StateVector::gaussian(limit.basis(), 0.0, cfg.packet_width)?;
    let rows = sr_sd_check(&ladder(&cfg.family, &limit, &cfg.ladder)?, &limit, &u, cfg.t)?;
    let (first, last) = (rows[0], rows[rows.len() - 1]);
    let ok_r = shrinks(first.resolvent_error, last.resolvent_error, cfg.shrink, cfg.zero_tolerance);
    let ok_d = shrinks(first.dynamical_error, last.dynamical_error, cfg.shrink, cfg.zero_tolerance);

    let mut out = Outcome::default();
    out.checks.push(
        Check::new("errors_shrink", Verdict::from_bool(ok_r && ok_d))
            .with("resolvent_first", first.resolvent_error)
            .with("resolvent_last", last.resolvent_error)
            .with("dynamical_first", first.dynamical_error)
            .with("dynamical_last", last.dynamical_error)
            .with("shrink", cfg.shrink),
    );

    // a constant ladder on a small window: both columns vanish
    let small = reference(&cfg.family, cfg.control_reference, seed)?;
    let v = StateVector::gaussian(small.basis(), 0.0, cfg.packet_width)?;
    let ctrl = sr_sd_check(&[small.clone(), small.clone()], &small, &v, cfg.t)?;
    let worst = ctrl
        .iter()
        .map(|r| r.resolvent_error.max(r.dynamical_error))
        .fold(0.0, f64::max);
    out.checks.push(
        Check::control("constant_ladder_is_exact", Verdict::from_bool(worst <= cfg.zero_tolerance))
            .with("max_error", worst)
            .with("tolerance", cfg.zero_tolerance),
    );

    out.key("resolvent_shrink", first.resolvent_error / last.resolvent_error.max(f64::MIN_POSITIVE));
    out.key("dynamical_shrink", first.dynamical_error / last.dynamical_error.max(f64::MIN_POSITIVE));
    out.tables.push(table(&rows, "errors"));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(family: SrSdFamily) -> SrSdConfig {
        SrSdConfig {
            family,
            ladder: vec![16, 32, 64],
            reference: 128,
            t: 5.0,
            packet_width: 8.0,
            control_reference: 16,
            ..Default::default()
        }
    }

    #[test]
    fn small_free_and_anderson_ladders_pass() {
        for f in [SrSdFamily::Free, SrSdFamily::Anderson { disorder: 2.0 }] {
            let out = run(&small(f.clone()), 3).unwrap();
            assert!(out.checks.iter().all(|c| c.verdict == Verdict::Pass), "{f:?}");
        }
    }

    #[test]
    fn constant_ladder_is_trivially_zero() {
        let out = run(&small(SrSdFamily::Constant), 3).unwrap();
        assert!(out.tables[0].rows.iter().all(|r| r[1] <= 1e-12 && r[2] <= 1e-12));
        assert_eq!(out.checks[0].verdict, Verdict::Pass);
    }

    #[test]
    fn non_increasing_ladder_is_rejected() {
        let cfg = SrSdConfig {
            ladder: vec![64, 64],
            ..Default::default()
        };
        assert!(matches!(run(&cfg, 1), Err(ExperimentError::InvalidConfig(_))));
    }
}
