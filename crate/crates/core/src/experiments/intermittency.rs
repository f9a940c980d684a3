// Subsequence-dependent decay of ⟨|A_ξ|⟩_t for A = |e_n⟩⟨e_n|, ξ = e_n, where
// the average is the time-averaged return probability. Sparse barriers at
// ±2^m alternate trapping and release, so the local slope swings between
// windows; free hopping and an eigenvector give near-constant slopes.

use serde::{Deserialize, Serialize};

use super::{require, Check, ExperimentError, Outcome, Verdict};
use crate::evolve::{basis_measure, eigendecompose, horizon};
use crate::forge::{build_free_laplacian, sparse_barriers};
use crate::observables::{return_probability_series, time_average_series, CompactObservable};
use crate::operator::{ForgeError, Operator};
use crate::scaling::{slope_envelope, ScalingEstimate, WINDOW_SETTINGS};
use crate::series::{TimeAverageSeries, TimeGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum WitnessFamily {
    /// Barriers of `height` at sites `±2^m`, `m >= first_exponent`.
    SparseBarriers { height: f64, first_exponent: u32 },
    Free,
}

impl WitnessFamily {
    fn build(&self, half_width: usize) -> Result<Operator, ForgeError> {
        Ok(match *self {
            WitnessFamily::SparseBarriers {
                height,
                first_exponent,
            } => sparse_barriers(half_width, height, first_exponent)?.into(),
            WitnessFamily::Free => build_free_laplacian(half_width)?.into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntermittencyConfig {
    pub family: WitnessFamily,
    pub half_width: usize,
    pub site: i64,
    pub t_min: f64,
    pub points_per_decade: usize,
    pub safety: f64,
    /// Minimum upper-minus-lower slope gap, with every window setting.
    pub gap_threshold: f64,
    pub free_gap_max: f64,
    pub eigenvector_gap_max: f64,
    /// Window of the eigenvector control, which needs a full decomposition.
    pub control_half_width: usize,
}

impl Default for IntermittencyConfig {
    fn default() -> Self {
        Self {
            family: WitnessFamily::SparseBarriers {
                height: 3.0,
                first_exponent: 5,
            },
            half_width: 4096,
            site: 0,
            t_min: 10.0,
            points_per_decade: 32,
            safety: 0.8,
            gap_threshold: 0.3,
            free_gap_max: 0.15,
            eigenvector_gap_max: 0.05,
            control_half_width: 512,
        }
    }
}

fn envelopes(series: &TimeAverageSeries) -> Result<Vec<ScalingEstimate>, ExperimentError> {
    WINDOW_SETTINGS
        .iter()
        .map(|&w| Ok(slope_envelope(series, w)?))
        .collect()
}

fn gap_check(name: &str, control: bool, ests: &[ScalingEstimate], ok: impl Fn(f64) -> bool) -> Check {
    let verdict = Verdict::from_bool(ests.iter().all(|e| ok(e.gap())));
    let mut c = if control {
        Check::control(name, verdict)
    } else {
        Check::new(name, verdict)
    };
    for e in ests {
        let w = e.window_decades;
        c = c
            .with(&format!("lower_w{w}"), e.lower)
            .with(&format!("upper_w{w}"), e.upper)
            .with(&format!("gap_w{w}"), e.gap());
    }
    c
}

fn return_series(op: &Operator, site: i64, times: &[f64], label: &str) -> Result<TimeAverageSeries, ExperimentError> {
    let Some(index) = op.basis().site_labels().and_then(|l| l.iter().position(|&n| n == site)) else {
        return Err(ExperimentError::InvalidConfig(format!("site {site} outside window")));
    };
    let mu = basis_measure(op, index)?;
    Ok(return_probability_series(&mu, times, &op.fingerprint(), label)?)
}

pub(super) fn run(cfg: &IntermittencyConfig, _seed: u64) -> Result<Outcome, ExperimentError> {
    require(cfg.gap_threshold > 0.0, "gap_threshold must be positive")?;
    let radius = cfg.site.unsigned_abs() as usize;
    let t_max = horizon(cfg.half_width, radius, cfg.safety)
        .map_err(|e| ExperimentError::InvalidConfig(e.to_string()))?;
    let widest = WINDOW_SETTINGS.iter().copied().fold(0.0, f64::max);
    require(
        t_max >= cfg.t_min * 10f64.powf(1.5 * widest),
        format!("horizon {t_max} is too close to t_min {} for the widest window", cfg.t_min),
    )?;
    let times = TimeGrid::new(cfg.t_min, t_max, cfg.points_per_decade)?.times();
    let mut out = Outcome::default();

    let op = cfg.family.build(cfg.half_width)?;
    let series = return_series(&op, cfg.site, &times, "witness")?;
    let ests = envelopes(&series)?;
    out.checks.push(
        gap_check("slope_gap", false, &ests, |g| g >= cfg.gap_threshold)
            .with("threshold", cfg.gap_threshold)
            .with("horizon", t_max),
    );
    out.key("gap_w0.5", ests[0].gap());
    out.key("gap_w1", ests[1].gap());
    for e in ests {
        let name = format!("witness_w{}", e.window_decades);
        out.estimate(&name, e);
    }
    out.series("witness", series);

    let free: Operator = build_free_laplacian(cfg.half_width)?.into();
    let free_series = return_series(&free, cfg.site, &times, "free")?;
    let free_ests = envelopes(&free_series)?;
    out.checks.push(
        gap_check("free_gap_small", true, &free_ests, |g| g < cfg.free_gap_max)
            .with("threshold", cfg.free_gap_max),
    );
    out.series("free", free_series);

    // an eigenvector of the same family: the average is constant in t
    let small = cfg.family.build(cfg.control_half_width)?;
    let es = eigendecompose(&small)?;
    let index = small
        .basis()
        .site_labels()
        .and_then(|l| l.iter().position(|&n| n == cfg.site))
        .ok_or_else(|| ExperimentError::InvalidConfig("site outside control window".into()))?;
    let best = (0..es.dim())
        .max_by(|&a, &b| es.component(index, a).norm_sqr().total_cmp(&es.component(index, b).norm_sqr()))
        .expect("non-empty spectrum");
    let a = CompactObservable::basis_projector(es.dim(), index)?;
    let eig_series = time_average_series(&a, &es, &es.eigenvector(best), &times, "eigenvector")?;
    let eig_ests = envelopes(&eig_series)?;
    out.checks.push(
        gap_check("eigenvector_gap_flat", true, &eig_ests, |g| g < cfg.eigenvector_gap_max)
            .with("threshold", cfg.eigenvector_gap_max),
    );
    out.series("eigenvector", eig_series);
    Ok(out)
}
