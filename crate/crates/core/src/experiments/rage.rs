// Time averages of a compact A for an eigenvector (no decay) and for a
// state with absolutely continuous spectral measure (decay).

use serde::{Deserialize, Serialize};

use super::{require, Check, ExperimentError, ObservableSpec, Outcome, Verdict};
use crate::evolve::{eigendecompose, horizon, EigenSystem, StateVector};
use crate::forge::{build_free_laplacian, sample_anderson, AndersonSpec};
use crate::observables::{time_average_abs, time_average_series, CompactObservable};
use crate::operator::Operator;
use crate::series::{TimeAverageSeries, TimeGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RageConfig {
    pub half_width: usize,
    pub disorder: f64,
    pub observable: ObservableSpec,
    pub t_min: f64,
    pub points_per_decade: usize,
    pub safety: f64,
    /// Floor the eigenvector average must stay above.
    pub floor: f64,
    /// Time by which the free average must drop below `decay_threshold`.
    pub t_check: f64,
    pub decay_threshold: f64,
}

impl Default for RageConfig {
    fn default() -> Self {
        Self {
            half_width: 1024,
            disorder: 2.0,
            observable: ObservableSpec::default(),
            t_min: 1.0,
            points_per_decade: 32,
            safety: 0.8,
            floor: 0.1,
            t_check: 200.0,
            decay_threshold: 0.02,
        }
    }
}

fn averages(
    a: &CompactObservable,
    es: &EigenSystem,
    xi: &StateVector,
    times: &[f64],
    label: &str,
) -> Result<TimeAverageSeries, ExperimentError> {
    if a.is_positive() {
        return Ok(time_average_series(a, es, xi, times, label)?);
    }
    let values = times
        .iter()
        .map(|&t| time_average_abs(a, es, xi, t))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TimeAverageSeries::new(
        times.to_vec(),
        values,
        crate::series::Quantity::Expectation,
        es.source_hash(),
        label,
    )?)
}

pub(super) fn run(cfg: &RageConfig, seed: u64) -> Result<Outcome, ExperimentError> {
    require(cfg.floor > 0.0 && cfg.decay_threshold > 0.0, "thresholds must be positive")?;
    require(cfg.t_check > cfg.t_min, "t_check must exceed t_min")?;
    let radius = cfg.observable.support_radius();
    let t_max = horizon(cfg.half_width, radius, cfg.safety)
        .map_err(|e| ExperimentError::InvalidConfig(e.to_string()))?;
    require(
        t_max > cfg.t_min,
        format!("horizon {t_max} does not exceed t_min {}", cfg.t_min),
    )?;
    let mut times = TimeGrid::new(cfg.t_min, t_max, cfg.points_per_decade)?.times();
    let reaches_check = cfg.t_check <= t_max;
    if reaches_check && !times.contains(&cfg.t_check) {
        times.push(cfg.t_check);
        times.sort_by(f64::total_cmp);
    }

    let anderson: Operator = sample_anderson(&AndersonSpec::uniform(cfg.half_width, cfg.disorder, seed))?.into();
    let basis = anderson.basis();
    let a = cfg.observable.build(&basis, seed)?;
    if a.is_zero() {
        return Err(ExperimentError::InvalidConfig("observable A is zero".into()));
    }
    let mut out = Outcome::default();

    // (i) eigenvector of the Anderson sample carrying the most A-weight
    let es = eigendecompose(&anderson)?;
    let (best, stationary) = (0..es.dim())
        .map(|k| {
            let psi = es.eigenvector(k);
            let ax = a.apply(psi.amplitudes());
            let v: f64 = psi.amplitudes().iter().zip(&ax).map(|(p, q)| (p.conj() * q).re).sum();
            (k, v.abs())
        })
        .fold((0, f64::NEG_INFINITY), |m, x| if x.1 > m.1 { x } else { m });
    let psi = es.eigenvector(best);
    let series_i = averages(&a, &es, &psi, &times, "anderson_eigenvector")?;
    let min_i = series_i.values.iter().copied().fold(f64::INFINITY, f64::min);
    out.checks.push(
        Check::new("eigenvector_no_decay", Verdict::from_bool(min_i > cfg.floor))
            .with("min_average", min_i)
            .with("floor", cfg.floor)
            .with("eigenvalue", es.eigenvalues()[best]),
    );
    let drift = series_i
        .values
        .iter()
        .map(|v| (v - stationary).abs())
        .fold(0.0, f64::max);
    out.checks.push(
        Check::control("eigenvector_average_is_stationary", Verdict::from_bool(drift <= 1e-8))
            .with("stationary_value", stationary)
            .with("max_drift", drift),
    );
    drop(es);

    // (ii) free Laplacian, localized initial state
    let free: Operator = build_free_laplacian(cfg.half_width)?.into();
    let es = eigendecompose(&free)?;
    let xi = StateVector::site(basis.clone(), 0)?;
    let series_ii = averages(&a, &es, &xi, &times, "free_e0")?;
    let at_check = reaches_check.then(|| {
        let i = series_ii.times.iter().position(|&t| t == cfg.t_check).expect("t_check on grid");
        series_ii.values[i]
    });
    let check = if let Some(v) = at_check {
        Check::new("free_state_decays", Verdict::from_bool(v < cfg.decay_threshold))
            .with("value_at_t_check", v)
            .with("t_check", cfg.t_check)
            .with("threshold", cfg.decay_threshold)
    } else {
        Check::new("free_state_decays", Verdict::Inconclusive)
            .with("horizon", t_max)
            .with("t_check", cfg.t_check)
            .note("horizon ends before t_check")
    };
    out.checks.push(check);

    out.key("eigenvector_min_average", min_i);
    out.key("horizon", t_max);
    if let Some(v) = at_check {
        out.key("free_value_at_t_check", v);
    }
    out.series("anderson_eigenvector", series_i);
    out.series("free_e0", series_ii);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_window_is_inconclusive() {
        let cfg = RageConfig {
            half_width: 64,
            ..Default::default()
        };
        let out = run(&cfg, 7).unwrap();
        assert_eq!(
            Verdict::combine(out.checks.iter().map(|c| c.verdict)),
            Verdict::Inconclusive
        );
        assert_eq!(out.checks[0].verdict, Verdict::Pass);
    }

    #[test]
    fn zero_observable_fails_fast() {
        let cfg = RageConfig {
            half_width: 16,
            observable: ObservableSpec::Zero,
            ..Default::default()
        };
        assert!(matches!(run(&cfg, 7), Err(ExperimentError::InvalidConfig(_))));
    }
}
