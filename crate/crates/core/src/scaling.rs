//! Finite-time stand-ins for liminf/limsup exponents.
//!
//! A series is fitted on sliding windows of fixed width in `log10 t`; the
//! smallest and largest window slopes bound the exponent seen along any
//! time subsequence inside the grid.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evolve::{spectral_measure, EigenSystem, EvolveError, StateVector};
use crate::measure::SpectralMeasure;
use crate::observables::{moment_q, return_probability_series, ObservableError};
use crate::series::{Quantity, TimeAverageSeries};

/// Window widths every estimate is reported with.
pub const WINDOW_SETTINGS: [f64; 2] = [0.5, 1.0];
const MIN_WINDOW_POINTS: usize = 3;
const DECADE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScalingError {
    #[error("series value {value} at index {index} is not positive")]
    NonPositive { index: usize, value: f64 },
    #[error("series too short: {0}")]
    TooShort(String),
    #[error("window width must be positive, got {0}")]
    InvalidWindow(f64),
    #[error("measure has no atoms")]
    EmptyMeasure,
    #[error("invalid epsilon grid: {0}")]
    InvalidEps(String),
    #[error("alpha function undefined: {0}")]
    InvalidAlpha(String),
    #[error(transparent)]
    Observable(#[from] ObservableError),
    #[error(transparent)]
    Evolve(#[from] EvolveError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingEstimate {
    pub quantity: String,
    pub lower: f64,
    pub upper: f64,
    pub window_decades: f64,
    /// `(t_center, slope)` per complete window.
    pub window_slopes: Vec<(f64, f64)>,
    /// RMS residual of each window fit.
    pub residuals: Vec<f64>,
    /// Offset `c` of a fitted `ln t + c` correction, when one was applied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_offset: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl ScalingEstimate {
    fn zero(quantity: &str, window_decades: f64) -> Self {
        Self {
            quantity: quantity.into(),
            lower: 0.0,
            upper: 0.0,
            window_decades,
            window_slopes: vec![],
            residuals: vec![],
            log_offset: None,
            config_hash: None,
        }
    }

    pub fn gap(&self) -> f64 {
        self.upper - self.lower
    }

    /// Slopes scaled by `s`; negative `s` swaps the envelope ends.
    fn rescaled(mut self, s: f64, quantity: &str) -> Self {
        let (a, b) = (self.lower * s, self.upper * s);
        self.lower = a.min(b);
        self.upper = a.max(b);
        self.window_slopes.iter_mut().for_each(|w| w.1 *= s);
        self.residuals.iter_mut().for_each(|r| *r *= s.abs());
        self.quantity = quantity.into();
        self
    }

    pub fn slopes_csv(&self) -> String {
        let mut out = String::from("t_center,slope,residual,window_decades\n");
        for ((t, s), r) in self.window_slopes.iter().zip(&self.residuals) {
            out.push_str(&format!("{t:e},{s:e},{r:e},{}\n", self.window_decades));
        }
        out
    }
}

fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let rms = (x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - my - slope * (a - mx)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    (slope, rms)
}

/// Sliding-window least-squares slopes of `ln value` against `ln t`.
///
/// A window starts at every grid point and covers `window_decades` of `t`;
/// only windows that fit entirely inside the series and hold at least three
/// points are used.
pub fn slope_envelope(
    series: &TimeAverageSeries,
    window_decades: f64,
) -> Result<ScalingEstimate, ScalingError> {
    if !(window_decades > 0.0 && window_decades.is_finite()) {
        return Err(ScalingError::InvalidWindow(window_decades));
    }
    if let Some((index, &value)) = series.values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(ScalingError::NonPositive { index, value });
    }
    let lt: Vec<f64> = series.times.iter().map(|t| t.log10()).collect();
    let lv: Vec<f64> = series.values.iter().map(|v| v.ln()).collect();
    let last = match lt.last() {
        Some(&l) => l,
        None => return Err(ScalingError::TooShort("empty series".into())),
    };
    let mut window_slopes = Vec::new();
    let mut residuals = Vec::new();
    for i in 0..lt.len() {
        let end = lt[i] + window_decades;
        if end > last + DECADE_TOL {
            break;
        }
        let j = lt.partition_point(|&x| x <= end + DECADE_TOL);
        if j - i < MIN_WINDOW_POINTS {
            continue;
        }
        let x: Vec<f64> = lt[i..j].iter().map(|l| l * std::f64::consts::LN_10).collect();
        let (slope, rms) = fit_line(&x, &lv[i..j]);
        window_slopes.push((10f64.powf(lt[i] + window_decades / 2.0), slope));
        residuals.push(rms);
    }
    if window_slopes.is_empty() {
        return Err(ScalingError::TooShort(format!(
            "no complete {window_decades}-decade window with {MIN_WINDOW_POINTS} points"
        )));
    }
    let lower = window_slopes.iter().map(|w| w.1).fold(f64::INFINITY, f64::min);
    let upper = window_slopes.iter().map(|w| w.1).fold(f64::NEG_INFINITY, f64::max);
    Ok(ScalingEstimate {
        quantity: series.quantity.to_string(),
        lower,
        upper,
        window_decades,
        window_slopes,
        residuals,
        log_offset: None,
        config_hash: None,
    })
}

// ---------------------------------------------------------------------------
// Correlation dimension from dynamics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct D2Options {
    pub window_decades: f64,
    /// Divide by `ln t + c` with `c` fitted globally before taking slopes.
    pub log_correction: bool,
    /// Subtract the Wiener floor before taking slopes.
    pub subtract_floor: bool,
}

impl D2Options {
    pub fn plain(window_decades: f64) -> Self {
        Self {
            window_decades,
            log_correction: false,
            subtract_floor: false,
        }
    }
}

/// Offset `c` minimizing the residual of a straight-line fit of
/// `ln(v / (ln t + c))` against `ln t`. `None` means no correction fits
/// better than any finite offset.
pub fn fit_log_offset(times: &[f64], values: &[f64]) -> Option<f64> {
    let x: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let sse = |c: Option<f64>| {
        let yc: Vec<f64> = match c {
            Some(c) => y.iter().zip(&x).map(|(v, l)| v - (l + c).ln()).collect(),
            None => y.clone(),
        };
        let (_, rms) = fit_line(&x, &yc);
        rms
    };
    let c_min = -x[0] + 0.05;
    let mut best = (sse(None), None);
    let steps = 4000;
    for i in 0..=steps {
        let c = c_min + (40.0 - c_min) * i as f64 / steps as f64;
        let e = sse(Some(c));
        if e < best.0 {
            best = (e, Some(c));
        }
    }
    best.1
}

/// D₂ proxies from a return-probability series: `(-upper_slope, -lower_slope)`.
pub fn d2_from_series(
    series: &TimeAverageSeries,
    wiener_floor: f64,
    opts: D2Options,
) -> Result<ScalingEstimate, ScalingError> {
    let mut work = series.clone();
    if opts.subtract_floor {
        work = work.map_values(|_, v| v - wiener_floor);
        let keep = work.values.iter().take_while(|v| **v > 0.0).count();
        work.times.truncate(keep);
        work.values.truncate(keep);
    }
    let mut offset = None;
    if opts.log_correction && work.len() >= MIN_WINDOW_POINTS {
        offset = fit_log_offset(&work.times, &work.values);
        if let Some(c) = offset {
            work = work.map_values(|t, v| v / (t.ln() + c));
        }
    }
    let mut est = slope_envelope(&work, opts.window_decades)?.rescaled(-1.0, "d2");
    est.log_offset = offset;
    Ok(est)
}

pub fn d2_estimate(
    es: &EigenSystem,
    xi: &StateVector,
    times: &[f64],
    opts: D2Options,
) -> Result<ScalingEstimate, ScalingError> {
    let mu = spectral_measure(es, xi)?;
    let series = return_probability_series(&mu, times, es.source_hash(), "xi")?;
    d2_from_series(&series, mu.wiener_limit(), opts)
}

// ---------------------------------------------------------------------------
// Transport exponents
// ---------------------------------------------------------------------------

/// Values below this count as no motion at all.
const FROZEN_MOMENT: f64 = 1e-12;

/// Envelope of `d ln⟨⟨|X|^q⟩⟩ / (q d ln t)` from a moment series.
pub fn beta_from_series(
    series: &TimeAverageSeries,
    q: f64,
    window_decades: f64,
) -> Result<ScalingEstimate, ScalingError> {
    if series.values.iter().all(|v| v.abs() < FROZEN_MOMENT) {
        return Ok(ScalingEstimate::zero(&format!("beta_q={q}"), window_decades));
    }
    Ok(slope_envelope(series, window_decades)?.rescaled(1.0 / q, &format!("beta_q={q}")))
}

pub fn beta_estimate(
    es: &EigenSystem,
    xi: &StateVector,
    q: f64,
    times: &[f64],
    window_decades: f64,
) -> Result<ScalingEstimate, ScalingError> {
    let series = moment_q(es, xi, times, q, "xi")?;
    beta_from_series(&series, q, window_decades)
}

// ---------------------------------------------------------------------------
// Correlation dimension from the measure
// ---------------------------------------------------------------------------

/// Slopes of `ln Σ_k w_k μ(B(λ_k, ε))` against `ln ε`. With `window_decades`
/// `None`, one fit over the whole `ε` range.
pub fn correlation_dimension_direct(
    measure: &SpectralMeasure,
    eps: &[f64],
    window_decades: Option<f64>,
) -> Result<ScalingEstimate, ScalingError> {
    if measure.is_empty() {
        return Err(ScalingError::EmptyMeasure);
    }
    if eps.len() < MIN_WINDOW_POINTS {
        return Err(ScalingError::InvalidEps(format!("need at least {MIN_WINDOW_POINTS} values")));
    }
    if measure.atoms().len() > 1 {
        let (lo, hi) = (measure.mean_spacing(), measure.diameter());
        if eps.iter().any(|&e| e < lo * (1.0 - 1e-9) || e > hi * (1.0 + 1e-9)) {
            return Err(ScalingError::InvalidEps(format!(
                "epsilon must lie in [{lo:e}, {hi:e}]"
            )));
        }
    }
    let values: Vec<f64> = eps.iter().map(|&e| measure.correlation_integral(e)).collect();
    let series = TimeAverageSeries::new(
        eps.to_vec(),
        values,
        Quantity::Expectation,
        "measure",
        "correlation_integral",
    )?;
    let width = window_decades.unwrap_or_else(|| (eps[eps.len() - 1] / eps[0]).log10());
    let mut est = slope_envelope(&series, width)?;
    est.quantity = "d2_direct".into();
    Ok(est)
}

// ---------------------------------------------------------------------------
// α(t) scans
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlphaFunction {
    /// `t^p`
    Power { p: f64 },
    /// `ln(1 + t)^p`
    LogPower { p: f64 },
    /// `ln(1 + ln(1 + t))`
    IteratedLog,
    /// Log-log interpolation of a table; undefined outside it.
    UserTable { times: Vec<f64>, values: Vec<f64> },
}

impl AlphaFunction {
    pub fn eval(&self, t: f64) -> Result<f64, ScalingError> {
        let v = match self {
            AlphaFunction::Power { p } => t.powf(*p),
            AlphaFunction::LogPower { p } => (1.0 + t).ln().powf(*p),
            AlphaFunction::IteratedLog => (1.0 + (1.0 + t).ln()).ln(),
            AlphaFunction::UserTable { times, values } => {
                if times.len() != values.len()
                    || times.len() < 2
                    || times.windows(2).any(|w| !(w[1] > w[0]))
                    || times[0] <= 0.0
                    || values.iter().any(|v| !(*v > 0.0))
                {
                    return Err(ScalingError::InvalidAlpha(
                        "table needs increasing positive times and positive values".into(),
                    ));
                }
                let n = times.len();
                if t < times[0] * (1.0 - 1e-12) || t > times[n - 1] * (1.0 + 1e-12) {
                    return Err(ScalingError::InvalidAlpha(format!("t = {t} outside the table")));
                }
                let i = times.partition_point(|&x| x <= t).clamp(1, n - 1);
                let (x0, x1) = (times[i - 1].ln(), times[i].ln());
                let (y0, y1) = (values[i - 1].ln(), values[i].ln());
                (y0 + (y1 - y0) * (t.ln() - x0) / (x1 - x0)).exp()
            }
        };
        if !v.is_finite() {
            return Err(ScalingError::InvalidAlpha(format!("non-finite value at t = {t}")));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaScan {
    pub sup_value: f64,
    pub argmax_t: f64,
    /// Running max over the last decade exceeds everything before it.
    pub growth_flag: bool,
}

pub fn alpha_scan(alpha: &AlphaFunction, series: &TimeAverageSeries) -> Result<AlphaScan, ScalingError> {
    let products: Vec<f64> = series
        .times
        .iter()
        .zip(&series.values)
        .map(|(&t, &v)| alpha.eval(t).map(|a| a * v))
        .collect::<Result<_, _>>()?;
    let Some(&t_end) = series.times.last() else {
        return Err(ScalingError::TooShort("empty series".into()));
    };
    if t_end / series.times[0] < 10.0 * (1.0 - 1e-12) {
        return Err(ScalingError::TooShort("alpha scan needs one decade".into()));
    }
    let (mut best, mut arg) = (f64::NEG_INFINITY, series.times[0]);
    let (mut before, mut last) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (&t, &p) in series.times.iter().zip(&products) {
        if p > best {
            best = p;
            arg = t;
        }
        if t > t_end / 10.0 * (1.0 + 1e-12) {
            last = last.max(p);
        } else {
            before = before.max(p);
        }
    }
    Ok(AlphaScan {
        sup_value: best,
        argmax_t: arg,
        growth_flag: last > before,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::TimeGrid;

    fn grid(lo: f64, hi: f64) -> Vec<f64> {
        TimeGrid::decades(lo, hi).unwrap().times()
    }

    /// `ln v` piecewise linear in `ln t`, slope `a` on odd decades and `b`
    /// on even ones.
    fn alternating(times: &[f64], odd: f64, even: f64) -> TimeAverageSeries {
        TimeAverageSeries::from_fn(times, |t| {
            let l = t.log10();
            let mut acc = 0.0;
            let mut d = 0.0;
            while d < l - 1e-12 {
                let step = (l - d).min(1.0);
                let s = if (d as i64) % 2 == 1 { odd } else { even };
                acc += s * step * std::f64::consts::LN_10;
                d += 1.0;
            }
            acc.exp()
        })
        .unwrap()
    }

    #[test]
    fn pure_power_law() {
        let s = TimeAverageSeries::from_fn(&grid(0.0, 3.0), |t| t.powf(-0.37)).unwrap();
        for w in WINDOW_SETTINGS {
            let e = slope_envelope(&s, w).unwrap();
            assert!((e.lower + 0.37).abs() < 1e-10 && (e.upper + 0.37).abs() < 1e-10);
            assert!(e.upper - e.lower <= 1e-10);
        }
    }

    #[test]
    fn constant_series() {
        let s = TimeAverageSeries::from_fn(&grid(0.0, 2.0), |_| 0.3).unwrap();
        let e = slope_envelope(&s, 0.5).unwrap();
        assert!(e.lower.abs() < 1e-12 && e.upper.abs() < 1e-12);
    }

    #[test]
    fn alternating_exponents() {
        let s = alternating(&grid(0.0, 6.0), -0.2, -0.8);
        for w in WINDOW_SETTINGS {
            let e = slope_envelope(&s, w).unwrap();
            assert!((e.lower + 0.8).abs() < 0.05, "{}", e.lower);
            assert!((e.upper + 0.2).abs() < 0.05, "{}", e.upper);
        }
    }

    #[test]
    fn errors() {
        let s = TimeAverageSeries::from_fn(&[1.0, 2.0, 3.0], |t| 1.0 - t).unwrap();
        assert!(matches!(slope_envelope(&s, 0.1), Err(ScalingError::NonPositive { .. })));
        let s = TimeAverageSeries::from_fn(&grid(0.0, 0.3), |t| t).unwrap();
        assert!(matches!(slope_envelope(&s, 0.5), Err(ScalingError::TooShort(_))));
        assert!(slope_envelope(&s, 0.0).is_err());
    }

    #[test]
    fn log_offset_recovers_exact_factor() {
        let ts = grid(1.0, 2.6);
        let vals: Vec<f64> = ts.iter().map(|t| (t.ln() + 3.0) / t).collect();
        let c = fit_log_offset(&ts, &vals).unwrap();
        assert!((c - 3.0).abs() < 0.02, "c = {c}");
        let pure: Vec<f64> = ts.iter().map(|t| t.powf(-0.5)).collect();
        let c = fit_log_offset(&ts, &pure);
        // a pure power law is matched without a finite offset, or by a huge one
        assert!(c.map_or(true, |c| c > 30.0));
    }

    #[test]
    fn correlation_dimension_examples() {
        let single = SpectralMeasure::from_parts(&[0.2], &[1.0]);
        let e = correlation_dimension_direct(&single, &[0.01, 0.1, 1.0], None).unwrap();
        assert!(e.lower.abs() < 1e-12);

        let m = 4096;
        let locs: Vec<f64> = (0..m).map(|i| (i as f64 + 0.5) / m as f64).collect();
        let mu = SpectralMeasure::from_parts(&locs, &vec![1.0 / m as f64; m]);
        let eps = TimeGrid::new(10.0 / m as f64, 0.1, 32).unwrap().times();
        let e = correlation_dimension_direct(&mu, &eps, None).unwrap();
        assert!((e.lower - 1.0).abs() < 0.05 && (e.upper - 1.0).abs() < 0.05);
        assert!(correlation_dimension_direct(&mu, &[1e-6, 1e-3, 0.1], None).is_err());
    }

    #[test]
    fn alpha_functions() {
        assert_eq!(AlphaFunction::Power { p: 2.0 }.eval(3.0).unwrap(), 9.0);
        assert!((AlphaFunction::LogPower { p: 1.0 }.eval(std::f64::consts::E - 1.0).unwrap() - 1.0).abs() < 1e-15);
        let table = AlphaFunction::UserTable {
            times: vec![1.0, 100.0],
            values: vec![1.0, 100.0],
        };
        assert!((table.eval(10.0).unwrap() - 10.0).abs() < 1e-12);
        assert!(table.eval(1000.0).is_err());
    }

    #[test]
    fn alpha_scan_examples() {
        let ts = grid(0.0, 3.0);
        let decaying = TimeAverageSeries::from_fn(&ts, |t| 1.0 / t).unwrap();
        let r = alpha_scan(&AlphaFunction::Power { p: 0.0 }, &decaying).unwrap();
        assert_eq!(r.argmax_t, 1.0);
        assert!(!r.growth_flag);

        let flat = TimeAverageSeries::from_fn(&ts, |_| 0.4).unwrap();
        let r = alpha_scan(&AlphaFunction::Power { p: 1.0 }, &flat).unwrap();
        assert!(r.growth_flag);
        assert!((r.sup_value - 400.0).abs() < 1e-9);

        let ac = TimeAverageSeries::from_fn(&ts, |t| (t.ln() + 3.0) / t).unwrap();
        assert!(!alpha_scan(&AlphaFunction::LogPower { p: 1.0 }, &ac).unwrap().growth_flag);
    }

    #[test]
    fn frozen_moments_give_zero_beta() {
        let s = TimeAverageSeries::from_fn(&grid(0.0, 2.0), |_| 0.0).unwrap();
        let e = beta_from_series(&s, 2.0, 1.0).unwrap();
        assert_eq!((e.lower, e.upper), (0.0, 0.0));
    }
}
