//! Time grids and time-averaged series.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::observables::ObservableError;

pub const DEFAULT_POINTS_PER_DECADE: usize = 32;

/// Log-spaced times `10^{lo}, …, 10^{hi}` with a fixed number of points per
/// decade. Endpoints are included exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub points_per_decade: usize,
}

impl TimeGrid {
    pub fn new(t_min: f64, t_max: f64, points_per_decade: usize) -> Result<Self, ObservableError> {
        if !(t_min > 0.0 && t_max > t_min && t_max.is_finite()) {
            return Err(ObservableError::InvalidGrid(format!(
                "need 0 < t_min < t_max, got [{t_min}, {t_max}]"
            )));
        }
        if points_per_decade < 2 {
            return Err(ObservableError::InvalidGrid(
                "need at least 2 points per decade".into(),
            ));
        }
        Ok(Self {
            t_min,
            t_max,
            points_per_decade,
        })
    }

    pub fn decades(lo: f64, hi: f64) -> Result<Self, ObservableError> {
        Self::new(10f64.powf(lo), 10f64.powf(hi), DEFAULT_POINTS_PER_DECADE)
    }

    pub fn span_decades(&self) -> f64 {
        (self.t_max / self.t_min).log10()
    }

    pub fn times(&self) -> Vec<f64> {
        let span = self.span_decades();
        let n = ((span * self.points_per_decade as f64).round() as usize).max(1);
        let (a, b) = (self.t_min.log10(), self.t_max.log10());
        let mut ts: Vec<f64> = (0..=n)
            .map(|i| 10f64.powf(a + (b - a) * i as f64 / n as f64))
            .collect();
        ts[0] = self.t_min;
        ts[n] = self.t_max;
        ts
    }

    /// Same spacing, clipped to `t <= cap`. Returns `None` when nothing is left.
    pub fn clipped(&self, cap: f64) -> Option<Self> {
        if cap <= self.t_min {
            return None;
        }
        Some(Self {
            t_max: self.t_max.min(cap),
            ..self.clone()
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Quantity {
    Expectation,
    ReturnProb,
    MomentQ { q: f64 },
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantity::Expectation => f.write_str("expectation"),
            Quantity::ReturnProb => f.write_str("return_prob"),
            Quantity::MomentQ { q } => write!(f, "moment_q={q}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeAverageSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub quantity: Quantity,
    pub operator_hash: String,
    pub xi_label: String,
}

impl TimeAverageSeries {
    pub fn new(
        times: Vec<f64>,
        values: Vec<f64>,
        quantity: Quantity,
        operator_hash: impl Into<String>,
        xi_label: impl Into<String>,
    ) -> Result<Self, ObservableError> {
        if times.len() != values.len() {
            return Err(ObservableError::InvalidGrid(format!(
                "{} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.iter().any(|&t| !(t > 0.0 && t.is_finite()))
            || times.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(ObservableError::InvalidGrid(
                "times must be positive and strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ObservableError::NonFinite);
        }
        Ok(Self {
            times,
            values,
            quantity,
            operator_hash: operator_hash.into(),
            xi_label: xi_label.into(),
        })
    }

    /// Synthetic series from a closure, tagged as an expectation.
    pub fn from_fn(times: &[f64], f: impl Fn(f64) -> f64) -> Result<Self, ObservableError> {
        Self::new(
            times.to_vec(),
            times.iter().map(|&t| f(t)).collect(),
            Quantity::Expectation,
            "synthetic",
            "synthetic",
        )
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn map_values(&self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            values: self
                .times
                .iter()
                .zip(&self.values)
                .map(|(&t, &v)| f(t, v))
                .collect(),
            ..self.clone()
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,value,quantity,operator_hash,xi_label")?;
        for (t, v) in self.times.iter().zip(&self.values) {
            writeln!(
                w,
                "{t:e},{v:e},{},{},{}",
                self.quantity, self.operator_hash, self.xi_label
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv is ascii")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_has_requested_density_and_exact_ends() {
        let g = TimeGrid::decades(1.0, 3.0).unwrap();
        let ts = g.times();
        assert_eq!(ts.len(), 65);
        assert_eq!(ts[0], 10.0);
        assert_eq!(*ts.last().unwrap(), 1000.0);
        let r = ts[1] / ts[0];
        for w in ts.windows(2) {
            assert!((w[1] / w[0] - r).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_rejects_bad_ranges() {
        assert!(TimeGrid::new(0.0, 10.0, 32).is_err());
        assert!(TimeGrid::new(10.0, 10.0, 32).is_err());
        assert!(TimeGrid::new(1.0, 10.0, 1).is_err());
    }

    #[test]
    fn clipping() {
        let g = TimeGrid::new(1.0, 1000.0, 32).unwrap();
        assert_eq!(g.clipped(100.0).unwrap().t_max, 100.0);
        assert!(g.clipped(0.5).is_none());
    }

    #[test]
    fn series_validation_and_csv() {
        assert!(TimeAverageSeries::from_fn(&[1.0, 1.0], |_| 1.0).is_err());
        assert!(TimeAverageSeries::from_fn(&[1.0, 2.0], |_| f64::NAN).is_err());
        let s = TimeAverageSeries::new(
            vec![1.0, 2.0],
            vec![0.5, 0.25],
            Quantity::MomentQ { q: 2.0 },
            "abc",
            "e0",
        )
        .unwrap();
        let csv = s.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,value,quantity,operator_hash,xi_label");
        assert_eq!(lines[1], "1e0,5e-1,moment_q=2,abc,e0");
        assert_eq!(lines.len(), 3);
    }
}
