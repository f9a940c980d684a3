//! Atomic spectral measures `μ = Σ_k w_k δ_{λ_k}`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Eigenvalues closer than this are treated as one degenerate level.
pub const DEGENERACY_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("measure has no atoms")]
    Empty,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralMeasure {
    atoms: Vec<Atom>,
    /// Index ranges of atoms whose locations chain within [`DEGENERACY_TOL`].
    groups: Vec<Vec<usize>>,
}

/// Result of the sliding-window Lipschitz sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    /// `max μ(I)/ℓ(I)` over intervals with `ℓ_min <= ℓ(I) <= 1`.
    pub constant: f64,
    pub resolution: f64,
    pub interval: (f64, f64),
    pub mass: f64,
}

impl SpectralMeasure {
    /// Atoms are sorted by location; negative or non-finite weights panic.
    pub fn new(mut atoms: Vec<Atom>) -> Self {
        assert!(
            atoms.iter().all(|a| a.weight >= 0.0 && a.weight.is_finite() && a.location.is_finite()),
            "atoms need finite locations and nonnegative weights"
        );
        atoms.sort_by(|a, b| a.location.total_cmp(&b.location));
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for i in 0..atoms.len() {
            match groups.last_mut() {
                Some(g) if atoms[i].location - atoms[i - 1].location <= DEGENERACY_TOL => g.push(i),
                _ => groups.push(vec![i]),
            }
        }
        Self { atoms, groups }
    }

    pub fn from_parts(locations: &[f64], weights: &[f64]) -> Self {
        assert_eq!(locations.len(), weights.len());
        Self::new(
            locations
                .iter()
                .zip(weights)
                .map(|(&location, &weight)| Atom { location, weight })
                .collect(),
        )
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn locations(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.location).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.weight).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    /// Total weight of each degeneracy group.
    pub fn group_weights(&self) -> Vec<f64> {
        self.groups
            .iter()
            .map(|g| g.iter().map(|&i| self.atoms[i].weight).sum())
            .collect()
    }

    /// `lim_{t→∞} (1/t)∫_0^t |⟨ξ, e^{-isT}ξ⟩|² ds = Σ_groups (Σ_{k∈group} w_k)²`.
    pub fn wiener_limit(&self) -> f64 {
        self.group_weights().iter().map(|w| w * w).sum()
    }

    /// `μ({λ})` for the degeneracy group containing `lambda`.
    pub fn point_mass(&self, lambda: f64) -> f64 {
        self.groups
            .iter()
            .find(|g| {
                g.iter()
                    .any(|&i| (self.atoms[i].location - lambda).abs() <= DEGENERACY_TOL)
            })
            .map_or(0.0, |g| g.iter().map(|&i| self.atoms[i].weight).sum())
    }

    /// `μ([lo, hi])`.
    pub fn mass_in(&self, lo: f64, hi: f64) -> f64 {
        let a = self.atoms.partition_point(|x| x.location < lo);
        let b = self.atoms.partition_point(|x| x.location <= hi);
        self.atoms[a..b.max(a)].iter().map(|x| x.weight).sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        assert!(s >= 0.0);
        Self {
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    location: a.location,
                    weight: a.weight * s,
                })
                .collect(),
            groups: self.groups.clone(),
        }
    }

    /// Smallest distance between distinct degeneracy groups.
    pub fn min_gap(&self) -> Option<f64> {
        self.groups
            .windows(2)
            .map(|w| self.atoms[w[1][0]].location - self.atoms[*w[0].last().unwrap()].location)
            .min_by(f64::total_cmp)
    }

    /// `max λ - min λ`.
    pub fn diameter(&self) -> f64 {
        match (self.atoms.first(), self.atoms.last()) {
            (Some(a), Some(b)) => b.location - a.location,
            _ => 0.0,
        }
    }

    pub fn mean_spacing(&self) -> f64 {
        if self.atoms.len() < 2 {
            0.0
        } else {
            self.diameter() / (self.atoms.len() - 1) as f64
        }
    }

    /// Histogram density on `bins` equal cells of `[lo, hi]`.
    pub fn coarse_density(&self, lo: f64, hi: f64, bins: usize) -> Vec<f64> {
        let width = (hi - lo) / bins as f64;
        let mut h = vec![0.0; bins];
        for a in &self.atoms {
            if a.location < lo || a.location > hi {
                continue;
            }
            let b = (((a.location - lo) / width) as usize).min(bins - 1);
            h[b] += a.weight;
        }
        h.iter_mut().for_each(|x| *x /= width);
        h
    }

    /// Sliding-window sweep for `max μ(I)/ℓ(I)` over intervals with
    /// `resolution <= ℓ(I) <= 1`. An interval covering atoms `i..=j` costs
    /// at least `λ_j - λ_i`, so the optimum for that atom set is
    /// `W(i..=j) / max(resolution, λ_j - λ_i)`.
    pub fn lipschitz_constant(&self, resolution: f64) -> Result<LipschitzReport, MeasureError> {
        if self.atoms.is_empty() {
            return Err(MeasureError::Empty);
        }
        if !(resolution > 0.0 && resolution <= 1.0) {
            return Err(MeasureError::InvalidParameter(format!(
                "resolution must lie in (0, 1], got {resolution}"
            )));
        }
        let mut best = LipschitzReport {
            constant: 0.0,
            resolution,
            interval: (self.atoms[0].location, self.atoms[0].location + resolution),
            mass: 0.0,
        };
        for i in 0..self.atoms.len() {
            let start = self.atoms[i].location;
            let mut mass = 0.0;
            for a in &self.atoms[i..] {
                let span = a.location - start;
                if span > 1.0 {
                    break;
                }
                mass += a.weight;
                let len = span.max(resolution);
                let ratio = mass / len;
                if ratio > best.constant {
                    best = LipschitzReport {
                        constant: ratio,
                        resolution,
                        interval: (start, start + len),
                        mass,
                    };
                }
            }
        }
        Ok(best)
    }

    /// `Σ_k w_k μ(B(λ_k, ε))` with open balls.
    pub fn correlation_integral(&self, eps: f64) -> f64 {
        let mut prefix = Vec::with_capacity(self.atoms.len() + 1);
        prefix.push(0.0);
        for a in &self.atoms {
            prefix.push(prefix.last().unwrap() + a.weight);
        }
        self.atoms
            .iter()
            .map(|a| {
                let lo = self.atoms.partition_point(|x| x.location <= a.location - eps);
                let hi = self.atoms.partition_point(|x| x.location < a.location + eps);
                a.weight * (prefix[hi] - prefix[lo])
            })
            .sum()
    }
}
