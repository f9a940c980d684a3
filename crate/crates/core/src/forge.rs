//! Operator constructors: free hopping, the Anderson ensemble, sparse
//! barrier potentials and the `V_k` approximants of a continuum potential.

use serde::{Deserialize, Serialize};

use crate::operator::{ContinuumSchrodinger, ForgeError, JacobiOperator, Provenance};
use crate::rng;

/// The `v ≡ 0` Jacobi matrix on `-N..=N`.
pub fn build_free_laplacian(half_width: usize) -> Result<JacobiOperator, ForgeError> {
    JacobiOperator::with_provenance(
        half_width,
        vec![0.0; 2 * half_width + 1],
        0.0,
        Provenance::new("free"),
    )
}

/// Single-site distribution ρ of the i.i.d. Anderson potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Distribution {
    /// Uniform on `[-b, b]`.
    Uniform,
    /// Finitely supported: `values[i]` with probability `probabilities[i]`.
    Discrete {
        values: Vec<f64>,
        probabilities: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AndersonSpec {
    pub half_width: usize,
    pub disorder_bound: f64,
    pub distribution: Distribution,
    pub seed: u64,
}

impl AndersonSpec {
    pub fn uniform(half_width: usize, disorder_bound: f64, seed: u64) -> Self {
        Self {
            half_width,
            disorder_bound,
            distribution: Distribution::Uniform,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), ForgeError> {
        let b = self.disorder_bound;
        if self.half_width == 0 {
            return Err(ForgeError::InvalidParameter("half_width must be >= 1".into()));
        }
        if !(b >= 0.0 && b.is_finite()) {
            return Err(ForgeError::InvalidDistribution(format!(
                "disorder bound must be finite and >= 0, got {b}"
            )));
        }
        if let Distribution::Discrete {
            values,
            probabilities,
        } = &self.distribution
        {
            if values.is_empty() || values.len() != probabilities.len() {
                return Err(ForgeError::InvalidDistribution(
                    "values and probabilities must be non-empty and of equal length".into(),
                ));
            }
            if probabilities.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
                return Err(ForgeError::InvalidDistribution(
                    "probabilities must be finite and nonnegative".into(),
                ));
            }
            let total: f64 = probabilities.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(ForgeError::InvalidDistribution(format!(
                    "probabilities sum to {total}, not 1"
                )));
            }
            if let Some(v) = values.iter().find(|v| !(v.abs() <= b)) {
                return Err(ForgeError::InvalidDistribution(format!(
                    "support point {v} lies outside [-{b}, {b}]"
                )));
            }
        }
        Ok(())
    }

    /// Endpoints of the support of ρ.
    pub fn support_hull(&self) -> (f64, f64) {
        match &self.distribution {
            Distribution::Uniform => (-self.disorder_bound, self.disorder_bound),
            Distribution::Discrete { values, .. } => values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                }),
        }
    }
}

/// Realization 0 of the ensemble.
pub fn sample_anderson(spec: &AndersonSpec) -> Result<JacobiOperator, ForgeError> {
    sample_anderson_realization(spec, 0)
}

/// Realization `index` of the ensemble. Each realization draws from its own
/// substream, so the result depends only on `(seed, index, N)`.
pub fn sample_anderson_realization(
    spec: &AndersonSpec,
    index: u64,
) -> Result<JacobiOperator, ForgeError> {
    let potential = anderson_potential(spec, index)?;
    JacobiOperator::with_provenance(
        spec.half_width,
        potential,
        spec.disorder_bound,
        Provenance::seeded("anderson", spec.seed, index),
    )
}

/// The i.i.d. site values `ω_j`, `j = -N..=N`, of realization `index`.
pub fn anderson_potential(spec: &AndersonSpec, index: u64) -> Result<Vec<f64>, ForgeError> {
    spec.validate()?;
    let n = 2 * spec.half_width + 1;
    let b = spec.disorder_bound;
    let mut stream = rng::substream(spec.seed, index);
    let potential = match &spec.distribution {
        Distribution::Uniform => (0..n).map(|_| rng::uniform(&mut stream, -b, b)).collect(),
        Distribution::Discrete {
            values,
            probabilities,
        } => {
            let mut cumulative = Vec::with_capacity(probabilities.len());
            let mut acc = 0.0;
            for p in probabilities {
                acc += p;
                cumulative.push(acc);
            }
            (0..n)
                .map(|_| {
                    let u = rng::uniform(&mut stream, 0.0, 1.0);
                    let i = cumulative
                        .iter()
                        .position(|&c| u < c)
                        .unwrap_or(values.len() - 1);
                    values[i]
                })
                .collect()
        }
    };
    Ok(potential)
}

/// Jacobi potential with barriers of `height` at the sites `±2^m`,
/// `m >= first_exponent`, inside the window.
pub fn sparse_barriers(
    half_width: usize,
    height: f64,
    first_exponent: u32,
) -> Result<JacobiOperator, ForgeError> {
    let mut potential = vec![0.0; 2 * half_width + 1];
    let mut m = first_exponent;
    while m < 63 && (1usize << m) <= half_width {
        let site = 1usize << m;
        potential[half_width + site] = height;
        potential[half_width - site] = height;
        m += 1;
    }
    JacobiOperator::with_provenance(
        half_width,
        potential,
        height.abs(),
        Provenance::new("sparse_barriers"),
    )
}

/// `V_k(x) = k/(k+1) χ_{B(0,k)}(x) V(x) - C / ((k+1)(|x|+1))` on the grid,
/// where `B(0,k)` is the open interval `(-k, k)`.
///
/// `|V_k| ≤ C` whenever `|V| ≤ C`, and `V_k ≤ 0` for `|x| ≥ k`.
pub fn vk_potential(v: &[f64], grid: &[f64], cap: f64, k: u32) -> Result<Vec<f64>, ForgeError> {
    if v.len() != grid.len() {
        return Err(ForgeError::DimensionMismatch(grid.len(), v.len()));
    }
    if k == 0 {
        return Err(ForgeError::InvalidParameter("k must be >= 1".into()));
    }
    if !(cap > 0.0 && cap.is_finite()) {
        return Err(ForgeError::InvalidParameter("cap must be positive".into()));
    }
    if let Some((index, &value)) = v.iter().enumerate().find(|(_, x)| !(x.abs() <= cap)) {
        return Err(ForgeError::PotentialBound {
            index,
            value,
            bound: cap,
        });
    }
    let kf = k as f64;
    Ok(v
        .iter()
        .zip(grid)
        .map(|(&vx, &x)| {
            let inside = if x.abs() < kf { vx } else { 0.0 };
            kf / (kf + 1.0) * inside - cap / ((kf + 1.0) * (x.abs() + 1.0))
        })
        .collect())
}

/// Continuum operator `-Δ + V_k` on `[-L, L]` with spacing `h`.
pub fn vk_operator(
    box_half_width: f64,
    spacing: f64,
    cap: f64,
    k: u32,
    v: impl Fn(f64) -> f64,
) -> Result<ContinuumSchrodinger, ForgeError> {
    let grid = ContinuumSchrodinger::grid_points(box_half_width, spacing)?;
    let samples: Vec<f64> = grid.iter().map(|&x| v(x)).collect();
    let vk = vk_potential(&samples, &grid, cap, k)?;
    ContinuumSchrodinger::with_provenance(
        box_half_width,
        spacing,
        vk,
        cap,
        Provenance::new(format!("vk:k={k}")),
    )
}
