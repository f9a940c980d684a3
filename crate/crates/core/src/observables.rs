//! Expectation values, their Cesàro time averages, return probabilities,
//! position moments and the trace-norm decay bound.
//!
//! With `c_k = ⟨ψ_k, ξ⟩` the time average of `e^{-is(λ_k - λ_j)}` over
//! `[0, t]` is `φ(t(λ_k - λ_j))`, `φ(x) = (1 - e^{-ix})/(ix)`. Every
//! closed form below is a Hermitian double sum against `φ`; pairs `(j, k)`
//! and `(k, j)` are conjugate, so only `j < k` is visited.

use faer::{c64, Mat, Side};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evolve::{EigenSystem, EvolveError, StateVector};
use crate::measure::{LipschitzReport, MeasureError, SpectralMeasure};
use crate::operator::{Basis, HERMITIAN_TOL};
use crate::par;
use crate::rng;
use crate::series::{Quantity, TimeAverageSeries, TimeGrid};
use crate::tridiag::Tridiagonal;

/// Coefficients with `|c_k|² ≤ PRUNE * ‖ξ‖²` are dropped from the double sums.
const PRUNE: f64 = 1e-28;
/// Singular values below `SVD_CUTOFF * σ_max` are discarded.
const SVD_CUTOFF: f64 = 1e-14;
pub const MIN_QUADRATURE_POINTS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObservableError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("closed-form time average needs a positive observable")]
    NotPositive,
    #[error("observable is zero")]
    ZeroObservable,
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("non-finite value")]
    NonFinite,
    #[error("basis has no site labels")]
    NoSiteLabels,
    #[error("quadrature needs at least {MIN_QUADRATURE_POINTS} points, got {0}")]
    TooFewPoints(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("spectral measure has no atoms")]
    EmptyMeasure,
    #[error(transparent)]
    Evolve(#[from] EvolveError),
}

impl From<MeasureError> for ObservableError {
    fn from(e: MeasureError) -> Self {
        match e {
            MeasureError::Empty => ObservableError::EmptyMeasure,
            MeasureError::InvalidParameter(s) => ObservableError::InvalidParameter(s),
        }
    }
}

/// `φ(x) = (1 - e^{-ix})/(ix) = sin x / x - i (1 - cos x)/x`, `φ(0) = 1`.
pub fn phi(x: f64) -> c64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        c64::new(1.0 - x2 / 6.0, -x / 2.0 + x * x2 / 24.0)
    } else {
        let (s, c) = x.sin_cos();
        c64::new(s / x, -(1.0 - c) / x)
    }
}

// ---------------------------------------------------------------------------
// Compact observables
// ---------------------------------------------------------------------------

/// Finite-rank operator `A = Σ_i σ_i |u_i⟩⟨v_i|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactObservable {
    dim: usize,
    singular_values: Vec<f64>,
    #[serde(with = "crate::cser::vec_vec")]
    left: Vec<Vec<c64>>,
    #[serde(with = "crate::cser::vec_vec")]
    right: Vec<Vec<c64>>,
    positive: bool,
}

impl CompactObservable {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            singular_values: vec![],
            left: vec![],
            right: vec![],
            positive: true,
        }
    }

    /// Orthogonal projector onto `span(ξ)`.
    pub fn projector(xi: &StateVector) -> Result<Self, ObservableError> {
        let u = xi.normalized()?.amplitudes().to_vec();
        Ok(Self {
            dim: u.len(),
            singular_values: vec![1.0],
            left: vec![u.clone()],
            right: vec![u],
            positive: true,
        })
    }

    /// `|e_i⟩⟨e_i|`.
    pub fn basis_projector(dim: usize, i: usize) -> Result<Self, ObservableError> {
        let xi = StateVector::basis_vector(Basis::Index { dim }, i)?;
        Self::projector(&xi)
    }

    /// From a row-major dense matrix. Hermitian input is diagonalized, so
    /// positivity is detected exactly; other input goes through the SVD.
    pub fn from_dense(dim: usize, entries: &[c64]) -> Result<Self, ObservableError> {
        if entries.len() != dim * dim {
            return Err(ObservableError::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        if entries.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(ObservableError::NonFinite);
        }
        let m = Mat::<c64>::from_fn(dim, dim, |i, j| entries[i * dim + j]);
        let hermitian = (0..dim).all(|i| {
            (i..dim).all(|j| (m[(i, j)] - m[(j, i)].conj()).norm() <= HERMITIAN_TOL)
        });
        let col = |u: faer::MatRef<'_, c64>, k: usize| (0..dim).map(|i| u[(i, k)]).collect::<Vec<_>>();
        let mut triples: Vec<(f64, Vec<c64>, Vec<c64>)> = Vec::new();
        let positive;
        if hermitian {
            let evd = m
                .self_adjoint_eigen(Side::Lower)
                .map_err(|_| EvolveError::NonConvergence)?;
            let s = evd.S().column_vector();
            let lams: Vec<f64> = (0..dim).map(|k| s[k].re).collect();
            let scale = lams.iter().fold(0.0f64, |a, l| a.max(l.abs()));
            positive = lams.iter().all(|&l| l >= -HERMITIAN_TOL * scale.max(1.0));
            for (k, &l) in lams.iter().enumerate() {
                let v = col(evd.U(), k);
                let u = if l < 0.0 { v.iter().map(|z| -z).collect() } else { v.clone() };
                triples.push((l.abs(), u, v));
            }
        } else {
            let svd = m.svd().map_err(|_| EvolveError::NonConvergence)?;
            let s = svd.S().column_vector();
            positive = false;
            for k in 0..dim {
                triples.push((s[k].re, col(svd.U(), k), col(svd.V(), k)));
            }
        }
        triples.sort_by(|a, b| b.0.total_cmp(&a.0));
        let top = triples.first().map_or(0.0, |t| t.0);
        triples.retain(|t| t.0 > SVD_CUTOFF * top && t.0 > 0.0);
        let mut out = Self::zero(dim);
        out.positive = positive;
        for (s, u, v) in triples {
            out.singular_values.push(s);
            out.left.push(u);
            out.right.push(v);
        }
        Ok(out)
    }

    /// Random positive operator of the given rank, supported on the basis
    /// indices `support` (all of them when `None`). Singular values are
    /// uniform on `[0.5, 1]`.
    pub fn random_positive(
        dim: usize,
        rank: usize,
        support: Option<std::ops::Range<usize>>,
        seed: u64,
        realization: u64,
    ) -> Result<Self, ObservableError> {
        let support = support.unwrap_or(0..dim);
        if support.end > dim || support.len() < rank {
            return Err(ObservableError::InvalidParameter(format!(
                "rank {rank} does not fit support {support:?} in dimension {dim}"
            )));
        }
        let mut r: ChaCha8Rng = rng::substream(seed, realization);
        let mut basis: Vec<Vec<c64>> = Vec::with_capacity(rank);
        while basis.len() < rank {
            let mut v = vec![c64::new(0.0, 0.0); dim];
            for z in &mut v[support.clone()] {
                *z = c64::new(rng::normal(&mut r), rng::normal(&mut r));
            }
            // two Gram-Schmidt passes
            for _ in 0..2 {
                for b in &basis {
                    let p: c64 = b.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
                    v.iter_mut().zip(b).for_each(|(y, x)| *y -= p * x);
                }
            }
            let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if n > 1e-8 {
                v.iter_mut().for_each(|z| *z /= n);
                basis.push(v);
            }
        }
        let mut sv: Vec<f64> = (0..rank).map(|_| rng::uniform(&mut r, 0.5, 1.0)).collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        Ok(Self {
            dim,
            singular_values: sv,
            left: basis.clone(),
            right: basis,
            positive: true,
        })
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        if s == 0.0 {
            return Self::zero(self.dim);
        }
        out.singular_values.iter_mut().for_each(|x| *x *= s.abs());
        if s < 0.0 {
            out.left.iter_mut().for_each(|u| u.iter_mut().for_each(|z| *z = -*z));
            out.positive = false;
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn is_positive(&self) -> bool {
        self.positive
    }

    pub fn is_zero(&self) -> bool {
        self.singular_values.is_empty()
    }

    /// `‖A‖₁ = Σ σ_i`.
    pub fn trace_norm(&self) -> f64 {
        self.singular_values.iter().sum()
    }

    pub fn operator_norm(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    pub fn apply(&self, x: &[c64]) -> Vec<c64> {
        let mut out = vec![c64::new(0.0, 0.0); self.dim];
        for ((s, u), v) in self.singular_values.iter().zip(&self.left).zip(&self.right) {
            let p: c64 = v.iter().zip(x).map(|(a, b)| a.conj() * b).sum::<c64>() * *s;
            out.iter_mut().zip(u).for_each(|(o, a)| *o += p * a);
        }
        out
    }

    /// Row-major dense matrix.
    pub fn to_dense(&self) -> Vec<c64> {
        let n = self.dim;
        let mut m = vec![c64::new(0.0, 0.0); n * n];
        for ((s, u), v) in self.singular_values.iter().zip(&self.left).zip(&self.right) {
            for i in 0..n {
                for j in 0..n {
                    m[i * n + j] += u[i] * v[j].conj() * *s;
                }
            }
        }
        m
    }

    fn check_dim(&self, n: usize) -> Result<(), ObservableError> {
        if self.dim != n {
            return Err(ObservableError::DimensionMismatch {
                expected: self.dim,
                found: n,
            });
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Eigenbasis factors
// ---------------------------------------------------------------------------

/// `⟨ξ(s), Aξ(s)⟩ = Σ_i Σ_{j,k} a_{ij} b_{ik} e^{-is(λ_k - λ_j)}` with
/// `a_{ij} = σ_i conj(c_j) ⟨ψ_j, u_i⟩` and `b_{ik} = conj(⟨ψ_k, v_i⟩) c_k`,
/// restricted to the active (unpruned) indices.
struct Factors {
    lambdas: Vec<f64>,
    a: Vec<Vec<c64>>,
    b: Vec<Vec<c64>>,
}

impl Factors {
    fn new(op: &CompactObservable, es: &EigenSystem, xi: &StateVector) -> Result<Self, ObservableError> {
        op.check_dim(xi.dim())?;
        let c = es.coefficients(xi)?;
        let norm2: f64 = c.iter().map(|z| z.norm_sqr()).sum();
        let active: Vec<usize> = (0..c.len())
            .filter(|&k| c[k].norm_sqr() > PRUNE * norm2)
            .collect();
        let lambdas = active.iter().map(|&k| es.eigenvalues()[k]).collect();
        let mut a = Vec::with_capacity(op.rank());
        let mut b = Vec::with_capacity(op.rank());
        for ((s, u), v) in op.singular_values.iter().zip(&op.left).zip(&op.right) {
            let pu = es.coefficients_of(u);
            let pv = es.coefficients_of(v);
            a.push(active.iter().map(|&j| c[j].conj() * pu[j] * *s).collect());
            b.push(active.iter().map(|&k| pv[k].conj() * c[k]).collect());
        }
        Ok(Self { lambdas, a, b })
    }

    fn entry(&self, j: usize, k: usize) -> c64 {
        self.a.iter().zip(&self.b).map(|(a, b)| a[j] * b[k]).sum()
    }

    fn instantaneous(&self, s: f64) -> c64 {
        let phases: Vec<c64> = self.lambdas.iter().map(|&l| c64::cis(-s * l)).collect();
        self.a
            .iter()
            .zip(&self.b)
            .map(|(a, b)| {
                let left: c64 = a.iter().zip(&phases).map(|(x, p)| x * p.conj()).sum();
                let right: c64 = b.iter().zip(&phases).map(|(x, p)| x * p).sum();
                left * right
            })
            .sum()
    }
}

/// `Σ_{j,k} G_{jk} φ(t(λ_k - λ_j))` for Hermitian `G`, as
/// `Σ_j G_jj + 2 Re Σ_{j<k} G_jk φ(t(λ_k - λ_j))`.
fn hermitian_phi_sum(lambdas: &[f64], t: f64, g: impl Fn(usize, usize) -> c64) -> f64 {
    let n = lambdas.len();
    let mut diag = 0.0;
    let mut off = 0.0;
    for j in 0..n {
        diag += g(j, j).re;
        for k in j + 1..n {
            let z = g(j, k) * phi(t * (lambdas[k] - lambdas[j]));
            off += z.re;
        }
    }
    diag + 2.0 * off
}

// ---------------------------------------------------------------------------
// Expectations and time averages
// ---------------------------------------------------------------------------

/// `⟨ξ(t), Aξ(t)⟩`; real up to rounding when `A` is Hermitian.
pub fn expectation(
    op: &CompactObservable,
    es: &EigenSystem,
    xi: &StateVector,
    t: f64,
) -> Result<c64, ObservableError> {
    op.check_dim(xi.dim())?;
    let state = crate::evolve::evolve(es, xi, t)?;
    let ax = op.apply(state.amplitudes());
    Ok(state.amplitudes().iter().zip(&ax).map(|(a, b)| a.conj() * b).sum())
}

/// Exact `(1/t)∫_0^t ⟨ξ(s), Aξ(s)⟩ ds` for positive `A`, where the
/// absolute value in `⟨|A_ξ|⟩_t` is redundant.
pub fn time_average_closed(
    op: &CompactObservable,
    es: &EigenSystem,
    xi: &StateVector,
    t: f64,
) -> Result<f64, ObservableError> {
    if !op.is_positive() {
        return Err(ObservableError::NotPositive);
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(ObservableError::InvalidParameter(format!("t must be positive, got {t}")));
    }
    let f = Factors::new(op, es, xi)?;
    Ok(hermitian_phi_sum(&f.lambdas, t, |j, k| f.entry(j, k)))
}

/// Closed-form series over a grid; time points run in parallel.
pub fn time_average_series(
    op: &CompactObservable,
    es: &EigenSystem,
    xi: &StateVector,
    times: &[f64],
    xi_label: &str,
) -> Result<TimeAverageSeries, ObservableError> {
    if !op.is_positive() {
        return Err(ObservableError::NotPositive);
    }
    let f = Factors::new(op, es, xi)?;
    let values = par::map(times, |&t| hermitian_phi_sum(&f.lambdas, t, |j, k| f.entry(j, k)));
    TimeAverageSeries::new(
        times.to_vec(),
        values,
        Quantity::Expectation,
        es.source_hash(),
        xi_label,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    /// Composite trapezoid with `n_points` nodes.
    pub value: f64,
    /// `|T_h - T_{2h}| / 3`.
    pub error_estimate: f64,
    /// `T_h + (T_h - T_{2h}) / 3`.
    pub extrapolated: f64,
}

/// Trapezoid rule for `(1/t)∫_0^t |⟨ξ(s), Aξ(s)⟩| ds` on `n_points`
/// equispaced nodes, with a Richardson estimate from every other node.
pub fn time_average_quadrature(
    op: &CompactObservable,
    es: &EigenSystem,
    xi: &StateVector,
    t: f64,
    n_points: usize,
) -> Result<QuadratureResult, ObservableError> {
    if n_points < MIN_QUADRATURE_POINTS {
        return Err(ObservableError::TooFewPoints(n_points));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(ObservableError::InvalidParameter(format!("t must be positive, got {t}")));
    }
    let f = Factors::new(op, es, xi)?;
    // an odd node count keeps the coarse rule on the same endpoints
    let n = n_points | 1;
    let h = t / (n - 1) as f64;
    let samples = par::map_range(n, |i| f.instantaneous(i as f64 * h).norm());
    Ok(trapezoid_with_richardson(&samples, t))
}

fn trapezoid_with_richardson(samples: &[f64], t: f64) -> QuadratureResult {
    let n = samples.len();
    let rule = |step: usize| {
        let idx: Vec<usize> = (0..n).step_by(step).collect();
        let m = idx.len();
        let inner: f64 = idx[1..m - 1].iter().map(|&i| samples[i]).sum();
        (0.5 * (samples[0] + samples[n - 1]) + inner) / (m - 1) as f64
    };
    let fine = rule(1);
    let coarse = rule(2);
    let _ = t;
    QuadratureResult {
        value: fine,
        error_estimate: (fine - coarse).abs() / 3.0,
        extrapolated: fine + (fine - coarse) / 3.0,
    }
}

/// `⟨|A_ξ|⟩_t`: closed form for positive `A`, otherwise quadrature with
/// enough nodes to resolve the largest Bohr frequency.
pub fn time_average_abs(
    op: &CompactObservable,
    es: &EigenSystem,
    xi: &StateVector,
    t: f64,
) -> Result<f64, ObservableError> {
    if op.is_positive() {
        return time_average_closed(op, es, xi, t);
    }
    let lams = es.eigenvalues();
    let spread = lams.last().unwrap_or(&0.0) - lams.first().unwrap_or(&0.0);
    let n_points = ((64.0 * t * spread.max(1.0)) as usize).clamp(4096, 1 << 20);
    Ok(time_average_quadrature(op, es, xi, t, n_points)?.extrapolated)
}

// ---------------------------------------------------------------------------
// Return probability
// ---------------------------------------------------------------------------

fn pruned_atoms(measure: &SpectralMeasure) -> Vec<(f64, f64)> {
    let total = measure.total_mass();
    measure
        .atoms()
        .iter()
        .filter(|a| a.weight > PRUNE * total)
        .map(|a| (a.location, a.weight))
        .collect()
}

/// `(1/t)∫_0^t |⟨ξ, e^{-isT}ξ⟩|² ds = Σ_{j,k} w_j w_k sin(tΔ_{jk})/(tΔ_{jk})`.
pub fn return_probability_avg(measure: &SpectralMeasure, t: f64) -> f64 {
    let atoms = pruned_atoms(measure);
    let mut diag = 0.0;
    let mut off = 0.0;
    for (j, &(lj, wj)) in atoms.iter().enumerate() {
        diag += wj * wj;
        let mut row = 0.0;
        for &(lk, wk) in &atoms[j + 1..] {
            row += wk * sinc(t * (lk - lj));
        }
        off += wj * row;
    }
    diag + 2.0 * off
}

/// Nodes per Gauss-Legendre panel.
const GL_NODES: usize = 20;
/// Largest phase `spread · panel length` on one panel. With 20 nodes the
/// rule error for `e^{iωs}`, `|ω| <= spread`, is then at rounding level.
const PANEL_PHASE: f64 = 8.0;

/// Same quantity as [`return_probability_avg`] on a whole grid, integrating
/// `|Σ_j w_j e^{-isλ_j}|²` panel by panel: O(atoms · t_max · spread)
/// instead of O(atoms² · grid).
fn return_probability_panels(atoms: &[(f64, f64)], times: &[f64]) -> Vec<f64> {
    let (x, gw) = Tridiagonal::gauss_legendre(GL_NODES);
    let center = 0.5 * (atoms[0].0 + atoms[atoms.len() - 1].0);
    let spread = atoms[atoms.len() - 1].0 - atoms[0].0;
    let t_max = times.iter().copied().fold(0.0, f64::max);
    let len = if spread > 0.0 { (PANEL_PHASE / spread).min(t_max) } else { t_max };
    let integral = |a: f64, b: f64| -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        x.iter()
            .zip(&gw)
            .map(|(xi, wi)| {
                let s = mid + half * xi;
                let f: c64 = atoms
                    .iter()
                    .map(|&(l, w)| {
                        let (sin, cos) = (-(l - center) * s).sin_cos();
                        c64::new(w * cos, w * sin)
                    })
                    .sum();
                wi * half * f.norm_sqr()
            })
            .sum()
    };
    let n_panels = (t_max / len).floor() as usize;
    let pieces = par::map_range(n_panels, |p| integral(p as f64 * len, (p + 1) as f64 * len));
    let mut cumulative = Vec::with_capacity(n_panels + 1);
    let mut acc = 0.0;
    cumulative.push(0.0);
    for v in pieces {
        acc += v;
        cumulative.push(acc);
    }
    par::map(times, |&t| {
        let p = ((t / len).floor() as usize).min(n_panels);
        let start = p as f64 * len;
        let tail = if t > start { integral(start, t) } else { 0.0 };
        (cumulative[p] + tail) / t
    })
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

pub fn return_probability_series(
    measure: &SpectralMeasure,
    times: &[f64],
    operator_hash: &str,
    xi_label: &str,
) -> Result<TimeAverageSeries, ObservableError> {
    if measure.is_empty() {
        return Err(ObservableError::EmptyMeasure);
    }
    let atoms = pruned_atoms(measure);
    let m = atoms.len() as f64;
    let t_max = times.iter().copied().fold(0.0, f64::max);
    let spread = atoms.last().map_or(0.0, |a| a.0) - atoms.first().map_or(0.0, |a| a.0);
    let panels = (t_max * spread / PANEL_PHASE).ceil() + 1.0;
    let pair_cost = 0.5 * m * m * times.len() as f64;
    let panel_cost = m * GL_NODES as f64 * (panels + times.len() as f64);
    let values = if panel_cost < pair_cost {
        return_probability_panels(&atoms, times)
    } else {
        par::map(times, |&t| return_probability_avg(measure, t))
    };
    TimeAverageSeries::new(
        times.to_vec(),
        values,
        Quantity::ReturnProb,
        operator_hash,
        xi_label,
    )
}

// ---------------------------------------------------------------------------
// Position moments
// ---------------------------------------------------------------------------

fn site_weights(basis: &Basis, q: f64) -> Result<Vec<f64>, ObservableError> {
    if !(q > 0.0 && q.is_finite()) {
        return Err(ObservableError::InvalidParameter(format!("q must be positive, got {q}")));
    }
    let labels = basis.site_labels().ok_or(ObservableError::NoSiteLabels)?;
    Ok(labels.iter().map(|n| (n.unsigned_abs() as f64).powf(q)).collect())
}

/// `⟨⟨|X|^q⟩⟩_t = (1/t)∫_0^t Σ_n |n|^q |⟨e_n, ξ(s)⟩|² ds` for each `t`,
/// in closed form through the eigenbasis matrix of `|X|^q`.
pub fn moment_q(
    es: &EigenSystem,
    xi: &StateVector,
    times: &[f64],
    q: f64,
    xi_label: &str,
) -> Result<TimeAverageSeries, ObservableError> {
    let weights = site_weights(es.basis(), q)?;
    if xi.dim() != es.dim() {
        return Err(ObservableError::DimensionMismatch {
            expected: es.dim(),
            found: xi.dim(),
        });
    }
    let c = es.coefficients(xi)?;
    let norm2: f64 = c.iter().map(|z| z.norm_sqr()).sum();
    let active: Vec<usize> = (0..c.len())
        .filter(|&k| c[k].norm_sqr() > PRUNE * norm2)
        .collect();
    let m = active.len();
    let n = es.dim();
    // Ψ_active^* diag(|n|^q) Ψ_active, weighted by conj(c_j) c_k
    let psi = Mat::<c64>::from_fn(n, m, |i, a| es.component(i, active[a]) * weights[i].sqrt());
    let x = psi.adjoint() * &psi;
    let g = Mat::<c64>::from_fn(m, m, |a, b| c[active[a]].conj() * c[active[b]] * x[(a, b)]);
    let lambdas: Vec<f64> = active.iter().map(|&k| es.eigenvalues()[k]).collect();
    let values = par::map(times, |&t| hermitian_phi_sum(&lambdas, t, |j, k| g[(j, k)]));
    TimeAverageSeries::new(
        times.to_vec(),
        values,
        Quantity::MomentQ { q },
        es.source_hash(),
        xi_label,
    )
}

/// Trapezoid version of [`moment_q`] at a single time; used to cross-check
/// the closed form.
pub fn moment_q_quadrature(
    es: &EigenSystem,
    xi: &StateVector,
    t: f64,
    q: f64,
    n_points: usize,
) -> Result<QuadratureResult, ObservableError> {
    if n_points < MIN_QUADRATURE_POINTS {
        return Err(ObservableError::TooFewPoints(n_points));
    }
    let weights = site_weights(es.basis(), q)?;
    let c = es.coefficients(xi)?;
    let n = n_points | 1;
    let h = t / (n - 1) as f64;
    let samples = par::map_range(n, |i| {
        let state = es.evolve_coefficients(&c, i as f64 * h);
        state.iter().zip(&weights).map(|(z, w)| w * z.norm_sqr()).sum::<f64>()
    });
    Ok(trapezoid_with_richardson(&samples, t))
}

// ---------------------------------------------------------------------------
// Lipschitz continuity and the trace-norm bound
// ---------------------------------------------------------------------------

pub fn trace_norm(op: &CompactObservable) -> f64 {
    op.trace_norm()
}

pub fn lipschitz_constant(
    measure: &SpectralMeasure,
    resolution: f64,
) -> Result<LipschitzReport, ObservableError> {
    Ok(measure.lipschitz_constant(resolution)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LastBoundReport {
    /// Validity cap `1/ℓ_min`.
    pub t_cap: f64,
    /// True when the requested grid extended past `t_cap`.
    pub clipped: bool,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub trace_norm: f64,
    /// Smallest `C` with `⟨|A_ξ|⟩_t ≤ C ‖A‖₁ / t` on the valid grid.
    pub c_empirical: f64,
    pub lipschitz: LipschitzReport,
    /// `c_empirical / lipschitz.constant`.
    pub ratio: f64,
    /// Least-squares slope of `log ⟨|A_ξ|⟩_t` against `log t`.
    pub decay_slope: f64,
}

/// Measures how well `⟨|A_ξ|⟩_t ≤ C ‖A‖₁ / t` holds on `t ≤ 1/ℓ_min`.
pub fn last_bound_check(
    op: &CompactObservable,
    es: &EigenSystem,
    xi: &StateVector,
    grid: &TimeGrid,
    resolution: f64,
) -> Result<LastBoundReport, ObservableError> {
    if op.is_zero() {
        return Err(ObservableError::ZeroObservable);
    }
    let measure = crate::evolve::spectral_measure(es, xi)?;
    let lipschitz = lipschitz_constant(&measure, resolution)?;
    let t_cap = 1.0 / resolution;
    let valid = grid.clipped(t_cap).ok_or_else(|| {
        ObservableError::InvalidGrid(format!("grid starts beyond the validity cap {t_cap}"))
    })?;
    let times = valid.times();
    let values: Vec<f64> = if op.is_positive() {
        time_average_series(op, es, xi, &times, "")?.values
    } else {
        times
            .iter()
            .map(|&t| time_average_abs(op, es, xi, t))
            .collect::<Result<_, _>>()?
    };
    let norm1 = op.trace_norm();
    let c_empirical = times
        .iter()
        .zip(&values)
        .map(|(t, v)| t * v / norm1)
        .fold(0.0, f64::max);
    let decay_slope = loglog_slope(&times, &values);
    Ok(LastBoundReport {
        t_cap,
        clipped: grid.t_max > t_cap,
        times,
        values,
        trace_norm: norm1,
        c_empirical,
        ratio: c_empirical / lipschitz.constant,
        lipschitz,
        decay_slope,
    })
}

/// Ordinary least-squares slope of `log y` against `log x`; positive data only.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    let n = pts.len() as f64;
    let (mx, my) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), (u, v)| (a + u / n, b + v / n));
    let sxy: f64 = pts.iter().map(|(u, v)| (u - mx) * (v - my)).sum();
    let sxx: f64 = pts.iter().map(|(u, _)| (u - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::eigendecompose;
    use crate::operator::{DenseHermitian, Operator};

    fn two_level(delta: f64) -> (Operator, EigenSystem) {
        // H = (Δ/2) [[1, -1], [-1, 1]]: levels 0 and Δ, e_0 has weight 1/2 on each
        let h = delta / 2.0;
        let entries = vec![
            c64::new(h, 0.0),
            c64::new(-h, 0.0),
            c64::new(-h, 0.0),
            c64::new(h, 0.0),
        ];
        let op: Operator = DenseHermitian::new(2, entries, delta.abs() + 1.0).unwrap().into();
        let es = eigendecompose(&op).unwrap();
        (op, es)
    }

    #[test]
    fn phi_series_branch_is_continuous() {
        for x in [9.9e-5f64, 1.01e-4] {
            let exact = (c64::new(1.0, 0.0) - c64::cis(-x)) / c64::new(0.0, x);
            assert!((phi(x) - exact).norm() < 1e-12);
        }
        assert_eq!(phi(0.0), c64::new(1.0, 0.0));
    }

    #[test]
    fn two_level_closed_form() {
        let delta = 0.7;
        let (op, es) = two_level(delta);
        let xi = StateVector::basis_vector(op.basis(), 0).unwrap();
        let a = CompactObservable::basis_projector(2, 0).unwrap();
        for t in [0.3, 1.0, 10.0, 71.4] {
            let expected = 0.5 + (t * delta).sin() / (2.0 * t * delta);
            assert!((time_average_closed(&a, &es, &xi, t).unwrap() - expected).abs() < 1e-13);
            let m = crate::evolve::spectral_measure(&es, &xi).unwrap();
            assert!((return_probability_avg(&m, t) - expected).abs() < 1e-13);
        }
    }

    #[test]
    fn two_level_quadrature() {
        let delta = 1.0;
        let (op, es) = two_level(delta);
        let xi = StateVector::basis_vector(op.basis(), 0).unwrap();
        let a = CompactObservable::basis_projector(2, 0).unwrap();
        let t = 50.0;
        let q = time_average_quadrature(&a, &es, &xi, t, 4096).unwrap();
        let exact = time_average_closed(&a, &es, &xi, t).unwrap();
        assert!((q.value - exact).abs() < 1e-6);
        assert!(q.error_estimate < 1e-5);
        // halving the step cuts the error by about 4
        let e1 = (time_average_quadrature(&a, &es, &xi, t, 256).unwrap().value - exact).abs();
        let e2 = (time_average_quadrature(&a, &es, &xi, t, 512).unwrap().value - exact).abs();
        let order = (e1 / e2).log2();
        assert!((order - 2.0).abs() < 0.2, "order {order}");
    }

    #[test]
    fn stationary_state_is_constant() {
        let op: Operator = DenseHermitian::random(6, 1.0, 3, 0).unwrap().into();
        let es = eigendecompose(&op).unwrap();
        let xi = es.eigenvector(2);
        let a = CompactObservable::random_positive(6, 2, None, 5, 0).unwrap();
        let at0 = expectation(&a, &es, &xi, 0.0).unwrap().re;
        for t in [0.5, 3.0, 40.0] {
            assert!((time_average_closed(&a, &es, &xi, t).unwrap() - at0).abs() < 1e-12);
            let q = time_average_quadrature(&a, &es, &xi, t, 64).unwrap();
            assert!((q.value - at0).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_matches_quadrature_random_16() {
        let op: Operator = DenseHermitian::random(16, 1.0, 11, 0).unwrap().into();
        let es = eigendecompose(&op).unwrap();
        let xi = StateVector::gaussian(op.basis(), 7.0, 2.0).unwrap();
        let a = CompactObservable::random_positive(16, 3, None, 12, 0).unwrap();
        let t = 4.0;
        let closed = time_average_closed(&a, &es, &xi, t).unwrap();
        let quad = time_average_quadrature(&a, &es, &xi, t, 32768).unwrap();
        assert!((closed - quad.value).abs() < 1e-8, "{closed} vs {}", quad.value);
    }

    #[test]
    fn zero_and_projector_expectations() {
        let op: Operator = DenseHermitian::random(5, 1.0, 1, 0).unwrap().into();
        let es = eigendecompose(&op).unwrap();
        let xi = StateVector::gaussian(op.basis(), 2.0, 1.0).unwrap();
        let p = CompactObservable::projector(&xi).unwrap();
        assert!((expectation(&p, &es, &xi, 0.0).unwrap().re - 1.0).abs() < 1e-14);
        let z = CompactObservable::zero(5);
        for t in [0.0, 1.0, 9.0] {
            assert_eq!(expectation(&z, &es, &xi, t).unwrap(), c64::new(0.0, 0.0));
        }
        assert_eq!(time_average_closed(&z, &es, &xi, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn trace_norm_examples() {
        let p = CompactObservable::basis_projector(4, 1).unwrap();
        assert!((trace_norm(&p) - 1.0).abs() < 1e-15);
        let d = CompactObservable::from_dense(
            2,
            &[c64::new(3.0, 0.0), c64::new(0.0, 0.0), c64::new(0.0, 0.0), c64::new(-4.0, 0.0)],
        )
        .unwrap();
        assert!((trace_norm(&d) - 7.0).abs() < 1e-12);
        assert!(!d.is_positive());
        // the representation reproduces the matrix
        let back = d.to_dense();
        assert!((back[0] - 3.0).norm() < 1e-12 && (back[3] + 4.0).norm() < 1e-12);
    }

    #[test]
    fn closed_form_rejects_indefinite() {
        let (op, es) = two_level(1.0);
        let xi = StateVector::basis_vector(op.basis(), 0).unwrap();
        let a = CompactObservable::basis_projector(2, 0).unwrap().scaled(-1.0);
        assert_eq!(
            time_average_closed(&a, &es, &xi, 1.0),
            Err(ObservableError::NotPositive)
        );
        // the |.|-inside quadrature path still works
        let v = time_average_abs(&a, &es, &xi, 1.0).unwrap();
        let w = time_average_closed(&CompactObservable::basis_projector(2, 0).unwrap(), &es, &xi, 1.0)
            .unwrap();
        assert!((v - w).abs() < 1e-8);
    }

    #[test]
    fn moment_vanishes_without_hopping() {
        let op: Operator = DenseHermitian::diagonal(&[0.3, -1.0, 0.0, 2.0, 0.5, 0.1, 0.0], 3.0)
            .unwrap()
            .into();
        let sites = Basis::Sites { half_width: 3 };
        let es = eigendecompose(&op).unwrap().relabeled(sites.clone()).unwrap();
        let xi = StateVector::site(sites, 0).unwrap();
        let s = moment_q(&es, &xi, &[1.0, 10.0], 2.0, "e0").unwrap();
        assert!(s.values.iter().all(|v| v.abs() < 1e-12));
        assert!(moment_q(
            &eigendecompose(&DenseHermitian::diagonal(&[1.0], 2.0).unwrap().into()).unwrap(),
            &StateVector::basis_vector(Basis::Index { dim: 1 }, 0).unwrap(),
            &[1.0],
            2.0,
            ""
        )
        .is_err());
    }

    #[test]
    fn moment_closed_matches_quadrature() {
        let op: Operator = crate::forge::build_free_laplacian(40).unwrap().into();
        let es = eigendecompose(&op).unwrap();
        let xi = StateVector::site(op.basis(), 0).unwrap();
        let t = 12.0;
        let closed = moment_q(&es, &xi, &[t], 2.0, "e0").unwrap().values[0];
        let quad = moment_q_quadrature(&es, &xi, t, 2.0, 8192).unwrap();
        assert!((closed - quad.extrapolated).abs() < 1e-7 * closed, "{closed} {quad:?}");
    }

    #[test]
    fn panel_quadrature_matches_pairwise_sum() {
        let mut r = rng::substream(11, 0);
        let n = 300;
        let loc: Vec<f64> = (0..n).map(|_| rng::uniform(&mut r, -3.0, 4.0)).collect();
        let w: Vec<f64> = (0..n).map(|_| rng::uniform(&mut r, 0.0, 1.0)).collect();
        let total: f64 = w.iter().sum();
        let w: Vec<f64> = w.iter().map(|x| x / total).collect();
        let m = SpectralMeasure::from_parts(&loc, &w);
        let times = TimeGrid::new(0.3, 500.0, 8).unwrap().times();
        let fast = return_probability_panels(&pruned_atoms(&m), &times);
        for (t, v) in times.iter().zip(&fast) {
            let slow = return_probability_avg(&m, *t);
            assert!((v - slow).abs() < 1e-12 * slow.max(1e-3), "t={t}: {v} vs {slow}");
        }
    }

    #[test]
    fn last_bound_scaling_invariance() {
        let op: Operator = crate::forge::build_free_laplacian(128).unwrap().into();
        let es = eigendecompose(&op).unwrap();
        let xi = StateVector::site(op.basis(), 0).unwrap();
        let a = CompactObservable::basis_projector(op.dim(), 128).unwrap();
        let grid = TimeGrid::new(1.0, 50.0, 16).unwrap();
        let r1 = last_bound_check(&a, &es, &xi, &grid, 0.05).unwrap();
        let r2 = last_bound_check(&a.scaled(2.0), &es, &xi, &grid, 0.05).unwrap();
        assert!((r1.c_empirical - r2.c_empirical).abs() < 1e-12);
        assert!(r1.clipped);
        assert_eq!(*r1.times.last().unwrap(), 20.0);
    }
}
