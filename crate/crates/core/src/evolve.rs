//! Exact propagation through the spectral decomposition.
//!
//! With `T = Σ_k λ_k |ψ_k⟩⟨ψ_k|` and `c_k = ⟨ψ_k, ξ⟩`,
//! `e^{-itT}ξ = Σ_k e^{-itλ_k} c_k ψ_k` for every real `t`, with no
//! time-stepping error. The finite window only represents the infinite
//! system up to the ballistic [`horizon`].

use faer::linalg::solvers::Solve;
use faer::{c64, Mat, Side};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measure::SpectralMeasure;
use crate::operator::{Basis, ForgeError, Operator, HERMITIAN_TOL};

/// Residual tolerance for [`resolvent_apply`].
pub const RESOLVENT_TOL: f64 = 1e-10;
/// Per-eigenpair residual tolerance relative to `‖H‖`.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-9;
/// Maximal group velocity of unit-hopping Jacobi operators.
pub const MAX_GROUP_SPEED: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvolveError {
    #[error("operator is not Hermitian: max |A - A*| = {0:e}")]
    NotHermitian(f64),
    #[error("eigensolver did not converge")]
    NonConvergence,
    #[error("eigenpair residual {residual:e} exceeds tolerance {tolerance:e}")]
    Residual { residual: f64, tolerance: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("resolvent needs Im z != 0")]
    RealShift,
    #[error("linear solve failed (residual {0:e})")]
    SolverFailure(f64),
    #[error("invalid horizon parameters: {0}")]
    InvalidHorizon(String),
    #[error("cannot embed operator: {0}")]
    EmbeddingMismatch(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error(transparent)]
    Forge(#[from] ForgeError),
}

// ---------------------------------------------------------------------------
// State vectors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    #[serde(with = "crate::cser::vec")]
    amplitudes: Vec<c64>,
    basis: Basis,
}

impl StateVector {
    pub fn new(amplitudes: Vec<c64>, basis: Basis) -> Result<Self, EvolveError> {
        if amplitudes.len() != basis.dim() {
            return Err(EvolveError::DimensionMismatch {
                expected: basis.dim(),
                found: amplitudes.len(),
            });
        }
        if amplitudes.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(EvolveError::InvalidState("non-finite amplitude".into()));
        }
        Ok(Self { amplitudes, basis })
    }

    pub fn from_real(values: &[f64], basis: Basis) -> Result<Self, EvolveError> {
        Self::new(values.iter().map(|&v| c64::new(v, 0.0)).collect(), basis)
    }

    /// Standard basis vector `e_i` (matrix index).
    pub fn basis_vector(basis: Basis, i: usize) -> Result<Self, EvolveError> {
        let n = basis.dim();
        if i >= n {
            return Err(EvolveError::InvalidState(format!("index {i} outside dimension {n}")));
        }
        let mut amplitudes = vec![c64::new(0.0, 0.0); n];
        amplitudes[i] = c64::new(1.0, 0.0);
        Ok(Self { amplitudes, basis })
    }

    /// Lattice vector `e_n` for site `n` of a Jacobi window.
    pub fn site(basis: Basis, n: i64) -> Result<Self, EvolveError> {
        let Basis::Sites { half_width } = basis else {
            return Err(EvolveError::InvalidState("basis has no site labels".into()));
        };
        let i = n + half_width as i64;
        if !(0..=2 * half_width as i64).contains(&i) {
            return Err(EvolveError::InvalidState(format!("site {n} outside window")));
        }
        Self::basis_vector(basis, i as usize)
    }

    /// Normalized Gaussian `exp(-(x - center)²/(2 width²))` over the basis
    /// positions (site index or grid coordinate).
    pub fn gaussian(basis: Basis, center: f64, width: f64) -> Result<Self, EvolveError> {
        let xs: Vec<f64> = match basis {
            Basis::Sites { half_width } => {
                let n = half_width as i64;
                (-n..=n).map(|j| j as f64).collect()
            }
            Basis::Grid {
                box_half_width,
                spacing,
            } => (0..basis.dim())
                .map(|i| -box_half_width + (i + 1) as f64 * spacing)
                .collect(),
            Basis::Index { dim } => (0..dim).map(|i| i as f64).collect(),
        };
        let values: Vec<f64> = xs
            .iter()
            .map(|x| (-(x - center).powi(2) / (2.0 * width * width)).exp())
            .collect();
        Self::from_real(&values, basis)?.normalized()
    }

    pub fn amplitudes(&self) -> &[c64] {
        &self.amplitudes
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(&self) -> Result<Self, EvolveError> {
        let n = self.norm();
        if n == 0.0 {
            return Err(EvolveError::InvalidState("zero vector".into()));
        }
        Ok(Self {
            amplitudes: self.amplitudes.iter().map(|z| z / n).collect(),
            basis: self.basis.clone(),
        })
    }

    /// `⟨self, other⟩`, antilinear in `self`.
    pub fn inner(&self, other: &StateVector) -> c64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn distance(&self, other: &StateVector) -> f64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, s: c64, other: &StateVector) -> Self {
        Self {
            amplitudes: self
                .amplitudes
                .iter()
                .zip(&other.amplitudes)
                .map(|(a, b)| a + s * b)
                .collect(),
            basis: self.basis.clone(),
        }
    }

    /// Probability mass on sites with `|n| > radius`.
    pub fn mass_beyond(&self, radius: f64) -> Option<f64> {
        let labels = self.basis.site_labels()?;
        Some(
            labels
                .iter()
                .zip(&self.amplitudes)
                .filter(|(n, _)| (n.unsigned_abs() as f64) > radius)
                .map(|(_, z)| z.norm_sqr())
                .sum(),
        )
    }
}

// ---------------------------------------------------------------------------
// Eigensystems
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Vectors {
    /// Column-major `n × n`.
    Real(Vec<f64>),
    Complex(Vec<c64>),
}

/// Ascending eigenvalues and orthonormal eigenvectors of a finite operator.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    eigenvalues: Vec<f64>,
    vectors: Vectors,
    basis: Basis,
    source_hash: String,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn source_hash(&self) -> &str {
        &self.source_hash
    }

    /// Same eigensystem on a different basis of equal dimension, e.g. a
    /// dense matrix read as an operator on lattice sites.
    pub fn relabeled(mut self, basis: Basis) -> Result<Self, EvolveError> {
        self.check_dim(basis.dim())?;
        self.basis = basis;
        Ok(self)
    }

    pub fn is_real(&self) -> bool {
        matches!(self.vectors, Vectors::Real(_))
    }

    /// Component `i` of eigenvector `k`.
    pub fn component(&self, i: usize, k: usize) -> c64 {
        let n = self.dim();
        match &self.vectors {
            Vectors::Real(v) => c64::new(v[k * n + i], 0.0),
            Vectors::Complex(v) => v[k * n + i],
        }
    }

    /// Eigenvector `k` as a state.
    pub fn eigenvector(&self, k: usize) -> StateVector {
        let n = self.dim();
        StateVector {
            amplitudes: (0..n).map(|i| self.component(i, k)).collect(),
            basis: self.basis.clone(),
        }
    }

    /// Real eigenvector columns, when the operator is real symmetric.
    pub fn real_vectors(&self) -> Option<&[f64]> {
        match &self.vectors {
            Vectors::Real(v) => Some(v),
            Vectors::Complex(_) => None,
        }
    }

    fn check_dim(&self, found: usize) -> Result<(), EvolveError> {
        if found != self.dim() {
            return Err(EvolveError::DimensionMismatch {
                expected: self.dim(),
                found,
            });
        }
        Ok(())
    }

    /// Expansion coefficients `c_k = ⟨ψ_k, u⟩` of an arbitrary vector.
    pub fn coefficients_of(&self, u: &[c64]) -> Vec<c64> {
        let n = self.dim();
        assert_eq!(u.len(), n, "dimension mismatch");
        match &self.vectors {
            Vectors::Real(v) => (0..n)
                .map(|k| {
                    let col = &v[k * n..(k + 1) * n];
                    let (mut re, mut im) = (0.0, 0.0);
                    for (a, z) in col.iter().zip(u) {
                        re += a * z.re;
                        im += a * z.im;
                    }
                    c64::new(re, im)
                })
                .collect(),
            Vectors::Complex(v) => (0..n)
                .map(|k| {
                    v[k * n..(k + 1) * n]
                        .iter()
                        .zip(u)
                        .map(|(a, z)| a.conj() * z)
                        .sum()
                })
                .collect(),
        }
    }

    pub fn coefficients(&self, xi: &StateVector) -> Result<Vec<c64>, EvolveError> {
        self.check_dim(xi.dim())?;
        Ok(self.coefficients_of(&xi.amplitudes))
    }

    /// `Σ_k a_k ψ_k`.
    pub fn synthesize(&self, coeffs: &[c64]) -> Vec<c64> {
        let n = self.dim();
        assert_eq!(coeffs.len(), n, "dimension mismatch");
        let mut out = vec![c64::new(0.0, 0.0); n];
        match &self.vectors {
            Vectors::Real(v) => {
                for (k, a) in coeffs.iter().enumerate() {
                    if a.re == 0.0 && a.im == 0.0 {
                        continue;
                    }
                    for (o, &p) in out.iter_mut().zip(&v[k * n..(k + 1) * n]) {
                        o.re += a.re * p;
                        o.im += a.im * p;
                    }
                }
            }
            Vectors::Complex(v) => {
                for (k, a) in coeffs.iter().enumerate() {
                    for (o, p) in out.iter_mut().zip(&v[k * n..(k + 1) * n]) {
                        *o += a * p;
                    }
                }
            }
        }
        out
    }

    /// `e^{-itT}` applied to a state given by its coefficients.
    pub fn evolve_coefficients(&self, coeffs: &[c64], t: f64) -> Vec<c64> {
        let phased: Vec<c64> = coeffs
            .iter()
            .zip(&self.eigenvalues)
            .map(|(c, &l)| c * c64::cis(-t * l))
            .collect();
        self.synthesize(&phased)
    }

    /// Largest `‖Tψ_k - λ_kψ_k‖` over all eigenpairs.
    pub fn max_residual(&self, op: &Operator) -> f64 {
        (0..self.dim())
            .map(|k| {
                let psi = self.eigenvector(k);
                let h_psi = op.apply(&psi.amplitudes);
                h_psi
                    .iter()
                    .zip(&psi.amplitudes)
                    .map(|(a, b)| (a - b * self.eigenvalues[k]).norm_sqr())
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// `max |Ψ*Ψ - I|` entrywise; O(n³), meant for tests and audits.
    pub fn orthonormality_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in a..n {
                let g: c64 = (0..n)
                    .map(|i| self.component(i, a).conj() * self.component(i, b))
                    .sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((g - target).norm());
            }
        }
        worst
    }
}

/// Full spectral decomposition. Tridiagonal operators use the tridiagonal
/// solver; dense operators the general Hermitian one. Every eigenpair is
/// checked to residual `1e-9 ‖H‖`.
pub fn eigendecompose(op: &Operator) -> Result<EigenSystem, EvolveError> {
    let n = op.dim();
    let (eigenvalues, vectors) = match op.tridiagonal() {
        Some(t) => {
            let (vals, u) = t.eigen().map_err(|_| EvolveError::NonConvergence)?;
            let mut v = Vec::with_capacity(n * n);
            for k in 0..n {
                for i in 0..n {
                    v.push(u[(i, k)]);
                }
            }
            (vals, Vectors::Real(v))
        }
        None => {
            let Operator::Dense(dense) = op else {
                unreachable!("non-tridiagonal operators are dense");
            };
            let asym = dense.max_asymmetry();
            if asym > HERMITIAN_TOL {
                return Err(EvolveError::NotHermitian(asym));
            }
            let evd = dense
                .to_mat()
                .self_adjoint_eigen(Side::Lower)
                .map_err(|_| EvolveError::NonConvergence)?;
            let s = evd.S().column_vector();
            let u = evd.U();
            let vals: Vec<f64> = (0..n).map(|i| s[i].re).collect();
            let mut v = Vec::with_capacity(n * n);
            for k in 0..n {
                for i in 0..n {
                    v.push(u[(i, k)]);
                }
            }
            (vals, Vectors::Complex(v))
        }
    };
    let es = EigenSystem {
        eigenvalues,
        vectors,
        basis: op.basis(),
        source_hash: op.fingerprint(),
    };
    let tolerance = EIGEN_RESIDUAL_TOL * op.norm_bound().max(1.0);
    let residual = es.max_residual(op);
    if !(residual <= tolerance) {
        return Err(EvolveError::Residual {
            residual,
            tolerance,
        });
    }
    Ok(es)
}

/// `e^{-itT}ξ`.
pub fn evolve(es: &EigenSystem, xi: &StateVector, t: f64) -> Result<StateVector, EvolveError> {
    let c = es.coefficients(xi)?;
    Ok(StateVector {
        amplitudes: es.evolve_coefficients(&c, t),
        basis: xi.basis.clone(),
    })
}

/// Atoms `(λ_k, |⟨ψ_k, ξ⟩|²)`; total mass is `‖ξ‖²`.
pub fn spectral_measure(es: &EigenSystem, xi: &StateVector) -> Result<SpectralMeasure, EvolveError> {
    let c = es.coefficients(xi)?;
    let w: Vec<f64> = c.iter().map(|z| z.norm_sqr()).collect();
    Ok(SpectralMeasure::from_parts(&es.eigenvalues, &w))
}

/// Spectral measure of the basis vector `e_index` without storing
/// eigenvectors: tridiagonal operators use one-row implicit QL, dense ones
/// fall back to the full decomposition.
pub fn basis_measure(op: &Operator, index: usize) -> Result<SpectralMeasure, EvolveError> {
    let xi = StateVector::basis_vector(op.basis(), index)?;
    match op.tridiagonal() {
        Some(t) => {
            let (lam, w) = t.site_weights(index).map_err(|_| EvolveError::NonConvergence)?;
            Ok(SpectralMeasure::from_parts(&lam, &w))
        }
        None => spectral_measure(&eigendecompose(op)?, &xi),
    }
}

/// Solves `(T - z) w = u` for `Im z != 0`.
pub fn resolvent_apply(op: &Operator, z: c64, u: &StateVector) -> Result<StateVector, EvolveError> {
    if z.im == 0.0 {
        return Err(EvolveError::RealShift);
    }
    let n = op.dim();
    if u.dim() != n {
        return Err(EvolveError::DimensionMismatch {
            expected: n,
            found: u.dim(),
        });
    }
    let w = match op.tridiagonal() {
        Some(t) => t
            .solve_shifted(z, &u.amplitudes)
            .ok_or(EvolveError::SolverFailure(f64::INFINITY))?,
        None => {
            let mut m: Mat<c64> = op.to_mat();
            for i in 0..n {
                m[(i, i)] -= z;
            }
            let rhs = Mat::<c64>::from_fn(n, 1, |i, _| u.amplitudes[i]);
            let x = m.partial_piv_lu().solve(&rhs);
            (0..n).map(|i| x[(i, 0)]).collect()
        }
    };
    let hw = op.apply(&w);
    let residual = hw
        .iter()
        .zip(&w)
        .zip(&u.amplitudes)
        .map(|((a, b), c)| (a - z * b - c).norm_sqr())
        .sum::<f64>()
        .sqrt();
    if !(residual <= RESOLVENT_TOL * u.norm().max(1.0)) {
        return Err(EvolveError::SolverFailure(residual));
    }
    Ok(StateVector {
        amplitudes: w,
        basis: u.basis.clone(),
    })
}

/// Largest time a window of half-width `N` faithfully represents a state
/// supported within radius `r0`: `safety (N - r0) / 2`.
pub fn horizon(half_width: usize, support_radius: usize, safety: f64) -> Result<f64, EvolveError> {
    if support_radius >= half_width {
        return Err(EvolveError::InvalidHorizon(format!(
            "support radius {support_radius} must be below half-width {half_width}"
        )));
    }
    if !(safety > 0.0 && safety < 1.0) {
        return Err(EvolveError::InvalidHorizon(format!(
            "safety factor must lie in (0, 1), got {safety}"
        )));
    }
    Ok(safety * (half_width - support_radius) as f64 / MAX_GROUP_SPEED)
}

/// One row of [`sr_sd_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SrSdRow {
    pub dim: usize,
    pub resolvent_error: f64,
    pub dynamical_error: f64,
}

/// Central zero-padding offset of a `small`-dimensional operator inside a
/// `large`-dimensional one.
fn embedding_offset(small: &Operator, large: &Operator) -> Result<usize, EvolveError> {
    let (m, n) = (small.dim(), large.dim());
    let compatible = match (small, large) {
        (Operator::Jacobi(_), Operator::Jacobi(_)) => true,
        (Operator::Continuum(a), Operator::Continuum(b)) => a.spacing() == b.spacing(),
        (Operator::Dense(_), Operator::Dense(_)) => m == n,
        _ => false,
    };
    if !compatible || m > n || (n - m) % 2 != 0 {
        return Err(EvolveError::EmbeddingMismatch(format!(
            "dimension {m} does not embed centrally into {n}"
        )));
    }
    Ok((n - m) / 2)
}

/// For each `T_n`, zero-padded into the space of `limit`:
/// `‖(R_i(T_n) - R_i(T))u‖` and `‖(e^{itT_n} - e^{itT})u‖`.
///
/// On the padding, `T_n ⊕ 0` acts as zero, so its resolvent at `i` is
/// multiplication by `i` and its propagator is the identity there.
pub fn sr_sd_check(
    sequence: &[Operator],
    limit: &Operator,
    u: &StateVector,
    t: f64,
) -> Result<Vec<SrSdRow>, EvolveError> {
    let n = limit.dim();
    if u.dim() != n {
        return Err(EvolveError::DimensionMismatch {
            expected: n,
            found: u.dim(),
        });
    }
    let z = c64::new(0.0, 1.0);
    let ref_resolvent = resolvent_apply(limit, z, u)?;
    let ref_es = eigendecompose(limit)?;
    let ref_dynamics = evolve(&ref_es, u, -t)?;

    let mut rows = Vec::with_capacity(sequence.len());
    for op in sequence {
        let offset = embedding_offset(op, limit)?;
        let m = op.dim();
        let inner = StateVector {
            amplitudes: u.amplitudes[offset..offset + m].to_vec(),
            basis: op.basis(),
        };
        let res_inner = resolvent_apply(op, z, &inner)?;
        let es = eigendecompose(op)?;
        let dyn_inner = evolve(&es, &inner, -t)?;

        let mut res_err = 0.0;
        let mut dyn_err = 0.0;
        for i in 0..n {
            let (r, d) = if (offset..offset + m).contains(&i) {
                (
                    res_inner.amplitudes[i - offset],
                    dyn_inner.amplitudes[i - offset],
                )
            } else {
                (u.amplitudes[i] * z, u.amplitudes[i])
            };
            res_err += (r - ref_resolvent.amplitudes[i]).norm_sqr();
            dyn_err += (d - ref_dynamics.amplitudes[i]).norm_sqr();
        }
        rows.push(SrSdRow {
            dim: m,
            resolvent_error: res_err.sqrt(),
            dynamical_error: dyn_err.sqrt(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forge::build_free_laplacian;
    use crate::operator::DenseHermitian;

    fn dense(values: &[f64]) -> Operator {
        DenseHermitian::diagonal(values, 10.0).unwrap().into()
    }

    #[test]
    fn diagonal_matrix_decomposition() {
        let es = eigendecompose(&dense(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(es.eigenvalues(), &[1.0, 2.0, 3.0]);
        // eigenvector of 1.0 is e_1 up to phase
        assert!((es.component(1, 0).norm() - 1.0).abs() < 1e-14);
        assert!((es.component(2, 1).norm() - 1.0).abs() < 1e-14);
        assert!((es.component(0, 2).norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn free_laplacian_closed_form_levels() {
        let n_half = 40;
        let es = eigendecompose(&build_free_laplacian(n_half).unwrap().into()).unwrap();
        let dim = 2 * n_half + 1;
        let mut exact: Vec<f64> = (1..=dim)
            .map(|m| 2.0 * (std::f64::consts::PI * m as f64 / (2 * n_half + 2) as f64).cos())
            .collect();
        exact.sort_by(f64::total_cmp);
        for (a, b) in es.eigenvalues().iter().zip(&exact) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(es.orthonormality_defect() < 1e-10);
    }

    #[test]
    fn random_hermitian_reconstruction() {
        let op: Operator = DenseHermitian::random(16, 2.0, 4, 0).unwrap().into();
        let es = eigendecompose(&op).unwrap();
        let mut worst = 0.0f64;
        for i in 0..16 {
            for j in 0..16 {
                let r: c64 = (0..16)
                    .map(|k| es.component(i, k) * es.eigenvalues()[k] * es.component(j, k).conj())
                    .sum();
                let Operator::Dense(d) = &op else { unreachable!() };
                worst = worst.max((r - d.get(i, j)).norm());
            }
        }
        assert!(worst <= 1e-10, "reconstruction error {worst}");
        assert!(es.orthonormality_defect() < 1e-10);
    }

    #[test]
    fn evolve_identity_and_phase() {
        let op = dense(&[0.0, std::f64::consts::PI]);
        let es = eigendecompose(&op).unwrap();
        let s = 0.5f64.sqrt();
        let xi = StateVector::from_real(&[s, s], op.basis()).unwrap();
        assert_eq!(evolve(&es, &xi, 0.0).unwrap().distance(&xi), 0.0);
        let out = evolve(&es, &xi, 1.0).unwrap();
        let expected = StateVector::from_real(&[s, -s], op.basis()).unwrap();
        assert!(out.distance(&expected) < 1e-14);
    }

    #[test]
    fn evolve_rejects_dimension_mismatch() {
        let es = eigendecompose(&dense(&[0.0, 1.0])).unwrap();
        let xi = StateVector::basis_vector(Basis::Index { dim: 3 }, 0).unwrap();
        assert!(matches!(
            evolve(&es, &xi, 1.0),
            Err(EvolveError::DimensionMismatch { expected: 2, found: 3 })
        ));
    }

    #[test]
    fn spectral_measure_of_eigenvectors() {
        let op: Operator = DenseHermitian::random(6, 1.0, 2, 0).unwrap().into();
        let es = eigendecompose(&op).unwrap();
        let m = spectral_measure(&es, &es.eigenvector(3)).unwrap();
        assert!((m.point_mass(es.eigenvalues()[3]) - 1.0).abs() < 1e-12);
        let mix = es
            .eigenvector(1)
            .add_scaled(c64::new(1.0, 0.0), &es.eigenvector(2));
        let mix = mix.normalized().unwrap();
        let m = spectral_measure(&es, &mix).unwrap();
        assert!((m.point_mass(es.eigenvalues()[1]) - 0.5).abs() < 1e-12);
        assert!((m.point_mass(es.eigenvalues()[2]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn resolvent_examples() {
        let zero = dense(&[0.0]);
        let u = StateVector::from_real(&[2.0], zero.basis()).unwrap();
        let w = resolvent_apply(&zero, c64::new(0.0, 1.0), &u).unwrap();
        // (0 - i) w = u  =>  w = i u
        assert!((w.amplitudes()[0] - c64::new(0.0, 2.0)).norm() < 1e-15);

        let d = dense(&[1.0, -1.0]);
        let u = StateVector::new(vec![c64::new(1.0, 2.0), c64::new(-0.5, 0.0)], d.basis()).unwrap();
        let w = resolvent_apply(&d, c64::new(0.0, 1.0), &u).unwrap();
        for (j, lam) in [1.0, -1.0].iter().enumerate() {
            let expected = u.amplitudes()[j] / (c64::new(*lam, 0.0) - c64::new(0.0, 1.0));
            assert!((w.amplitudes()[j] - expected).norm() < 1e-14);
        }
        assert!(matches!(
            resolvent_apply(&d, c64::new(1.0, 0.0), &u),
            Err(EvolveError::RealShift)
        ));
    }

    #[test]
    fn horizon_formula() {
        assert!((horizon(1024, 0, 0.8).unwrap() - 409.6).abs() < 1e-12);
        assert!((horizon(2048, 0, 0.8).unwrap() - 2.0 * horizon(1024, 0, 0.8).unwrap()).abs() < 1e-12);
        assert!(horizon(10, 10, 0.5).is_err());
        assert!(horizon(10, 0, 1.0).is_err());
    }

    #[test]
    fn constant_sequence_has_zero_errors() {
        let op: Operator = build_free_laplacian(16).unwrap().into();
        let u = StateVector::gaussian(op.basis(), 0.0, 4.0).unwrap();
        let rows = sr_sd_check(&[op.clone(), op.clone()], &op, &u, 3.0).unwrap();
        for r in rows {
            assert_eq!(r.resolvent_error, 0.0);
            assert_eq!(r.dynamical_error, 0.0);
        }
    }

    #[test]
    fn embedding_rejects_mismatched_parity() {
        let big: Operator = build_free_laplacian(8).unwrap().into();
        let dense_op = dense(&[0.0; 5]);
        let u = StateVector::gaussian(big.basis(), 0.0, 2.0).unwrap();
        assert!(matches!(
            sr_sd_check(&[dense_op], &big, &u, 1.0),
            Err(EvolveError::EmbeddingMismatch(_))
        ));
    }
}
