//! Finite realizations of the three operator classes.
//!
//! - [`DenseHermitian`]: a bounded self-adjoint matrix with ‖T‖ ≤ a.
//! - [`JacobiOperator`]: `(Mu)_j = u_{j-1} + u_{j+1} + v_j u_j` on the window
//!   `-N..=N` of ℤ with Dirichlet truncation and `|v_j| ≤ b`.
//! - [`ContinuumSchrodinger`]: `-u'' + V u` discretized by the 3-point
//!   Laplacian on the interior points of `[-L, L]` with `|V| ≤ C`.
//!
//! All three serialize to JSON tagged by `kind`; validation runs on load.

use faer::{c64, Mat, Side};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hash;
use crate::tridiag::Tridiagonal;

/// Tolerance on `max |A - A*|` for a matrix to count as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Slack on the spectral-radius cap of [`DenseHermitian`].
pub const NORM_CAP_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForgeError {
    #[error("matrix is not Hermitian: max |A - A*| = {0:e}")]
    NotHermitian(f64),
    #[error("spectral radius {radius} exceeds norm cap {cap}")]
    NormCap { radius: f64, cap: f64 },
    #[error("potential value {value} at index {index} exceeds bound {bound}")]
    PotentialBound { index: usize, value: f64, bound: f64 },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("cannot truncate to size {requested}: current size is {current}")]
    Truncation { requested: f64, current: f64 },
    #[error("eigensolver failed")]
    Eigensolver,
}

/// Where an operator came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub realization: Option<u64>,
    pub truncation: Option<Truncation>,
}

impl Provenance {
    pub fn new(source: impl Into<String>) -> Self {
        Self {
            source: source.into(),
            seed: None,
            realization: None,
            truncation: None,
        }
    }

    pub fn seeded(source: impl Into<String>, seed: u64, realization: u64) -> Self {
        Self {
            seed: Some(seed),
            realization: Some(realization),
            ..Self::new(source)
        }
    }
}

/// Record of a central-window truncation. Sizes are half-widths: site counts
/// for Jacobi operators, box lengths for continuum operators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub from: f64,
    pub to: f64,
}

/// Labels of the standard basis an operator acts on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Basis {
    /// Abstract basis `e_0 .. e_{dim-1}` with no position labels.
    Index { dim: usize },
    /// Lattice sites `-half_width ..= half_width`.
    Sites { half_width: usize },
    /// Interior points `-L + h, .., L - h` of a uniform grid.
    Grid { box_half_width: f64, spacing: f64 },
}

impl Basis {
    pub fn dim(&self) -> usize {
        match *self {
            Basis::Index { dim } => dim,
            Basis::Sites { half_width } => 2 * half_width + 1,
            Basis::Grid {
                box_half_width,
                spacing,
            } => grid_intervals(box_half_width, spacing).map_or(0, |m| m - 1),
        }
    }

    /// Site index `n` of every basis vector, when the basis is a lattice.
    pub fn site_labels(&self) -> Option<Vec<i64>> {
        match *self {
            Basis::Sites { half_width } => {
                let n = half_width as i64;
                Some((-n..=n).collect())
            }
            _ => None,
        }
    }

    pub fn label(&self, i: usize) -> String {
        match *self {
            Basis::Index { .. } => format!("e{i}"),
            Basis::Sites { half_width } => format!("{}", i as i64 - half_width as i64),
            Basis::Grid {
                box_half_width,
                spacing,
            } => format!("{}", -box_half_width + (i + 1) as f64 * spacing),
        }
    }
}

fn grid_intervals(box_half_width: f64, spacing: f64) -> Option<usize> {
    if !(box_half_width > 0.0 && spacing > 0.0) {
        return None;
    }
    let m = 2.0 * box_half_width / spacing;
    let rounded = m.round();
    if rounded < 2.0 || (m - rounded).abs() > 1e-9 * m.max(1.0) {
        return None;
    }
    Some(rounded as usize)
}

fn check_bound(values: &[f64], bound: f64) -> Result<(), ForgeError> {
    let slack = 1e-12 * bound.max(1.0);
    for (index, &value) in values.iter().enumerate() {
        if !value.is_finite() || value.abs() > bound + slack {
            return Err(ForgeError::PotentialBound {
                index,
                value,
                bound,
            });
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Dense Hermitian
// ---------------------------------------------------------------------------

/// Bounded self-adjoint matrix with spectral radius at most `norm_cap`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DenseRepr", into = "DenseRepr")]
pub struct DenseHermitian {
    dim: usize,
    entries: Vec<c64>,
    norm_cap: f64,
    provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DenseRepr {
    dim: usize,
    norm_cap: f64,
    /// Row-major `[re, im]` pairs.
    entries: Vec<[f64; 2]>,
    provenance: Provenance,
}

impl TryFrom<DenseRepr> for DenseHermitian {
    type Error = ForgeError;

    fn try_from(r: DenseRepr) -> Result<Self, ForgeError> {
        let entries = r.entries.iter().map(|&[re, im]| c64::new(re, im)).collect();
        DenseHermitian::with_provenance(r.dim, entries, r.norm_cap, r.provenance)
    }
}

impl From<DenseHermitian> for DenseRepr {
    fn from(d: DenseHermitian) -> Self {
        DenseRepr {
            dim: d.dim,
            norm_cap: d.norm_cap,
            entries: d.entries.iter().map(|z| [z.re, z.im]).collect(),
            provenance: d.provenance,
        }
    }
}

impl DenseHermitian {
    /// Validates Hermiticity and the spectral-radius cap.
    pub fn new(dim: usize, entries: Vec<c64>, norm_cap: f64) -> Result<Self, ForgeError> {
        Self::with_provenance(dim, entries, norm_cap, Provenance::new("dense"))
    }

    pub fn with_provenance(
        dim: usize,
        entries: Vec<c64>,
        norm_cap: f64,
        provenance: Provenance,
    ) -> Result<Self, ForgeError> {
        if dim == 0 {
            return Err(ForgeError::InvalidParameter("dim must be positive".into()));
        }
        if !(norm_cap > 0.0 && norm_cap.is_finite()) {
            return Err(ForgeError::InvalidParameter("norm cap must be positive".into()));
        }
        if entries.len() != dim * dim {
            return Err(ForgeError::DimensionMismatch(dim * dim, entries.len()));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(ForgeError::InvalidParameter("non-finite entry".into()));
        }
        let op = Self {
            dim,
            entries,
            norm_cap,
            provenance,
        };
        let asym = op.max_asymmetry();
        if asym > HERMITIAN_TOL {
            return Err(ForgeError::NotHermitian(asym));
        }
        let radius = op.spectral_radius()?;
        if radius > norm_cap + NORM_CAP_SLACK {
            return Err(ForgeError::NormCap {
                radius,
                cap: norm_cap,
            });
        }
        Ok(op)
    }

    /// Real diagonal matrix; convenient for examples and tests.
    pub fn diagonal(values: &[f64], norm_cap: f64) -> Result<Self, ForgeError> {
        let n = values.len();
        let mut entries = vec![c64::new(0.0, 0.0); n * n];
        for (i, &v) in values.iter().enumerate() {
            entries[i * n + i] = c64::new(v, 0.0);
        }
        Self::new(n, entries, norm_cap)
    }

    /// Random complex Hermitian matrix rescaled so its spectral radius is
    /// exactly `norm_cap` (GUE-like entries before rescaling).
    pub fn random(dim: usize, norm_cap: f64, seed: u64, realization: u64) -> Result<Self, ForgeError> {
        if dim == 0 {
            return Err(ForgeError::InvalidParameter("dim must be positive".into()));
        }
        let mut rng = crate::rng::substream(seed, realization);
        let mut g = vec![c64::new(0.0, 0.0); dim * dim];
        for z in g.iter_mut() {
            *z = c64::new(crate::rng::normal(&mut rng), crate::rng::normal(&mut rng));
        }
        let mut entries = vec![c64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                entries[i * dim + j] = (g[i * dim + j] + g[j * dim + i].conj()) * 0.5;
            }
        }
        let probe = Self {
            dim,
            entries,
            norm_cap: f64::INFINITY,
            provenance: Provenance::new("dense"),
        };
        let radius = probe.spectral_radius()?;
        let scale = if radius > 0.0 { norm_cap / radius } else { 1.0 };
        let entries = probe.entries.iter().map(|z| z * scale).collect();
        Self::with_provenance(
            dim,
            entries,
            norm_cap,
            Provenance::seeded("dense_random", seed, realization),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn norm_cap(&self) -> f64 {
        self.norm_cap
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn get(&self, i: usize, j: usize) -> c64 {
        self.entries[i * self.dim + j]
    }

    pub fn entries(&self) -> &[c64] {
        &self.entries
    }

    pub fn to_mat(&self) -> Mat<c64> {
        Mat::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }

    pub fn max_asymmetry(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let d = self.get(i, j) - self.get(j, i).conj();
                worst = worst.max(d.norm());
            }
        }
        worst
    }

    pub fn spectral_radius(&self) -> Result<f64, ForgeError> {
        let evs = self
            .to_mat()
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|_| ForgeError::Eigensolver)?;
        Ok(evs.iter().fold(0.0f64, |m, &x| m.max(x.abs())))
    }
}

// ---------------------------------------------------------------------------
// Jacobi
// ---------------------------------------------------------------------------

/// Boundary condition at the edge of a truncation window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Dirichlet,
}

/// Jacobi matrix with unit off-diagonals on sites `-N..=N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "JacobiRepr")]
pub struct JacobiOperator {
    half_width: usize,
    bound: f64,
    boundary: Boundary,
    potential: Vec<f64>,
    provenance: Provenance,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JacobiRepr {
    half_width: usize,
    bound: f64,
    #[serde(default)]
    boundary: Boundary,
    potential: Vec<f64>,
    provenance: Provenance,
}

impl TryFrom<JacobiRepr> for JacobiOperator {
    type Error = ForgeError;

    fn try_from(r: JacobiRepr) -> Result<Self, ForgeError> {
        let Boundary::Dirichlet = r.boundary;
        JacobiOperator::with_provenance(r.half_width, r.potential, r.bound, r.provenance)
    }
}

impl JacobiOperator {
    /// `potential[i]` is `v_j` at site `j = i - half_width`.
    pub fn new(half_width: usize, potential: Vec<f64>, bound: f64) -> Result<Self, ForgeError> {
        Self::with_provenance(half_width, potential, bound, Provenance::new("jacobi"))
    }

    pub fn with_provenance(
        half_width: usize,
        potential: Vec<f64>,
        bound: f64,
        provenance: Provenance,
    ) -> Result<Self, ForgeError> {
        if half_width == 0 {
            return Err(ForgeError::InvalidParameter("half_width must be >= 1".into()));
        }
        if !(bound >= 0.0 && bound.is_finite()) {
            return Err(ForgeError::InvalidParameter("bound must be finite and >= 0".into()));
        }
        let dim = 2 * half_width + 1;
        if potential.len() != dim {
            return Err(ForgeError::DimensionMismatch(dim, potential.len()));
        }
        check_bound(&potential, bound)?;
        Ok(Self {
            half_width,
            bound,
            boundary: Boundary::Dirichlet,
            potential,
            provenance,
        })
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn dim(&self) -> usize {
        2 * self.half_width + 1
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Site label of matrix index `i`.
    pub fn site(&self, i: usize) -> i64 {
        i as i64 - self.half_width as i64
    }

    /// Matrix index of site `n`, if inside the window.
    pub fn index_of(&self, n: i64) -> Option<usize> {
        let i = n + self.half_width as i64;
        (0..self.dim() as i64).contains(&i).then_some(i as usize)
    }

    pub fn tridiagonal(&self) -> Tridiagonal {
        Tridiagonal::new(self.potential.clone(), vec![1.0; self.dim() - 1])
    }

    /// Keep the central window `-new_half_width..=new_half_width`.
    pub fn truncate(&self, new_half_width: usize) -> Result<Self, ForgeError> {
        if new_half_width == self.half_width {
            return Ok(self.clone());
        }
        if new_half_width == 0 || new_half_width > self.half_width {
            return Err(ForgeError::Truncation {
                requested: new_half_width as f64,
                current: self.half_width as f64,
            });
        }
        let start = self.half_width - new_half_width;
        let potential = self.potential[start..start + 2 * new_half_width + 1].to_vec();
        let mut provenance = self.provenance.clone();
        let original = provenance
            .truncation
            .map_or(self.half_width as f64, |t| t.from);
        provenance.truncation = Some(Truncation {
            from: original,
            to: new_half_width as f64,
        });
        Ok(Self {
            half_width: new_half_width,
            bound: self.bound,
            boundary: self.boundary,
            potential,
            provenance,
        })
    }
}

// ---------------------------------------------------------------------------
// Continuum Schrödinger
// ---------------------------------------------------------------------------

/// `-Δ + V` on `[-L, L]`, 3-point stencil, Dirichlet at `±L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ContinuumRepr")]
pub struct ContinuumSchrodinger {
    box_half_width: f64,
    spacing: f64,
    cap: f64,
    potential: Vec<f64>,
    provenance: Provenance,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ContinuumRepr {
    box_half_width: f64,
    spacing: f64,
    cap: f64,
    potential: Vec<f64>,
    provenance: Provenance,
}

impl TryFrom<ContinuumRepr> for ContinuumSchrodinger {
    type Error = ForgeError;

    fn try_from(r: ContinuumRepr) -> Result<Self, ForgeError> {
        ContinuumSchrodinger::with_provenance(
            r.box_half_width,
            r.spacing,
            r.potential,
            r.cap,
            r.provenance,
        )
    }
}

impl ContinuumSchrodinger {
    /// Interior grid points `x_i = -L + (i + 1) h` for a box `[-L, L]`.
    pub fn grid_points(box_half_width: f64, spacing: f64) -> Result<Vec<f64>, ForgeError> {
        let m = grid_intervals(box_half_width, spacing).ok_or_else(|| {
            ForgeError::InvalidGrid(format!(
                "2L/h must be an integer >= 2 (L = {box_half_width}, h = {spacing})"
            ))
        })?;
        Ok((1..m)
            .map(|i| -box_half_width + i as f64 * spacing)
            .collect())
    }

    pub fn new(
        box_half_width: f64,
        spacing: f64,
        potential: Vec<f64>,
        cap: f64,
    ) -> Result<Self, ForgeError> {
        Self::with_provenance(
            box_half_width,
            spacing,
            potential,
            cap,
            Provenance::new("continuum"),
        )
    }

    /// Samples `v` at the interior grid points.
    pub fn from_fn(
        box_half_width: f64,
        spacing: f64,
        cap: f64,
        v: impl Fn(f64) -> f64,
    ) -> Result<Self, ForgeError> {
        let grid = Self::grid_points(box_half_width, spacing)?;
        Self::new(box_half_width, spacing, grid.iter().map(|&x| v(x)).collect(), cap)
    }

    pub fn with_provenance(
        box_half_width: f64,
        spacing: f64,
        potential: Vec<f64>,
        cap: f64,
        provenance: Provenance,
    ) -> Result<Self, ForgeError> {
        let dim = Self::grid_points(box_half_width, spacing)?.len();
        if !(cap >= 0.0 && cap.is_finite()) {
            return Err(ForgeError::InvalidParameter("cap must be finite and >= 0".into()));
        }
        if potential.len() != dim {
            return Err(ForgeError::DimensionMismatch(dim, potential.len()));
        }
        check_bound(&potential, cap)?;
        Ok(Self {
            box_half_width,
            spacing,
            cap,
            potential,
            provenance,
        })
    }

    pub fn box_half_width(&self) -> f64 {
        self.box_half_width
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn dim(&self) -> usize {
        self.potential.len()
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| -self.box_half_width + (i + 1) as f64 * self.spacing)
            .collect()
    }

    pub fn tridiagonal(&self) -> Tridiagonal {
        let inv_h2 = 1.0 / (self.spacing * self.spacing);
        Tridiagonal::new(
            self.potential.iter().map(|v| 2.0 * inv_h2 + v).collect(),
            vec![-inv_h2; self.dim() - 1],
        )
    }

    /// Keep the grid points strictly inside `(-new_L, new_L)`.
    pub fn truncate(&self, new_box_half_width: f64) -> Result<Self, ForgeError> {
        if new_box_half_width == self.box_half_width {
            return Ok(self.clone());
        }
        let err = ForgeError::Truncation {
            requested: new_box_half_width,
            current: self.box_half_width,
        };
        if !(new_box_half_width > 0.0) || new_box_half_width > self.box_half_width {
            return Err(err);
        }
        let shift = (self.box_half_width - new_box_half_width) / self.spacing;
        if (shift - shift.round()).abs() > 1e-9 * shift.max(1.0) {
            return Err(ForgeError::InvalidGrid(format!(
                "new box {new_box_half_width} is not aligned with spacing {}",
                self.spacing
            )));
        }
        let new_dim = Self::grid_points(new_box_half_width, self.spacing)?.len();
        let start = shift.round() as usize;
        let potential = self.potential[start..start + new_dim].to_vec();
        let mut provenance = self.provenance.clone();
        let original = provenance
            .truncation
            .map_or(self.box_half_width, |t| t.from);
        provenance.truncation = Some(Truncation {
            from: original,
            to: new_box_half_width,
        });
        Ok(Self {
            box_half_width: new_box_half_width,
            spacing: self.spacing,
            cap: self.cap,
            potential,
            provenance,
        })
    }
}

// ---------------------------------------------------------------------------
// Tagged union
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Operator {
    Dense(DenseHermitian),
    Jacobi(JacobiOperator),
    Continuum(ContinuumSchrodinger),
}

impl From<DenseHermitian> for Operator {
    fn from(op: DenseHermitian) -> Self {
        Operator::Dense(op)
    }
}

impl From<JacobiOperator> for Operator {
    fn from(op: JacobiOperator) -> Self {
        Operator::Jacobi(op)
    }
}

impl From<ContinuumSchrodinger> for Operator {
    fn from(op: ContinuumSchrodinger) -> Self {
        Operator::Continuum(op)
    }
}

impl Operator {
    pub fn dim(&self) -> usize {
        match self {
            Operator::Dense(op) => op.dim(),
            Operator::Jacobi(op) => op.dim(),
            Operator::Continuum(op) => op.dim(),
        }
    }

    pub fn basis(&self) -> Basis {
        match self {
            Operator::Dense(op) => Basis::Index { dim: op.dim() },
            Operator::Jacobi(op) => Basis::Sites {
                half_width: op.half_width(),
            },
            Operator::Continuum(op) => Basis::Grid {
                box_half_width: op.box_half_width(),
                spacing: op.spacing(),
            },
        }
    }

    pub fn provenance(&self) -> &Provenance {
        match self {
            Operator::Dense(op) => op.provenance(),
            Operator::Jacobi(op) => op.provenance(),
            Operator::Continuum(op) => op.provenance(),
        }
    }

    pub fn tridiagonal(&self) -> Option<Tridiagonal> {
        match self {
            Operator::Dense(_) => None,
            Operator::Jacobi(op) => Some(op.tridiagonal()),
            Operator::Continuum(op) => Some(op.tridiagonal()),
        }
    }

    /// Dense complex copy of the matrix.
    pub fn to_mat(&self) -> Mat<c64> {
        match self {
            Operator::Dense(op) => op.to_mat(),
            _ => {
                let t = self.tridiagonal().expect("tridiagonal operator");
                let n = t.dim();
                Mat::from_fn(n, n, |i, j| c64::new(t.entry(i, j), 0.0))
            }
        }
    }

    /// Upper bound on the operator norm.
    pub fn norm_bound(&self) -> f64 {
        match self {
            Operator::Dense(op) => op.norm_cap(),
            _ => self.tridiagonal().expect("tridiagonal operator").gershgorin_radius(),
        }
    }

    pub fn apply(&self, u: &[c64]) -> Vec<c64> {
        assert_eq!(u.len(), self.dim(), "dimension mismatch in apply");
        match self {
            Operator::Dense(op) => {
                let n = op.dim();
                (0..n)
                    .map(|i| (0..n).map(|j| op.get(i, j) * u[j]).sum())
                    .collect()
            }
            _ => self.tridiagonal().expect("tridiagonal operator").apply(u),
        }
    }

    /// Short content hash of the serialized operator.
    pub fn fingerprint(&self) -> String {
        hash::short_hash(self)
    }

    /// Central truncation; `new_size` is a half-width (sites or length).
    pub fn truncate(&self, new_size: f64) -> Result<Operator, ForgeError> {
        match self {
            Operator::Dense(_) => Err(ForgeError::InvalidParameter(
                "dense operators have no central window to truncate".into(),
            )),
            Operator::Jacobi(op) => {
                if new_size.fract() != 0.0 || new_size < 1.0 {
                    return Err(ForgeError::Truncation {
                        requested: new_size,
                        current: op.half_width() as f64,
                    });
                }
                Ok(op.truncate(new_size as usize)?.into())
            }
            Operator::Continuum(op) => Ok(op.truncate(new_size)?.into()),
        }
    }
}
