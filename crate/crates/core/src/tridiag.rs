//! Real symmetric tridiagonal matrices.
//!
//! Full decompositions go through faer's tridiagonal divide-and-conquer.
//! Single eigenvalues (band edges, ground states) use Sturm-sequence
//! bisection, which is O(n) per probe and needs no O(n²) storage.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{self_adjoint_evd_scratch, tridiagonal_self_adjoint_evd, ComputeEigenvectors};
use faer::{c64, Col, Mat, Par};

#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
}

/// The tridiagonal eigensolver reported failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoConvergence;

impl Tridiagonal {
    /// `off[i]` couples rows `i` and `i + 1`.
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert!(!diag.is_empty(), "empty tridiagonal matrix");
        assert_eq!(off.len() + 1, diag.len(), "off-diagonal length");
        Self { diag, off }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn off(&self) -> &[f64] {
        &self.off
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.diag[i]
        } else if i + 1 == j {
            self.off[i]
        } else if j + 1 == i {
            self.off[j]
        } else {
            0.0
        }
    }

    pub fn apply(&self, u: &[c64]) -> Vec<c64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut acc = u[i] * self.diag[i];
                if i > 0 {
                    acc += u[i - 1] * self.off[i - 1];
                }
                if i + 1 < n {
                    acc += u[i + 1] * self.off[i];
                }
                acc
            })
            .collect()
    }

    /// Gershgorin enclosure `[lo, hi]` of the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.dim();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    pub fn gershgorin_radius(&self) -> f64 {
        let (lo, hi) = self.gershgorin();
        lo.abs().max(hi.abs())
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn sturm_count(&self, x: f64) -> usize {
        let pivmin = f64::MIN_POSITIVE
            * self
                .off
                .iter()
                .fold(1.0f64, |m, &e| m.max(e * e));
        let mut count = 0;
        let mut q = self.diag[0] - x;
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.dim() {
            let e = self.off[i - 1];
            q = self.diag[i] - x - e * e / q;
            if q.abs() < pivmin {
                q = -pivmin;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th smallest eigenvalue (0-based) by bisection, to roughly
    /// machine precision relative to the spectral spread.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        assert!(k < self.dim(), "eigenvalue index out of range");
        let (glo, ghi) = self.gershgorin();
        let spread = (ghi - glo).max(f64::MIN_POSITIVE);
        let mut lo = glo - 1e-12 * spread - f64::MIN_POSITIVE;
        let mut hi = ghi + 1e-12 * spread + f64::MIN_POSITIVE;
        let tol = 2.0 * f64::EPSILON * spread.max(glo.abs()).max(ghi.abs());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= tol {
                break;
            }
            if self.sturm_count(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Smallest and largest eigenvalue.
    pub fn extremes(&self) -> (f64, f64) {
        (self.eigenvalue(0), self.eigenvalue(self.dim() - 1))
    }

    /// Unit eigenvector for a (simple) eigenvalue `lambda` by inverse
    /// iteration. The sign is fixed so the largest component is positive.
    pub fn eigenvector(&self, lambda: f64) -> Vec<f64> {
        let n = self.dim();
        let (glo, ghi) = self.gershgorin();
        let shift = lambda - 1e3 * f64::EPSILON * (ghi - glo).max(1.0);
        let mut x = vec![c64::new(1.0 / (n as f64).sqrt(), 0.0); n];
        for _ in 0..4 {
            let mut y = self
                .solve_shifted(c64::new(shift, 0.0), &x)
                .unwrap_or_else(|| x.clone());
            let norm = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if !(norm > 0.0 && norm.is_finite()) {
                break;
            }
            y.iter_mut().for_each(|z| *z /= norm);
            x = y;
        }
        let mut v: Vec<f64> = x.iter().map(|z| z.re).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let pivot = v
            .iter()
            .copied()
            .fold(0.0f64, |m, a| if a.abs() > m.abs() { a } else { m });
        let s = if pivot < 0.0 { -1.0 } else { 1.0 } / norm;
        v.iter_mut().for_each(|a| *a *= s);
        v
    }

    /// Solves `(T - z) w = rhs` by Gaussian elimination with partial
    /// pivoting (LAPACK `gtsv` ordering). `None` on an exactly zero pivot.
    pub fn solve_shifted(&self, z: c64, rhs: &[c64]) -> Option<Vec<c64>> {
        let n = self.dim();
        assert_eq!(rhs.len(), n, "rhs length");
        let mut d: Vec<c64> = self.diag.iter().map(|&a| c64::new(a, 0.0) - z).collect();
        let mut dl: Vec<c64> = self.off.iter().map(|&a| c64::new(a, 0.0)).collect();
        let mut du = dl.clone();
        let mut b = rhs.to_vec();
        let zero = c64::new(0.0, 0.0);
        for i in 0..n.saturating_sub(1) {
            if d[i].norm() >= dl[i].norm() {
                if d[i] == zero {
                    return None;
                }
                let fact = dl[i] / d[i];
                d[i + 1] -= fact * du[i];
                b[i + 1] = b[i + 1] - fact * b[i];
                dl[i] = zero;
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                let temp = d[i + 1];
                d[i + 1] = du[i] - fact * temp;
                if i + 2 < n {
                    dl[i] = du[i + 1];
                    du[i + 1] = -fact * dl[i];
                } else {
                    dl[i] = zero;
                }
                du[i] = temp;
                let tb = b[i];
                b[i] = b[i + 1];
                b[i + 1] = tb - fact * b[i + 1];
            }
        }
        if d[n - 1] == zero {
            return None;
        }
        b[n - 1] /= d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - du[i] * b[i + 1] - dl[i] * b[i + 2]) / d[i];
        }
        Some(b)
    }

    /// Full eigendecomposition: ascending eigenvalues and orthonormal
    /// eigenvectors as columns.
    pub fn eigen(&self) -> Result<(Vec<f64>, Mat<f64>), NoConvergence> {
        let n = self.dim();
        let (d, e) = self.faer_bands();
        let mut s = Col::<f64>::zeros(n);
        let mut u = Mat::<f64>::zeros(n, n);
        let mut buf = MemBuffer::new(self_adjoint_evd_scratch::<f64>(
            n,
            ComputeEigenvectors::Yes,
            Par::Seq,
            Default::default(),
        ));
        tridiagonal_self_adjoint_evd(
            d.as_diagonal(),
            e.as_diagonal(),
            s.as_diagonal_mut(),
            Some(u.as_mut()),
            Par::Seq,
            MemStack::new(&mut buf),
            Default::default(),
        )
        .map_err(|_| NoConvergence)?;
        Ok(((0..n).map(|i| s[i]).collect(), u))
    }

    /// Eigenvalues and the squared components `|ψ_k(site)|²` of every
    /// eigenvector at one index: implicit QL with Wilkinson shifts, carrying
    /// only row `site` of the rotation product (Golub-Welsch). O(n²) time,
    /// O(n) memory. Output is sorted by eigenvalue.
    pub fn site_weights(&self, site: usize) -> Result<(Vec<f64>, Vec<f64>), NoConvergence> {
        let n = self.dim();
        assert!(site < n, "site outside the matrix");
        let mut d = self.diag.clone();
        let mut e = self.off.clone();
        e.push(0.0);
        let mut z = vec![0.0; n];
        z[site] = 1.0;
        for l in 0..n {
            let mut iter = 0;
            loop {
                let mut m = l;
                while m + 1 < n {
                    let dd = d[m].abs() + d[m + 1].abs();
                    if e[m].abs() <= f64::EPSILON * dd {
                        break;
                    }
                    m += 1;
                }
                if m == l {
                    break;
                }
                iter += 1;
                if iter > 60 {
                    return Err(NoConvergence);
                }
                let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                let mut r = g.hypot(1.0);
                g = d[m] - d[l] + e[l] / (g + r.copysign(g));
                let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
                let mut underflow = false;
                for i in (l..m).rev() {
                    let f = s * e[i];
                    let b = c * e[i];
                    r = f.hypot(g);
                    e[i + 1] = r;
                    if r == 0.0 {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        underflow = true;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                    let zf = z[i + 1];
                    z[i + 1] = s * z[i] + c * zf;
                    z[i] = c * z[i] - s * zf;
                }
                if underflow {
                    continue;
                }
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        }
        let mut pairs: Vec<(f64, f64)> = d.into_iter().zip(z.into_iter().map(|x| x * x)).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(pairs.into_iter().unzip())
    }

    /// Gauss-Legendre rule with `m` nodes on `[-1, 1]`, from the Jacobi
    /// matrix of the Legendre polynomials.
    pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
        assert!(m >= 1, "need at least one node");
        let off = (1..m)
            .map(|k| {
                let k = k as f64;
                k / (4.0 * k * k - 1.0).sqrt()
            })
            .collect();
        let (x, w) = Tridiagonal::new(vec![0.0; m], off)
            .site_weights(0)
            .expect("Legendre Jacobi matrix converges");
        (x, w.into_iter().map(|v| 2.0 * v).collect())
    }

    /// All eigenvalues, ascending, without eigenvectors.
    pub fn eigenvalues(&self) -> Result<Vec<f64>, NoConvergence> {
        let n = self.dim();
        let (d, e) = self.faer_bands();
        let mut s = Col::<f64>::zeros(n);
        let mut buf = MemBuffer::new(self_adjoint_evd_scratch::<f64>(
            n,
            ComputeEigenvectors::No,
            Par::Seq,
            Default::default(),
        ));
        tridiagonal_self_adjoint_evd(
            d.as_diagonal(),
            e.as_diagonal(),
            s.as_diagonal_mut(),
            None,
            Par::Seq,
            MemStack::new(&mut buf),
            Default::default(),
        )
        .map_err(|_| NoConvergence)?;
        let mut out: Vec<f64> = (0..n).map(|i| s[i]).collect();
        out.sort_by(f64::total_cmp);
        Ok(out)
    }

    fn faer_bands(&self) -> (Col<f64>, Col<f64>) {
        let n = self.dim();
        let d = Col::<f64>::from_fn(n, |i| self.diag[i]);
        let e = Col::<f64>::from_fn(n, |i| if i + 1 < n { self.off[i] } else { 0.0 });
        (d, e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hopping(n: usize) -> Tridiagonal {
        Tridiagonal::new(vec![0.0; n], vec![1.0; n - 1])
    }

    fn dirichlet_levels(n: usize) -> Vec<f64> {
        let mut v: Vec<f64> = (1..=n)
            .map(|m| 2.0 * (std::f64::consts::PI * m as f64 / (n as f64 + 1.0)).cos())
            .collect();
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn sturm_count_on_hopping_matrix() {
        let t = hopping(3);
        // spectrum {-√2, 0, √2}
        assert_eq!(t.sturm_count(-2.0), 0);
        assert_eq!(t.sturm_count(-1.0), 1);
        assert_eq!(t.sturm_count(1.0), 2);
        assert_eq!(t.sturm_count(2.0), 3);
    }

    #[test]
    fn bisection_matches_closed_form() {
        let t = hopping(101);
        let exact = dirichlet_levels(101);
        for k in [0, 1, 50, 99, 100] {
            assert!((t.eigenvalue(k) - exact[k]).abs() < 1e-13, "k = {k}");
        }
    }

    #[test]
    fn bisection_agrees_with_faer_on_random_diagonal() {
        let mut rng = crate::rng::substream(5, 0);
        let diag: Vec<f64> = (0..200).map(|_| crate::rng::uniform(&mut rng, -3.0, 3.0)).collect();
        let off: Vec<f64> = (0..199).map(|_| crate::rng::uniform(&mut rng, 0.5, 1.5)).collect();
        let t = Tridiagonal::new(diag, off);
        let all = t.eigenvalues().unwrap();
        let (lo, hi) = t.extremes();
        assert!((lo - all[0]).abs() < 1e-12);
        assert!((hi - all[199]).abs() < 1e-12);
        assert!((t.eigenvalue(77) - all[77]).abs() < 1e-12);
    }

    #[test]
    fn inverse_iteration_recovers_eigenvector() {
        // with +1 hopping the top state is the nodeless one
        let t = hopping(41);
        let lam = t.eigenvalue(40);
        let v = t.eigenvector(lam);
        let tv = t.apply(&v.iter().map(|&a| c64::new(a, 0.0)).collect::<Vec<_>>());
        let resid: f64 = tv
            .iter()
            .zip(&v)
            .map(|(a, &b)| (a.re - lam * b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(resid < 1e-10, "residual {resid}");
        assert!(v.iter().all(|&a| a > 0.0), "top state has one sign");
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = Tridiagonal::gauss_legendre(10);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        // degree 18 is within the 2m - 1 exactness range
        let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert!((q - 2.0 / 19.0).abs() < 1e-14, "{q}");
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn site_weights_match_full_eigenvectors() {
        let mut rng = crate::rng::substream(3, 0);
        let n = 151;
        // symmetric potential gives near-degenerate parity pairs
        let half: Vec<f64> = (0..76).map(|_| crate::rng::uniform(&mut rng, -3.0, 3.0)).collect();
        let diag: Vec<f64> = (0..n).map(|i| half[(i as i64 - 75).unsigned_abs() as usize]).collect();
        let t = Tridiagonal::new(diag, vec![1.0; n - 1]);
        let (vals, u) = t.eigen().unwrap();
        for site in [0, 75, 100] {
            let (lam, w) = t.site_weights(site).unwrap();
            for k in 0..n {
                assert!((lam[k] - vals[k]).abs() < 1e-11);
            }
            // compare weights summed over clusters that eigensolvers may mix
            let mut k = 0;
            while k < n {
                let mut j = k + 1;
                while j < n && vals[j] - vals[j - 1] < 1e-8 {
                    j += 1;
                }
                let a: f64 = w[k..j].iter().sum();
                let b: f64 = (k..j).map(|q| u[(site, q)].powi(2)).sum();
                assert!((a - b).abs() < 1e-10, "site {site} level {k}: {a} vs {b}");
                k = j;
            }
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn shifted_solve_with_pivoting() {
        // zero diagonal forces row interchanges
        let t = hopping(6);
        let rhs: Vec<c64> = (0..6).map(|i| c64::new(i as f64, 1.0 - i as f64)).collect();
        let z = c64::new(0.0, 1e-3);
        let w = t.solve_shifted(z, &rhs).unwrap();
        let tw = t.apply(&w);
        for i in 0..6 {
            let r = tw[i] - z * w[i] - rhs[i];
            assert!(r.norm() < 1e-9, "row {i}: {r}");
        }
    }

    #[test]
    fn faer_decomposition_is_orthonormal() {
        let t = hopping(30);
        let (vals, vecs) = t.eigen().unwrap();
        let exact = dirichlet_levels(30);
        for (a, b) in vals.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-12);
        }
        let gram = vecs.transpose() * &vecs;
        for i in 0..30 {
            for j in 0..30 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - target).abs() < 1e-12);
            }
        }
    }
}
