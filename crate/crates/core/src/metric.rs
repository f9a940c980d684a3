//! Metrics on the three operator spaces, truncated to the represented
//! window. Each value comes with an analytic bound on the omitted tail of
//! the series, so `value <= d_true <= value + tail_bound`.

use serde::{Deserialize, Serialize};

use crate::operator::{ContinuumSchrodinger, DenseHermitian, ForgeError, JacobiOperator};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub value: f64,
    pub tail_bound: f64,
}

/// `Σ_{j<basis_order} min(2^{-j}, ‖(T - T')e_j‖)`; the omitted tail is at
/// most `Σ_{j≥m} 2^{-j} = 2^{1-m}`.
pub fn metric_xa(
    a: &DenseHermitian,
    b: &DenseHermitian,
    basis_order: usize,
) -> Result<MetricValue, ForgeError> {
    if a.dim() != b.dim() {
        return Err(ForgeError::DimensionMismatch(a.dim(), b.dim()));
    }
    let n = a.dim();
    if basis_order > n {
        return Err(ForgeError::InvalidParameter(format!(
            "basis order {basis_order} exceeds dimension {n}"
        )));
    }
    let mut value = 0.0;
    for j in 0..basis_order {
        let col = (0..n)
            .map(|i| (a.get(i, j) - b.get(i, j)).norm_sqr())
            .sum::<f64>()
            .sqrt();
        value += col.min(0.5f64.powi(j as i32));
    }
    Ok(MetricValue {
        value,
        tail_bound: 0.5f64.powi(basis_order as i32 - 1),
    })
}

/// Product metric `Σ_j 2^{-|j|} min(1, |v_j - u_j|)` on the window
/// `-N..=N`; the omitted sites contribute at most `2 Σ_{j>N} 2^{-j} = 2^{1-N}`.
pub fn metric_xb_window(v: &[f64], u: &[f64], half_width: usize) -> Result<MetricValue, ForgeError> {
    let dim = 2 * half_width + 1;
    if v.len() != dim || u.len() != dim {
        return Err(ForgeError::DimensionMismatch(v.len(), u.len()));
    }
    let value = v
        .iter()
        .zip(u)
        .enumerate()
        .map(|(i, (a, b))| {
            let j = (i as i64 - half_width as i64).unsigned_abs();
            0.5f64.powi(j as i32) * (a - b).abs().min(1.0)
        })
        .sum();
    Ok(MetricValue {
        value,
        tail_bound: 0.5f64.powi(half_width as i32 - 1),
    })
}

pub fn metric_xb(a: &JacobiOperator, b: &JacobiOperator) -> Result<MetricValue, ForgeError> {
    if a.half_width() != b.half_width() {
        return Err(ForgeError::DimensionMismatch(a.dim(), b.dim()));
    }
    metric_xb_window(a.potential(), b.potential(), a.half_width())
}

/// `Σ_{j=0}^{j_max} min(2^{-j}, sup_{|x|<j} |V - U|)` on a shared grid. The
/// ball `B(0, 0)` is empty, so its seminorm is 0. Tail bound `2^{-j_max}`.
pub fn metric_xc_samples(
    v: &[f64],
    u: &[f64],
    grid: &[f64],
    j_max: u32,
) -> Result<MetricValue, ForgeError> {
    if v.len() != grid.len() || u.len() != grid.len() {
        return Err(ForgeError::DimensionMismatch(v.len(), u.len()));
    }
    let (lo, hi) = grid
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let spacing = if grid.len() > 1 {
        (hi - lo) / (grid.len() - 1) as f64
    } else {
        0.0
    };
    let jm = j_max as f64;
    if grid.is_empty() || lo > -jm + spacing + 1e-12 || hi < jm - spacing - 1e-12 {
        return Err(ForgeError::InvalidGrid(format!(
            "grid [{lo}, {hi}] does not cover B(0, {j_max})"
        )));
    }
    let mut value = 0.0;
    for j in 1..=j_max {
        let r = j as f64;
        let sup = grid
            .iter()
            .zip(v.iter().zip(u))
            .filter(|(x, _)| x.abs() < r)
            .fold(0.0f64, |m, (_, (a, b))| m.max((a - b).abs()));
        value += sup.min(0.5f64.powi(j as i32));
    }
    Ok(MetricValue {
        value,
        tail_bound: 0.5f64.powi(j_max as i32),
    })
}

pub fn metric_xc(
    a: &ContinuumSchrodinger,
    b: &ContinuumSchrodinger,
    j_max: u32,
) -> Result<MetricValue, ForgeError> {
    if a.box_half_width() != b.box_half_width() || a.spacing() != b.spacing() {
        return Err(ForgeError::InvalidGrid("operators live on different grids".into()));
    }
    metric_xc_samples(a.potential(), b.potential(), &a.grid(), j_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use faer::c64;

    fn diag(values: &[f64]) -> DenseHermitian {
        DenseHermitian::diagonal(values, 10.0).unwrap()
    }

    #[test]
    fn xa_identity_and_single_column() {
        let t = diag(&[1.0, 2.0, 3.0]);
        let d = metric_xa(&t, &t, 3).unwrap();
        assert_eq!(d.value, 0.0);
        assert_eq!(d.tail_bound, 0.25);
        let t2 = diag(&[0.0, 2.0, 3.0]);
        assert_eq!(metric_xa(&t, &t2, 3).unwrap().value, 1.0);
    }

    #[test]
    fn xa_matches_direct_summation() {
        let a = DenseHermitian::random(8, 2.0, 1, 0).unwrap();
        let b = DenseHermitian::random(8, 2.0, 1, 1).unwrap();
        // brute force: materialize the difference and sum column norms
        let mut oracle = 0.0;
        for j in 0..8 {
            let mut s = 0.0;
            for i in 0..8 {
                let z: c64 = a.entries()[i * 8 + j] - b.entries()[i * 8 + j];
                s += z.re * z.re + z.im * z.im;
            }
            oracle += s.sqrt().min(2f64.powi(-(j as i32)));
        }
        let d = metric_xa(&a, &b, 8).unwrap();
        assert!((d.value - oracle).abs() < 1e-12);
        assert_eq!(d.tail_bound, 2f64.powi(-7));
    }

    #[test]
    fn xa_errors() {
        let a = diag(&[1.0, 2.0]);
        let b = diag(&[1.0, 2.0, 3.0]);
        assert!(matches!(metric_xa(&a, &b, 2), Err(ForgeError::DimensionMismatch(2, 3))));
        assert!(metric_xa(&a, &a, 3).is_err());
    }

    #[test]
    fn xb_examples() {
        let v = vec![0.0; 21];
        assert_eq!(metric_xb_window(&v, &v, 10).unwrap().value, 0.0);
        let mut u = v.clone();
        u[10] = 3.0;
        assert_eq!(metric_xb_window(&v, &u, 10).unwrap().value, 1.0);
        let u: Vec<f64> = vec![0.25; 21];
        // (1/4)(1 + 2 Σ_{j=1}^{10} 2^{-j}) = (1/4)(3 - 2^{-9})
        let expected = 0.25 * (3.0 - 2f64.powi(-9));
        let d = metric_xb_window(&v, &u, 10).unwrap().value;
        assert!((d - expected).abs() < 1e-15);
        assert!((d - 0.749_511_718_75).abs() < 1e-12);
    }

    #[test]
    fn xb_window_mismatch() {
        assert!(metric_xb_window(&[0.0; 3], &[0.0; 5], 1).is_err());
    }

    #[test]
    fn xc_examples() {
        let grid: Vec<f64> = (-400..=400).map(|i| i as f64 * 0.05).collect();
        let v = vec![0.0; grid.len()];
        assert_eq!(metric_xc_samples(&v, &v, &grid, 20).unwrap().value, 0.0);

        // V - U ≡ 1/4: j=0 gives 0, j=1,2 give 1/4 each, the rest 2^{-j};
        // value + tail -> 3/4.
        let u = vec![0.25; grid.len()];
        let d = metric_xc_samples(&v, &u, &grid, 20).unwrap();
        assert!((d.value + d.tail_bound - 0.75).abs() < 1e-15);
        assert!((d.value - (0.75 - 2f64.powi(-20))).abs() < 1e-15);

        // difference supported outside B(0, 5)
        let u: Vec<f64> = grid.iter().map(|x| if x.abs() >= 5.0 { 1.0 } else { 0.0 }).collect();
        let d = metric_xc_samples(&v, &u, &grid, 5).unwrap();
        assert_eq!(d.value, 0.0);
        assert_eq!(d.tail_bound, 2f64.powi(-5));
    }

    #[test]
    fn xc_grid_too_small() {
        let grid: Vec<f64> = (-10..=10).map(|i| i as f64 * 0.1).collect();
        let v = vec![0.0; grid.len()];
        assert!(matches!(
            metric_xc_samples(&v, &v, &grid, 3),
            Err(ForgeError::InvalidGrid(_))
        ));
    }
}
