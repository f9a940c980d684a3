// Point mass of ξ_k = ξ + ξ₀/k at a simple eigenvalue, with ξ ⊥ ξ₀ and ξ₀
// the unit eigenvector: the mass is exactly 1/k² and ‖ξ_k − ξ‖ = 1/k.

use serde::{Deserialize, Serialize};

use super::{require, Check, ExperimentError, Outcome, Table, Verdict};
use crate::evolve::{eigendecompose, spectral_measure, StateVector};
use crate::measure::DEGENERACY_TOL;
use crate::operator::{DenseHermitian, Operator};
use crate::{c64, rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigenweightConfig {
    pub dim: usize,
    pub norm_cap: f64,
    /// Index of λ in the ascending spectrum; `dim / 2` when absent.
    pub eigen_index: Option<usize>,
    pub k_max: u32,
    /// Component along ξ₀ in the direct control `ξ + c ξ₀`.
    pub direct_component: f64,
    pub tolerance: f64,
}

impl Default for EigenweightConfig {
    fn default() -> Self {
        Self {
            dim: 8,
            norm_cap: 1.0,
            eigen_index: None,
            k_max: 10,
            direct_component: 0.3,
            tolerance: 1e-10,
        }
    }
}

pub(super) fn run(cfg: &EigenweightConfig, seed: u64) -> Result<Outcome, ExperimentError> {
    require(cfg.dim >= 2, "dim must be at least 2")?;
    require(cfg.k_max >= 1, "k_max must be at least 1")?;
    require(cfg.tolerance > 0.0, "tolerance must be positive")?;
    let index = cfg.eigen_index.unwrap_or(cfg.dim / 2);
    require(index < cfg.dim, format!("eigen_index {index} outside dimension {}", cfg.dim))?;

    let op: Operator = DenseHermitian::random(cfg.dim, cfg.norm_cap, seed, 0)?.into();
    let basis = op.basis();
    let es = eigendecompose(&op)?;
    let lams = es.eigenvalues();
    let lambda = lams[index];
    let gap = [index.checked_sub(1), Some(index + 1)]
        .into_iter()
        .flatten()
        .filter(|&j| j < lams.len())
        .map(|j| (lams[j] - lambda).abs())
        .fold(f64::INFINITY, f64::min);
    let simple = gap > DEGENERACY_TOL;

    let xi0 = es.eigenvector(index);
    // random direction with the ξ₀ component projected out
    let mut stream = rng::substream(seed, 1);
    let raw: Vec<c64> = (0..cfg.dim)
        .map(|_| c64::new(rng::normal(&mut stream), rng::normal(&mut stream)))
        .collect();
    let raw = StateVector::new(raw, basis.clone())?;
    let xi = raw.add_scaled(-xi0.inner(&raw), &xi0).normalized()?;

    let mut out = Outcome::default();
    let mut table = Table::new("weights", &["k", "weight", "expected_weight", "distance", "expected_distance"]);
    let mut worst_w: f64 = 0.0;
    let mut worst_d: f64 = 0.0;
    for k in 1..=cfg.k_max {
        let kf = k as f64;
        let xik = xi.add_scaled(c64::new(1.0 / kf, 0.0), &xi0);
        let w = spectral_measure(&es, &xik)?.point_mass(lambda);
        let d = xik.distance(&xi);
        worst_w = worst_w.max((w - 1.0 / (kf * kf)).abs());
        worst_d = worst_d.max((d - 1.0 / kf).abs());
        table.push(vec![kf, w, 1.0 / (kf * kf), d, 1.0 / kf]);
    }
    let verdict = if !simple {
        Verdict::Inconclusive
    } else {
        Verdict::from_bool(worst_w <= cfg.tolerance && worst_d <= cfg.tolerance)
    };
    let mut main = Check::new("weight_is_inverse_square", verdict)
        .with("lambda", lambda)
        .with("spectral_gap", gap)
        .with("max_weight_error", worst_w)
        .with("max_distance_error", worst_d)
        .with("tolerance", cfg.tolerance);
    if !simple {
        main = main.note("eigenvalue is degenerate; grouped weight used");
    }
    out.checks.push(main);

    // ξ + c ξ₀ directly: weight equals c² for a simple eigenvalue
    let c = cfg.direct_component;
    let direct = xi.add_scaled(c64::new(c, 0.0), &xi0);
    let wd = spectral_measure(&es, &direct)?.point_mass(lambda);
    out.checks.push(
        Check::control("direct_component_weight", Verdict::from_bool((wd - c * c).abs() <= cfg.tolerance))
            .with("weight", wd)
            .with("component_norm_sq", c * c),
    );

    let we = spectral_measure(&es, &xi0)?.point_mass(lambda);
    out.checks.push(
        Check::control("eigenvector_weight_is_one", Verdict::from_bool((we - 1.0).abs() <= cfg.tolerance))
            .with("weight", we),
    );

    out.key("lambda", lambda);
    out.key("max_weight_error", worst_w);
    out.tables.push(table);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k2_gives_quarter_and_k10_gives_hundredth() {
        let out = run(&EigenweightConfig::default(), 1).unwrap();
        let rows = &out.tables[0].rows;
        assert!((rows[1][1] - 0.25).abs() < 1e-10);
        assert!((rows[9][1] - 0.01).abs() < 1e-10);
        assert!((rows[9][3] - 0.1).abs() < 1e-10);
        assert!(out.checks.iter().all(|c| c.verdict == Verdict::Pass));
    }

    #[test]
    fn bad_index_is_a_config_error() {
        let cfg = EigenweightConfig {
            eigen_index: Some(8),
            ..Default::default()
        };
        assert!(matches!(run(&cfg, 1), Err(ExperimentError::InvalidConfig(_))));
    }
}
