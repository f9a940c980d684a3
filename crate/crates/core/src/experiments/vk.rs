// Ground state of -Δ + V_k on a box. The -C/((k+1)(|x|+1)) tail binds a
// level below zero; halving h and doubling L must move it by less than the
// stability tolerance for the level to count as converged.

use serde::{Deserialize, Serialize};

use super::{require, Check, ExperimentError, Outcome, Table, Verdict};
use crate::forge::vk_operator;
use crate::operator::ContinuumSchrodinger;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BasePotential {
    Zero,
    Constant { value: f64 },
    /// `-depth · exp(-x²/(2 width²))`.
    Gaussian { depth: f64, width: f64 },
}

impl BasePotential {
    fn eval(&self, x: f64) -> f64 {
        match *self {
            BasePotential::Zero => 0.0,
            BasePotential::Constant { value } => value,
            BasePotential::Gaussian { depth, width } => -depth * (-x * x / (2.0 * width * width)).exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VkConfig {
    pub potential: BasePotential,
    pub cap: f64,
    pub k: u32,
    pub box_half_width: f64,
    pub spacing: f64,
    /// Energy that counts as bound.
    pub bound_threshold: f64,
    /// Relative change allowed under h → h/2 and L → 2L.
    pub stability: f64,
    pub control_threshold: f64,
    /// Half-width of the window the ground-state profile is written on.
    pub profile_half_width: f64,
    pub profile_points: usize,
}

impl Default for VkConfig {
    fn default() -> Self {
        Self {
            potential: BasePotential::Zero,
            cap: 1.0,
            k: 1,
            box_half_width: 200.0,
            spacing: 0.05,
            bound_threshold: -1e-6,
            stability: 0.2,
            control_threshold: -1e-9,
            profile_half_width: 50.0,
            profile_points: 201,
        }
    }
}

fn ground(cfg: &VkConfig, box_half_width: f64, spacing: f64) -> Result<(ContinuumSchrodinger, f64), ExperimentError> {
    let op = vk_operator(box_half_width, spacing, cfg.cap, cfg.k, |x| cfg.potential.eval(x))?;
    let e = op.tridiagonal().eigenvalue(0);
    Ok((op, e))
}

pub(super) fn run(cfg: &VkConfig, _seed: u64) -> Result<Outcome, ExperimentError> {
    require(cfg.box_half_width >= 200.0, "box half-width must be at least 200")?;
    require(cfg.spacing > 0.0 && cfg.spacing <= 0.05, "spacing must lie in (0, 0.05]")?;
    require(cfg.stability > 0.0, "stability tolerance must be positive")?;
    let (op, e0) = ground(cfg, cfg.box_half_width, cfg.spacing)?;
    let (_, e_fine) = ground(cfg, cfg.box_half_width, cfg.spacing / 2.0)?;
    let (_, e_wide) = ground(cfg, 2.0 * cfg.box_half_width, cfg.spacing)?;
    let rel = |e: f64| (e - e0).abs() / e0.abs().max(f64::MIN_POSITIVE);
    let (d_fine, d_wide) = (rel(e_fine), rel(e_wide));
    let stable = d_fine <= cfg.stability && d_wide <= cfg.stability;

    let verdict = if e0 >= cfg.bound_threshold {
        Verdict::Fail
    } else if !stable {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    };
    let mut check = Check::new("negative_ground_energy", verdict)
        .with("ground_energy", e0)
        .with("ground_energy_half_spacing", e_fine)
        .with("ground_energy_double_box", e_wide)
        .with("relative_change_half_spacing", d_fine)
        .with("relative_change_double_box", d_wide)
        .with("threshold", cfg.bound_threshold)
        .with("stability", cfg.stability);
    if verdict == Verdict::Inconclusive {
        check = check.note("level not converged under grid refinement");
    }

    // V_k replaced by zero: the Dirichlet Laplacian is positive
    let zero = ContinuumSchrodinger::from_fn(cfg.box_half_width, cfg.spacing, cfg.cap, |_| 0.0)?;
    let ez = zero.tridiagonal().eigenvalue(0);
    let control = Check::control("zero_potential_unbound", Verdict::from_bool(ez >= cfg.control_threshold))
        .with("ground_energy", ez)
        .with("threshold", cfg.control_threshold);

    let t = op.tridiagonal();
    let psi = t.eigenvector(e0);
    let h = cfg.spacing;
    let mut profile = Table::new("ground_state", &["x", "psi", "potential"]);
    let grid = op.grid();
    let m = cfg.profile_points.max(2);
    let half = cfg.profile_half_width.min(cfg.box_half_width - h);
    for j in 0..m {
        let x = -half + 2.0 * half * j as f64 / (m - 1) as f64;
        let i = (((x + cfg.box_half_width) / h).round() as usize).clamp(1, grid.len()) - 1;
        // continuum normalization ∫ψ² dx = 1
        profile.push(vec![grid[i], psi[i] / h.sqrt(), op.potential()[i]]);
    }

    let mut out = Outcome::default();
    out.checks.push(check);
    out.checks.push(control);
    out.key("ground_energy", e0);
    out.key("relative_change_half_spacing", d_fine);
    out.key("relative_change_double_box", d_wide);
    out.tables.push(profile);
    Ok(out)
}
