//! Browser front end. Each export returns a flat `Float64Array`; the plain
//! Rust functions in [`compute`] do the work and are tested natively.

use wasm_bindgen::prelude::*;

pub mod compute {
    use intermittency_core::evolve::basis_measure;
    use intermittency_core::forge::{
        build_free_laplacian, sample_anderson_realization, sparse_barriers, vk_operator, AndersonSpec,
    };
    use intermittency_core::observables::return_probability_series;
    use intermittency_core::{Operator, TimeGrid};

    /// Largest window the page may request; keeps each call well under a second.
    pub const MAX_HALF_WIDTH: usize = 4096;

    fn lattice(family: &str, half_width: usize, disorder: f64, seed: u64) -> Result<Operator, String> {
        if half_width == 0 || half_width > MAX_HALF_WIDTH {
            return Err(format!("half-width must lie in 1..={MAX_HALF_WIDTH}"));
        }
        let op: Operator = match family {
            "free" => build_free_laplacian(half_width).map_err(|e| e.to_string())?.into(),
            "anderson" => sample_anderson_realization(&AndersonSpec::uniform(half_width, disorder, seed), 0)
                .map_err(|e| e.to_string())?
                .into(),
            "barriers" => sparse_barriers(half_width, disorder, 5).map_err(|e| e.to_string())?.into(),
            _ => return Err(format!("unknown family {family}")),
        };
        Ok(op)
    }

    /// Time-averaged return probability of e_0, as `[t_0, v_0, t_1, v_1, ..]`.
    /// The grid stops at the window's light-cone horizon.
    pub fn return_probability_curve(
        family: &str,
        half_width: usize,
        disorder: f64,
        seed: u64,
        log_t_max: f64,
    ) -> Result<Vec<f64>, String> {
        let op = lattice(family, half_width, disorder, seed)?;
        let horizon = 0.8 * half_width as f64 / 2.0;
        let t_max = 10f64.powf(log_t_max).min(horizon);
        let grid = TimeGrid::new(1.0, t_max, 24).map_err(|e| e.to_string())?;
        let mu = basis_measure(&op, half_width).map_err(|e| e.to_string())?;
        let s = return_probability_series(&mu, &grid.times(), "", "e0").map_err(|e| e.to_string())?;
        Ok(s.times.iter().zip(&s.values).flat_map(|(&t, &v)| [t, v]).collect())
    }

    /// Histogram of pooled Anderson eigenvalues on `[-2-b, 2+b]`, normalized
    /// to unit area. Returns `[lo, hi, d_0, d_1, ..]`.
    pub fn spectral_density(
        half_width: usize,
        disorder: f64,
        seed: u64,
        realizations: usize,
        bins: usize,
    ) -> Result<Vec<f64>, String> {
        if !(1..=200).contains(&realizations) || !(4..=400).contains(&bins) {
            return Err("realizations must lie in 1..=200 and bins in 4..=400".into());
        }
        if half_width > 1024 {
            return Err("half-width must be at most 1024".into());
        }
        let spec = AndersonSpec::uniform(half_width, disorder, seed);
        let (lo, hi) = (-2.0 - disorder, 2.0 + disorder);
        let mut counts = vec![0.0; bins];
        let mut total = 0.0;
        for i in 0..realizations {
            let op = sample_anderson_realization(&spec, i as u64).map_err(|e| e.to_string())?;
            let evs = op.tridiagonal().eigenvalues().map_err(|e| format!("{e:?}"))?;
            for e in evs {
                let k = (((e - lo) / (hi - lo)) * bins as f64).floor();
                counts[(k.max(0.0) as usize).min(bins - 1)] += 1.0;
                total += 1.0;
            }
        }
        let width = (hi - lo) / bins as f64;
        let mut out = vec![lo, hi];
        out.extend(counts.iter().map(|c| c / (total * width)));
        Ok(out)
    }

    /// Ground state of -Δ + V_k with V ≡ 0: `[E_0, x_0, ψ_0, x_1, ψ_1, ..]`
    /// on the central `|x| ≤ window`, with ∫ψ² dx = 1.
    pub fn vk_ground_state(
        k: u32,
        cap: f64,
        box_half_width: f64,
        spacing: f64,
        window: f64,
    ) -> Result<Vec<f64>, String> {
        if !(box_half_width <= 400.0 && spacing >= 0.01) {
            return Err("box half-width must be at most 400 and spacing at least 0.01".into());
        }
        let op = vk_operator(box_half_width, spacing, cap, k, |_| 0.0).map_err(|e| e.to_string())?;
        let t = op.tridiagonal();
        let e0 = t.eigenvalue(0);
        let psi = t.eigenvector(e0);
        let sign = if psi[psi.len() / 2] < 0.0 { -1.0 } else { 1.0 };
        let mut out = vec![e0];
        let stride = (psi.len() / 600).max(1);
        for (i, x) in op.grid().into_iter().enumerate().step_by(stride) {
            if x.abs() <= window {
                out.extend([x, sign * psi[i] / spacing.sqrt()]);
            }
        }
        Ok(out)
    }
}

fn js<T>(r: Result<T, String>) -> Result<T, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn return_probability_curve(
    family: &str,
    half_width: u32,
    disorder: f64,
    seed: u32,
    log_t_max: f64,
) -> Result<Vec<f64>, JsError> {
    js(compute::return_probability_curve(family, half_width as usize, disorder, seed as u64, log_t_max))
}

#[wasm_bindgen]
pub fn spectral_density(
    half_width: u32,
    disorder: f64,
    seed: u32,
    realizations: u32,
    bins: u32,
) -> Result<Vec<f64>, JsError> {
    js(compute::spectral_density(
        half_width as usize,
        disorder,
        seed as u64,
        realizations as usize,
        bins as usize,
    ))
}

#[wasm_bindgen]
pub fn vk_ground_state(k: u32, cap: f64, box_half_width: f64, spacing: f64, window: f64) -> Result<Vec<f64>, JsError> {
    js(compute::vk_ground_state(k, cap, box_half_width, spacing, window))
}
