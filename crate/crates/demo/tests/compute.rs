use intermittency_demo::compute::{return_probability_curve, spectral_density, vk_ground_state};

fn pairs(v: &[f64]) -> Vec<(f64, f64)> {
    v.chunks(2).map(|c| (c[0], c[1])).collect()
}

#[test]
fn free_curve_decays_and_stops_at_horizon() {
    let c = pairs(&return_probability_curve("free", 512, 0.0, 0, 3.0).unwrap());
    assert_eq!(c[0].0, 1.0);
    assert!((c.last().unwrap().0 - 204.8).abs() < 1e-9);
    assert!(c.last().unwrap().1 < 0.02);
    assert!(c.iter().all(|&(_, v)| v > 0.0 && v <= 1.0));
}

#[test]
fn localized_curve_levels_off() {
    let c = pairs(&return_probability_curve("anderson", 256, 3.0, 4, 2.0).unwrap());
    assert!(c.last().unwrap().1 > 0.1, "{:?}", c.last());
}

#[test]
fn bad_requests_are_errors() {
    assert!(return_probability_curve("wobbly", 64, 0.0, 0, 2.0).is_err());
    assert!(return_probability_curve("free", 100_000, 0.0, 0, 2.0).is_err());
    assert!(spectral_density(64, 1.0, 0, 0, 32).is_err());
    assert!(vk_ground_state(1, 1.0, 200.0, 0.001, 10.0).is_err());
}

#[test]
fn density_is_normalized_inside_the_hull() {
    let d = spectral_density(128, 2.0, 1, 10, 40).unwrap();
    let (lo, hi) = (d[0], d[1]);
    assert_eq!((lo, hi), (-4.0, 4.0));
    let w = (hi - lo) / 40.0;
    let area: f64 = d[2..].iter().map(|x| x * w).sum();
    assert!((area - 1.0).abs() < 1e-12);
}

#[test]
fn vk_ground_state_is_bound_and_normalized() {
    let g = vk_ground_state(1, 1.0, 200.0, 0.05, 200.0).unwrap();
    assert!(g[0] < -1e-6, "{}", g[0]);
    let p = pairs(&g[1..]);
    let dx = p[1].0 - p[0].0;
    let norm: f64 = p.iter().map(|(_, psi)| psi * psi * dx).sum();
    assert!((norm - 1.0).abs() < 1e-2, "{norm}");
}
