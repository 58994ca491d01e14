use std::f64::consts::PI;

use trotter_dgge::exact_small::evolve_and_average;
use trotter_dgge::free_fermion::*;
use trotter_dgge::params::{derive_params, ModelParams};

#[test]
fn mode_sum_matches_dense_evolution() {
    for &(d, t) in &[(2.0, PI), (4.0, PI / 2.0), (0.0, 0.7), (2.5, 0.8 * PI)] {
        let spec = FreePointSpec::new(d, t).unwrap();
        for l in [8, 10] {
            let pr = derive_params(&ModelParams::new(d, t)).unwrap();
            let ev = evolve_and_average(&pr, l, 50, (0, 50)).unwrap();
            let ff = magnetization_series(&spec, l, 50).unwrap();
            for s in 0..=50 {
                for j in 0..l {
                    assert!((ev.sz[s][j] - ff[s][j % 2]).abs() < 1e-10, "{d} {t} L={l} t={s} j={j}");
                }
            }
        }
    }
}

#[test]
fn single_time_equals_series() {
    let spec = FreePointSpec::new(4.0, PI / 2.0).unwrap();
    let ser = magnetization_series(&spec, 20, 37).unwrap();
    let one = magnetization_time(&spec, 20, 37).unwrap();
    assert!((one[0] - ser[37][0]).abs() < 1e-12 && (one[1] - ser[37][1]).abs() < 1e-12);
    let t0 = magnetization_time(&spec, 20, 0).unwrap();
    assert!(t0.iter().enumerate().all(|(j, v)| *v == if j % 2 == 0 { 1.0 } else { -1.0 }));
}

#[test]
fn slow_drive_relaxes() {
    let spec = FreePointSpec::new(0.0, 0.01).unwrap();
    let ser = magnetization_series(&spec, 2000, 10_000).unwrap();
    let tail = ser[1000..].iter().map(|m| m[0]).sum::<f64>() / 9001.0;
    assert!(tail.abs() < 1e-3, "{tail}");
}

#[test]
fn neel_filling() {
    let spec = FreePointSpec::new(0.0, 1.1).unwrap();
    let n = 10_000;
    let h = 2.0 * PI / n as f64;
    let total: f64 = (0..n).map(|i| neel_density(&spec, -PI + (i as f64 + 0.5) * h)).sum::<f64>() * h;
    assert!((total - 0.5).abs() < 1e-10);
}

#[test]
fn velocity_branch_matches_shift_form() {
    let spec = FreePointSpec::new(0.0, 0.9).unwrap();
    let sh = spec.sinh_ix();
    for i in 1..60 {
        let k = -PI + i as f64 * 0.1043;
        let s = k.sin() * sh / (1.0 + (k.sin() * sh).powi(2)).sqrt();
        assert!((group_velocity(&spec, k) + 2.0 * s).abs() < 1e-10, "k={k}");
    }
}

#[test]
fn current_vanishes_without_drive_asymmetry() {
    let spec = FreePointSpec::new(0.0, 1e-6).unwrap();
    assert!(current_asymptotic_neel(&spec).ghd.abs() < 1e-10);
}
