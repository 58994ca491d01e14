use std::f64::consts::PI;

use proptest::prelude::*;
use trotter_dgge::exact_small::{build_floquet, evolve_and_average};
use trotter_dgge::free_fermion::{free_modes, FreePointSpec};
use trotter_dgge::kernels::{a_n_gapped_re, a_nm_gapped_re};
use trotter_dgge::observables::{gaudin_matrix, FiniteVolumeInput};
use trotter_dgge::params::{derive_params, threshold_tau, ModelParams};
use trotter_dgge::tba_gapped::afrak;
use trotter_dgge::C64;

proptest! {
    #[test]
    fn gapped_kernels_even_and_periodic(n in 1usize..12, m in 1usize..12, l in -3.0f64..3.0, eta in 0.05f64..3.0) {
        let a = a_n_gapped_re(n, l, eta);
        prop_assert!(a > 0.0);
        prop_assert!((a - a_n_gapped_re(n, -l, eta)).abs() < 1e-12 * a.max(1.0));
        prop_assert!((a - a_n_gapped_re(n, l + PI, eta)).abs() < 1e-9 * a.max(1.0));
        let b = a_nm_gapped_re(n, m, l, eta);
        prop_assert!((b - a_nm_gapped_re(m, n, l, eta)).abs() < 1e-12 * b.abs().max(1.0));
    }

    #[test]
    fn gapped_params_consistent(delta in 1.1f64..5.0, frac in 0.02f64..0.95) {
        let tau = frac * threshold_tau(delta);
        let p = derive_params(&ModelParams::new(delta, tau)).unwrap();
        prop_assume!(p.is_gapped());
        prop_assert!(p.eta.unwrap() >= 0.0);
        let (r1, r2) = p.residuals();
        prop_assert!(r1 < 1e-9 && r2 < 1e-9, "{r1} {r2}");
    }

    #[test]
    fn afrak_reflection(delta in 1.5f64..4.0, frac in 0.05f64..0.9, l in -1.5f64..1.5) {
        let p = derive_params(&ModelParams::new(delta, frac * threshold_tau(delta))).unwrap();
        prop_assume!(p.is_gapped() && l.abs() > 1e-3);
        let l = C64::new(l, 0.0);
        let prod = afrak(l, &p).unwrap() * afrak(-l, &p).unwrap();
        prop_assert!((prod - 1.0).norm() < 1e-10);
    }

    #[test]
    fn free_occupations_complementary(n in 1i64..4, delta in 0.5f64..6.0, half in 2usize..40) {
        let tau = 2.0 * PI * n as f64 / delta;
        prop_assume!(tau < 2.0 * PI - 1e-3);
        let spec = FreePointSpec::new(delta, tau).unwrap();
        let m = free_modes(&spec, 2 * half).unwrap();
        let (c, s) = ((tau / 2.0).cos(), (tau / 2.0).sin());
        for i in 0..m.k.len() {
            prop_assert!((m.n_k[i] + m.n_k_minus_pi[i] - 1.0).abs() < 1e-12);
            prop_assert!(m.epsilon[i] >= 0.0);
            let a = c * c - (2.0 * m.k[i]).cos() * s * s;
            prop_assert!((m.epsilon[i].cos() - a).abs() < 1e-10);
        }
    }

    #[test]
    fn gaudin_symmetric(re in proptest::collection::vec(-1.5f64..1.5, 1..5), l in 3usize..8) {
        let p = derive_params(&ModelParams::new(2.5, 2.15)).unwrap();
        let roots: Vec<C64> = re.iter().map(|&r| C64::new(r, 0.0)).collect();
        let input = FiniteVolumeInput { roots, l: 2 * l, params: p, parity: 0 };
        if let Ok(g) = gaudin_matrix(&input) {
            prop_assert!((g.clone() - g.transpose()).norm() < 1e-10 * g.norm().max(1.0));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn floquet_unitary(delta in -4.0f64..4.0, tau in 0.0f64..6.0) {
        let p = derive_params(&ModelParams::new(delta, tau));
        prop_assume!(p.is_ok());
        let u = build_floquet(&p.unwrap(), 6).unwrap();
        prop_assert!(u.unitarity_error() < 1e-12);
    }

    #[test]
    fn neel_evolution_antisymmetric(delta in -4.0f64..4.0, tau in 0.05f64..6.0) {
        let p = derive_params(&ModelParams::new(delta, tau));
        prop_assume!(p.is_ok());
        let ev = evolve_and_average(&p.unwrap(), 6, 40, (0, 40)).unwrap();
        prop_assert!(ev.antisymmetry < 1e-12);
        prop_assert!(ev.staggered.iter().all(|s| s.abs() <= 1.0 + 1e-12));
    }
}
