use proptest::prelude::*;

use rstokes_core::grid::TimeGrid;
use rstokes_core::inverse::derivative_psi;
use rstokes_core::kernels::MemoryKernel;
use rstokes_core::relaxation::solve_relaxation;
use rstokes_core::resolvent::{apply_S, ResolventContext};
use rstokes_core::spectral::{build_basis, hnorm, Domain, SpectralField};

fn kernel() -> impl Strategy<Value = MemoryKernel> {
    prop_oneof![
        Just(MemoryKernel::Zero),
        (0.0..3.0f64).prop_map(|m0| MemoryKernel::constant(m0).unwrap()),
        (0.1..3.0f64, 0.1..5.0f64).prop_map(|(m0, c)| MemoryKernel::exponential(m0, c).unwrap()),
        (0.1..2.0f64, 0.2..0.9f64).prop_map(|(m0, a)| MemoryKernel::fractional(m0, a).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn relaxation_stays_in_unit_interval(m in kernel(), lambda in 0.1..2000.0f64) {
        let grid = TimeGrid::uniform(1.0, 128).unwrap();
        let w = solve_relaxation(&m, lambda, &grid).unwrap();
        prop_assert_eq!(w[0], 1.0);
        for v in &w {
            prop_assert!(*v > -1e-12 && *v <= 1.0 + 1e-12, "{}", v);
        }
    }

    #[test]
    fn resolvent_does_not_grow(m in kernel(), coeffs in prop::collection::vec(-1.0..1.0f64, 8), mu in -1.0..2.0f64) {
        let basis = build_basis(Domain::interval(1.0).unwrap(), 8).unwrap();
        let grid = TimeGrid::uniform(1.0, 64).unwrap();
        let ctx = ResolventContext::new(basis.clone(), m, &grid).unwrap();
        let xi = SpectralField::new(basis, coeffs).unwrap();
        let start = hnorm(&xi, mu);
        for i in [1, 8, 64] {
            let v = apply_S(&ctx, i, &xi).unwrap();
            prop_assert!(hnorm(&v, mu) <= start * (1.0 + 1e-12) + 1e-15);
        }
    }

    #[test]
    fn differences_are_exact_for_quadratics(
        a in -5.0..5.0f64,
        b in -5.0..5.0f64,
        c in -5.0..5.0f64,
        steps in 3usize..40,
        exponent in 1.0..3.0f64,
    ) {
        let grid = TimeGrid::graded(2.0, steps, exponent).unwrap();
        let psi: Vec<f64> = grid.nodes().iter().map(|t| a + b * t + c * t * t).collect();
        let d = derivative_psi(&psi, &grid).unwrap();
        for (t, v) in grid.nodes().iter().zip(&d) {
            prop_assert!((v - (b + 2.0 * c * t)).abs() < 1e-8 * (1.0 + b.abs() + c.abs()));
        }
    }

    #[test]
    fn norm_is_homogeneous(coeffs in prop::collection::vec(-1.0..1.0f64, 6), s in -3.0..3.0f64, rho in -2.0..2.0f64) {
        let basis = build_basis(Domain::rectangle(1.0, 2.0).unwrap(), 6).unwrap();
        let u = SpectralField::new(basis, coeffs).unwrap();
        let lhs = hnorm(&u.scaled(s), rho);
        prop_assert!((lhs - s.abs() * hnorm(&u, rho)).abs() <= 1e-12 * (1.0 + lhs));
    }
}
