//! Relaxation functions against closed forms.

use std::f64::consts::PI;

use rstokes_core::grid::TimeGrid;
use rstokes_core::kernels::MemoryKernel;
use rstokes_core::relaxation::solve_relaxation;
use libm::erfc;

/// `e^{x²} erfc(x)`; continued fraction for large `x`.
fn erfcx(x: f64) -> f64 {
    if x < 5.0 {
        return (x * x).exp() * erfc(x);
    }
    let mut f = x;
    for k in (1..400).rev() {
        f = x + 0.5 * k as f64 / f;
    }
    1.0 / (PI.sqrt() * f)
}

/// For `m(t) = t^{-1/2} / Γ(1/2)` the Laplace transform of `ω` is
/// `1 / (s + λ + λ √s)`; splitting in `z = √s` gives two `erfcx` terms.
fn half_order(lambda: f64, t: f64) -> f64 {
    let d = (lambda * lambda - 4.0 * lambda).sqrt();
    let (z1, z2) = (0.5 * (-lambda + d), 0.5 * (-lambda - d));
    (z1 * erfcx(-z1 * t.sqrt()) - z2 * erfcx(-z2 * t.sqrt())) / (z1 - z2)
}

/// For `m(t) = m0 e^{-d t}`, `(ω, m * ω)` solves a 2x2 linear system.
fn exponential(lambda: f64, m0: f64, d: f64, t: f64) -> f64 {
    let (a11, a12, a21, a22) = (-lambda * (1.0 + m0), lambda * d, m0, -d);
    let s = 0.5 * (a11 + a22);
    let q = (s * s - (a11 * a22 - a12 * a21)).sqrt();
    (s * t).exp() * ((q * t).cosh() + (q * t).sinh() / q * (a11 - s))
}

fn max_error(m: &MemoryKernel, lambda: f64, steps: usize, exact: impl Fn(f64) -> f64) -> f64 {
    let grid = TimeGrid::uniform(1.0, steps).unwrap();
    let w = solve_relaxation(m, lambda, &grid).unwrap();
    grid.nodes()
        .iter()
        .zip(&w)
        .map(|(&t, v)| (v - exact(t)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn half_order_kernel() {
    let m = MemoryKernel::fractional(1.0, 0.5).unwrap();
    let lambda = PI * PI;
    let coarse = max_error(&m, lambda, 1024, |t| half_order(lambda, t));
    let fine = max_error(&m, lambda, 2048, |t| half_order(lambda, t));
    assert!(fine < 1e-3, "{fine}");
    assert!(coarse / fine > 1.7, "{coarse} {fine}");
}

#[test]
fn half_order_oracle_at_origin() {
    assert!((half_order(10.0, 0.0) - 1.0).abs() < 1e-14);
    // reference values of erfcx on both branches
    let v = erfcx(1.0);
    assert!((v - 0.427583576155807).abs() < 1e-12, "{v:.17}");
    assert!((erfcx(3.0) - 0.179001151181390).abs() < 1e-12);
    assert!((erfcx(5.0) - 0.110704637733069).abs() < 1e-12);
}

#[test]
fn exponential_kernel() {
    for (m0, d) in [(1.0, 1.0), (0.3, 4.0)] {
        let m = MemoryKernel::exponential(m0, d).unwrap();
        for lambda in [PI * PI, 4.0 * PI * PI] {
            let e = max_error(&m, lambda, 2048, |t| exponential(lambda, m0, d, t));
            assert!(e < 1e-4, "m0 {m0} d {d} lambda {lambda}: {e}");
        }
    }
}
