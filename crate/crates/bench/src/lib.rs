//! Fixtures shared by the benchmarks.

use std::f64::consts::PI;
use std::sync::Arc;

use rstokes_core::inverse::{forward_simulate, InverseProblemSpec, PsiDerivative, DEFAULT_PAIRING_FLOOR};
use rstokes_core::kernels::{HistoryKernel, MemoryKernel};
use rstokes_core::mild::{NonlinearitySpec, PicardOptions};
use rstokes_core::resolvent::ResolventContext;
use rstokes_core::spectral::{build_basis, Domain, SpectralBasis, SpectralField};
use rstokes_core::TimeGrid;

pub fn interval(modes: usize) -> Arc<SpectralBasis> {
    build_basis(Domain::interval(1.0).unwrap(), modes).unwrap()
}

pub fn fractional() -> MemoryKernel {
    MemoryKernel::fractional(1.0, 0.5).unwrap()
}

/// Small-data cubic problem with an exponential history kernel.
pub fn mild_problem(basis: &Arc<SpectralBasis>) -> (NonlinearitySpec, HistoryKernel, SpectralField) {
    let spec = NonlinearitySpec::power_advection(basis, 3.0, false, vec![0.2], 0.5).unwrap();
    let l = HistoryKernel::exponential(1.0, 1.0).unwrap();
    let mut xi = SpectralField::zeros(basis.clone());
    xi.coeffs_mut()[0] = 0.01;
    xi.coeffs_mut()[1] = 0.005;
    (spec, l, xi)
}

pub fn inverse_problem(ctx: &ResolventContext) -> InverseProblemSpec {
    let basis = ctx.basis().clone();
    let mut g = SpectralField::zeros(basis.clone());
    g.coeffs_mut()[0] = 1.0;
    g.coeffs_mut()[1] = 0.5;
    let kappa = SpectralField::mode(basis.clone(), 0).unwrap();
    let xi = SpectralField::zeros(basis);
    let f1 = NonlinearitySpec::zero(1.0, 0.5).unwrap();
    let p: Vec<f64> = ctx.grid().nodes().iter().map(|t| 1.0 + (2.0 * PI * t).sin()).collect();
    let fwd = forward_simulate(ctx, &g, &kappa, &f1, &xi, &p, &PicardOptions::default()).unwrap();
    InverseProblemSpec {
        g,
        kappa,
        psi: fwd.psi,
        psi_derivative: PsiDerivative::FiniteDifference,
        f1,
        xi,
        pairing_floor: DEFAULT_PAIRING_FLOOR,
        consistency_tol: 1e-10,
    }
}

pub fn grid(steps: usize) -> TimeGrid {
    TimeGrid::uniform(1.0, steps).unwrap()
}
