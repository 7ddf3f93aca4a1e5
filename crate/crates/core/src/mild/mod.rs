//! Mild solutions `u(t) = S(t)ξ + ∫_0^t S(t-τ) f(u(τ), Hu(τ)) dτ` by Picard
//! iteration, the history operator `H v = ℓ * v`, the hypothesis checks of the
//! existence and regularity results, and the weighted Hölder seminorm.

mod checks;
mod holder;
mod nonlinearity;

pub use checks::{
    check_holder, check_regular_forcing, check_small_data, check_weighted_contraction,
    choose_beta, select_radius, ConvolutionBound, Decision, RadiusChoice,
};
pub use holder::{holder_estimate, HolderReport};
pub use nonlinearity::{
    evaluate_f, sup_norm_constant, Curve, CustomFn, Lipschitz, Nonlinearity, NonlinearitySpec,
};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::kernels::HistoryKernel;
use crate::product::ProductWeights;
use crate::resolvent::{from_mode_major, to_mode_major, ResolventContext};
use crate::spectral::{hnorm_coeffs, SpectralField};

/// Precomputed product weights of `ℓ` on a grid.
#[derive(Clone, Debug)]
pub struct HistoryOperator {
    kernel: HistoryKernel,
    weights: Option<ProductWeights>,
}

impl HistoryOperator {
    pub fn new(kernel: &HistoryKernel, grid: &TimeGrid) -> Self {
        let weights = (!kernel.is_zero()).then(|| ProductWeights::new(kernel, grid));
        Self {
            kernel: kernel.clone(),
            weights,
        }
    }

    pub fn kernel(&self) -> &HistoryKernel {
        &self.kernel
    }

    /// `(ℓ * v)(t_i)` for one scalar series.
    pub fn apply(&self, i: usize, v: &[f64]) -> f64 {
        self.weights.as_ref().map_or(0.0, |w| w.apply(i, v))
    }

    /// `ℓ * v_n` at every node, mode-major in and out.
    pub fn convolve_modes(&self, v: &[Vec<f64>]) -> Vec<Vec<f64>> {
        match &self.weights {
            None => v.iter().map(|s| vec![0.0; s.len()]).collect(),
            Some(w) => v.par_iter().map(|s| w.convolve(s)).collect(),
        }
    }
}

/// `(H u)(t_i)` by product-trapezoidal quadrature, modewise.
pub fn history_apply(
    l: &HistoryKernel,
    grid: &TimeGrid,
    u: &[SpectralField],
    i: usize,
) -> Result<SpectralField> {
    if i >= grid.len() || u.len() <= i {
        return Err(Error::GridMismatch {
            expected: i + 1,
            got: u.len().min(grid.len()),
        });
    }
    let first = &u[0];
    let modes = first.coeffs().len();
    let op = HistoryOperator::new(l, grid);
    let series = to_mode_major(&u[..=i], modes);
    let coeffs = series.iter().map(|s| op.apply(i, s)).collect();
    SpectralField::new(first.basis().clone(), coeffs)
}

/// A computed mild solution.
#[derive(Clone, Debug)]
pub struct MildSolution {
    pub grid: TimeGrid,
    /// One field per grid node; `states[0] = ξ`.
    pub states: Vec<SpectralField>,
    /// Number of Picard sweeps performed.
    pub iterations: usize,
    /// `sup_i e^{-β t_i} ‖u^{k+1}(t_i) - u^k(t_i)‖_μ` per sweep.
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub beta: f64,
    pub mu: f64,
}

impl MildSolution {
    /// Successive residual ratios `r_{k+1} / r_k`.
    pub fn ratios(&self) -> Vec<f64> {
        self.residuals.windows(2).map(|w| w[1] / w[0]).collect()
    }

    /// `sup_t ‖u(t)‖_ρ`.
    pub fn sup_norm(&self, rho: f64) -> f64 {
        self.states
            .iter()
            .map(|s| hnorm_coeffs(s.basis().lambdas(), s.coeffs(), rho))
            .fold(0.0, f64::max)
    }

    /// Coefficient series of mode `n`.
    pub fn mode_series(&self, n: usize) -> Vec<f64> {
        self.states.iter().map(|s| s.coeffs()[n]).collect()
    }
}

#[derive(Clone, Debug)]
pub struct PicardOptions {
    /// Weight in `sup e^{-βt} ‖·‖_μ`; 0 is the plain sup norm.
    pub beta: f64,
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            beta: 0.0,
            tol: 1e-10,
            max_iterations: 200,
        }
    }
}

/// Picard iteration starting from `u⁰(t) = S(t)ξ`.
pub fn picard_solve(
    ctx: &ResolventContext,
    spec: &NonlinearitySpec,
    l: &HistoryKernel,
    xi: &SpectralField,
    opts: &PicardOptions,
) -> Result<MildSolution> {
    picard_solve_forced(ctx, spec, l, xi, None, opts)
}

/// [`picard_solve`] with an external force `F(t_i)` added to `f(u, Hu)`.
pub fn picard_solve_forced(
    ctx: &ResolventContext,
    spec: &NonlinearitySpec,
    l: &HistoryKernel,
    xi: &SpectralField,
    forcing: Option<&[SpectralField]>,
    opts: &PicardOptions,
) -> Result<MildSolution> {
    if !(opts.beta >= 0.0) || !(opts.tol > 0.0) {
        return Err(Error::Domain(format!(
            "Picard options need beta >= 0 and tol > 0 (beta = {}, tol = {})",
            opts.beta, opts.tol
        )));
    }
    if xi.coeffs().iter().any(|c| !c.is_finite()) {
        return Err(Error::Domain("initial datum has non-finite coefficients".into()));
    }
    let basis = ctx.basis().clone();
    if **xi.basis() != *basis {
        return Err(Error::BasisMismatch("initial datum is not on the context basis".into()));
    }
    spec.check_basis(&basis)?;
    let grid = ctx.grid();
    let t = grid.nodes();
    let nt = grid.len();
    let modes = basis.len();
    let lambdas = basis.lambdas();
    let forcing_modes = match forcing {
        Some(f) if f.len() != nt => {
            return Err(Error::GridMismatch {
                expected: nt,
                got: f.len(),
            })
        }
        Some(f) => Some(to_mode_major(f, modes)),
        None => None,
    };
    let history = HistoryOperator::new(l, grid);
    let uses_history = spec.kind.uses_history() && !l.is_zero();
    let weight: Vec<f64> = t.iter().map(|&s| (-opts.beta * s).exp()).collect();

    // free part S(t)ξ, mode-major
    let free: Vec<Vec<f64>> = (0..modes)
        .map(|n| ctx.table().column(n).iter().map(|w| w * xi.coeffs()[n]).collect())
        .collect();
    let mut u = free.clone();
    let mut residuals = Vec::new();
    let linear_free = spec.kind.is_zero() && forcing_modes.is_none();
    for k in 0..opts.max_iterations {
        let w = if uses_history {
            history.convolve_modes(&u)
        } else {
            vec![vec![0.0; nt]; modes]
        };
        let f_nodes: Vec<Vec<f64>> = (0..nt)
            .into_par_iter()
            .map(|i| {
                if linear_free {
                    return Ok(vec![0.0; modes]);
                }
                let vi: Vec<f64> = u.iter().map(|s| s[i]).collect();
                let wi: Vec<f64> = w.iter().map(|s| s[i]).collect();
                let mut fi = spec.kind.eval(&basis, &vi, &wi)?;
                if let Some(fm) = &forcing_modes {
                    fi.iter_mut().zip(fm).for_each(|(a, s)| *a += s[i]);
                }
                Ok(fi)
            })
            .collect::<Result<_>>()?;
        let f_modes: Vec<Vec<f64>> = (0..modes)
            .map(|n| f_nodes.iter().map(|f| f[n]).collect())
            .collect();
        let conv = ctx.convolve_modes(&f_modes)?;
        let next: Vec<Vec<f64>> = free
            .iter()
            .zip(&conv)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
            .collect();
        let residual = (0..nt)
            .map(|i| {
                let d: Vec<f64> = next.iter().zip(&u).map(|(a, b)| a[i] - b[i]).collect();
                weight[i] * hnorm_coeffs(lambdas, &d, spec.mu)
            })
            .fold(0.0, f64::max);
        u = next;
        residuals.push(residual);
        if !residual.is_finite() {
            break;
        }
        if residual < opts.tol {
            return Ok(MildSolution {
                grid: grid.clone(),
                states: states_from(&u, xi)?,
                iterations: k + 1,
                residuals,
                converged: true,
                beta: opts.beta,
                mu: spec.mu,
            });
        }
    }
    let partial = MildSolution {
        grid: grid.clone(),
        states: states_from(&u, xi)?,
        iterations: residuals.len(),
        residuals: residuals.clone(),
        converged: false,
        beta: opts.beta,
        mu: spec.mu,
    };
    Err(Error::NonConvergence {
        iterations: residuals.len(),
        last_residual: residuals.last().copied().unwrap_or(f64::NAN),
        residuals,
        partial: Box::new(partial),
    })
}

fn states_from(u: &[Vec<f64>], xi: &SpectralField) -> Result<Vec<SpectralField>> {
    let mut states = from_mode_major(u, xi.basis())?;
    // ω(0) = 1 and the convolution vanishes at 0, so this only removes rounding
    states[0] = xi.clone();
    Ok(states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::MemoryKernel;
    use crate::resolvent::apply_S;
    use crate::spectral::{build_basis, Domain};
    use std::f64::consts::PI;

    fn ctx(kernel: MemoryKernel, modes: usize, steps: usize) -> ResolventContext {
        let basis = build_basis(Domain::interval(1.0).unwrap(), modes).unwrap();
        ResolventContext::new(basis, kernel, &TimeGrid::uniform(1.0, steps).unwrap()).unwrap()
    }

    #[test]
    fn history_examples() {
        let basis = build_basis(Domain::interval(1.0).unwrap(), 2).unwrap();
        let grid = TimeGrid::uniform(2.0, 64).unwrap();
        let e1 = SpectralField::mode(basis.clone(), 0).unwrap();
        let u = vec![e1.clone(); 65];
        let h = history_apply(&HistoryKernel::constant(1.0).unwrap(), &grid, &u, 64).unwrap();
        assert!((h.coeffs()[0] - 2.0).abs() < 1e-14);
        let zero = vec![SpectralField::zeros(basis.clone()); 65];
        let h0 = history_apply(&HistoryKernel::constant(1.0).unwrap(), &grid, &zero, 10).unwrap();
        assert!(h0.coeffs().iter().all(|&c| c == 0.0));
        // ℓ = e^{-t}, u ≡ 1 at t = 1 (node 32): 1 - e^{-1}, exact for constant u
        let ex = HistoryKernel::exponential(1.0, 1.0).unwrap();
        let h1 = history_apply(&ex, &grid, &u, 32).unwrap();
        assert!((h1.coeffs()[0] - (1.0 - (-1.0f64).exp())).abs() < 1e-14);
        assert!(history_apply(&ex, &grid, &u[..10], 20).is_err());
    }

    #[test]
    fn zero_nonlinearity_is_free_evolution() {
        let c = ctx(MemoryKernel::fractional(1.0, 0.5).unwrap(), 4, 256);
        let xi = SpectralField::new(c.basis().clone(), vec![1.0, 0.5, -0.25, 0.1]).unwrap();
        let spec = NonlinearitySpec::zero(1.0, 0.5).unwrap();
        let sol = picard_solve(&c, &spec, &HistoryKernel::Zero, &xi, &PicardOptions::default()).unwrap();
        assert_eq!(sol.iterations, 1);
        assert_eq!(sol.states[0], xi);
        for i in [0, 17, 256] {
            let s = apply_S(&c, i, &xi).unwrap();
            for (a, b) in s.coeffs().iter().zip(sol.states[i].coeffs()) {
                assert!((a - b).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn linear_diagonal_single_mode_matches_exponential() {
        // u' + λu = c u with m ≡ 0
        let c = ctx(MemoryKernel::Zero, 3, 4096);
        let lam = PI * PI;
        let coef = 2.0;
        let spec = NonlinearitySpec::linear_diagonal(c.basis(), vec![coef, 0.0, 0.0], 1.0, 0.5).unwrap();
        let xi = SpectralField::mode(c.basis().clone(), 0).unwrap();
        let sol = picard_solve(&c, &spec, &HistoryKernel::Zero, &xi, &PicardOptions::default()).unwrap();
        for (i, &t) in c.grid().nodes().iter().enumerate() {
            let exact = ((coef - lam) * t).exp();
            assert!((sol.states[i].coeffs()[0] - exact).abs() <= 1e-4 * exact);
            assert_eq!(sol.states[i].coeffs()[1], 0.0);
            assert_eq!(sol.states[i].coeffs()[2], 0.0);
        }
    }

    #[test]
    fn nonconvergence_keeps_the_partial_solution() {
        let c = ctx(MemoryKernel::Zero, 2, 64);
        let spec = NonlinearitySpec::linear_diagonal(c.basis(), vec![40.0, 0.0], 1.0, 0.5).unwrap();
        let xi = SpectralField::mode(c.basis().clone(), 0).unwrap();
        let opts = PicardOptions {
            max_iterations: 3,
            ..PicardOptions::default()
        };
        match picard_solve(&c, &spec, &HistoryKernel::Zero, &xi, &opts) {
            Err(Error::NonConvergence { iterations, partial, .. }) => {
                assert_eq!(iterations, 3);
                assert_eq!(partial.states.len(), 65);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn weighted_and_plain_norms_agree() {
        let c = ctx(MemoryKernel::exponential(1.0, 1.0).unwrap(), 4, 256);
        let spec = NonlinearitySpec::linear_diagonal(c.basis(), vec![3.0, -1.0, 0.5, 0.0], 1.0, 0.5).unwrap();
        let xi = SpectralField::new(c.basis().clone(), vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let l = HistoryKernel::Zero;
        let a = picard_solve(&c, &spec, &l, &xi, &PicardOptions::default()).unwrap();
        let b = picard_solve(&c, &spec, &l, &xi, &PicardOptions { beta: 5.0, ..PicardOptions::default() }).unwrap();
        let worst = a
            .states
            .iter()
            .zip(&b.states)
            .flat_map(|(x, y)| x.coeffs().iter().zip(y.coeffs()).map(|(p, q)| (p - q).abs()))
            .fold(0.0, f64::max);
        assert!(worst < 1e-9, "{worst}");
    }
}
