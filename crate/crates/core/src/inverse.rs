//! Recovering a time-dependent source amplitude `p(t)` in
//! `∂_t u - (1 + D^m) Δu = g p(t) + f_1(u)` from the weighted average
//! `ψ(t) = (u(t), κ)`.
//!
//! Reconstruction iterates on `u` with the integrated amplitude
//! `Q(t) = (g,κ) ∫_0^t p` as the unknown forcing. Each mode solves
//! `u_n + λ_n a * u_n = ξ_n + g_n Q / (g,κ) + ∫ f_1(u)_n`, and `Q` is updated from
//! the measurement defect, `Q ← Q + ψ - (u, κ)` (plus the change of
//! `∫ (f_1(u), κ)`). The stepper's own `a * u_n = (r_n - u_n) / λ_n` makes the
//! fixed point reproduce `ψ` at every node to solver precision. `p` is then
//! read off `p = (g,κ)^{-1} [ψ' + (1 + m(0)) (∇u, ∇κ) + m' * (∇u, ∇κ) - (f_1(u), κ)]`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::kernels::{m_star_gate, HistoryKernel, MemoryKernel};
use crate::mild::{picard_solve_forced, HistoryOperator, MildSolution, NonlinearitySpec, PicardOptions};
use crate::resolvent::{from_mode_major, ResolventContext};
use crate::spectral::{gradient_pairing_coeffs, hnorm_coeffs, SpectralField};
use crate::stepper::Rhs;

pub const DEFAULT_PAIRING_FLOOR: f64 = 1e-12;

/// How `ψ'` is obtained for the amplitude formula.
#[derive(Clone, Debug, PartialEq)]
pub enum PsiDerivative {
    /// Supplied values at every node.
    Analytic(Vec<f64>),
    /// Second-order differences of the samples.
    FiniteDifference,
}

#[derive(Clone, Debug)]
pub struct InverseProblemSpec {
    /// Source shape.
    pub g: SpectralField,
    /// Measurement weight.
    pub kappa: SpectralField,
    /// `ψ(t_i)` at every node.
    pub psi: Vec<f64>,
    pub psi_derivative: PsiDerivative,
    /// State nonlinearity `f_1`, history-free.
    pub f1: NonlinearitySpec,
    pub xi: SpectralField,
    pub pairing_floor: f64,
    /// Allowed `|ψ(0) - (ξ, κ)|`.
    pub consistency_tol: f64,
}

/// Result of a forward run.
#[derive(Clone, Debug)]
pub struct ForwardResult {
    pub solution: MildSolution,
    pub psi: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub solution: MildSolution,
    pub p: Vec<f64>,
    pub psi_prime: Vec<f64>,
    /// `|(u(t_i), κ) - ψ(t_i)|`.
    pub residual: Vec<f64>,
    pub pairing: f64,
}

/// `ψ'` at every node: central differences inside, one-sided second-order
/// differences at both ends (all exact for quadratics on any grid).
pub fn derivative_psi(psi: &[f64], grid: &TimeGrid) -> Result<Vec<f64>> {
    let n = psi.len();
    if n < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: n });
    }
    if n != grid.len() {
        return Err(Error::GridMismatch {
            expected: grid.len(),
            got: n,
        });
    }
    let t = grid.nodes();
    // derivative at x[k] of the quadratic through three points
    let quad = |i: [usize; 3], k: usize| -> f64 {
        let x = [t[i[0]], t[i[1]], t[i[2]]];
        let y = [psi[i[0]], psi[i[1]], psi[i[2]]];
        let at = x[k];
        (0..3)
            .map(|j| {
                let others: Vec<usize> = (0..3).filter(|&q| q != j).collect();
                let (a, b) = (x[others[0]], x[others[1]]);
                y[j] * ((at - a) + (at - b)) / ((x[j] - a) * (x[j] - b))
            })
            .sum()
    };
    let mut out = Vec::with_capacity(n);
    out.push(quad([0, 1, 2], 0));
    for i in 1..n - 1 {
        out.push(quad([i - 1, i, i + 1], 1));
    }
    out.push(quad([n - 3, n - 2, n - 1], 2));
    Ok(out)
}

fn check_basis(ctx: &ResolventContext, what: &str, u: &SpectralField) -> Result<()> {
    if **u.basis() != **ctx.basis() {
        return Err(Error::BasisMismatch(format!("{what} is not on the context basis")));
    }
    Ok(())
}

/// Solves the forward problem with a known amplitude `p(t_i)` and returns the
/// states together with `ψ(t_i) = (u(t_i), κ)`.
pub fn forward_simulate(
    ctx: &ResolventContext,
    g: &SpectralField,
    kappa: &SpectralField,
    f1: &NonlinearitySpec,
    xi: &SpectralField,
    p: &[f64],
    opts: &PicardOptions,
) -> Result<ForwardResult> {
    for (what, u) in [("g", g), ("kappa", kappa), ("xi", xi)] {
        check_basis(ctx, what, u)?;
    }
    let nt = ctx.grid().len();
    if p.len() != nt {
        return Err(Error::GridMismatch {
            expected: nt,
            got: p.len(),
        });
    }
    let forcing: Vec<SpectralField> = p.iter().map(|&a| g.scaled(a)).collect();
    let solution = picard_solve_forced(ctx, f1, &HistoryKernel::Zero, xi, Some(&forcing), opts)?;
    let psi = solution
        .states
        .iter()
        .map(|u| u.dot(kappa))
        .collect::<Result<_>>()?;
    Ok(ForwardResult { solution, psi })
}

/// `ψ'` implied by the model along a forward solution:
/// `(g,κ) p - (1 + m(0)) (∇u, ∇κ) - m' * (∇u, ∇κ) + (f_1(u), κ)`.
pub fn model_psi_derivative(
    ctx: &ResolventContext,
    g: &SpectralField,
    kappa: &SpectralField,
    f1: &NonlinearitySpec,
    states: &[SpectralField],
    p: &[f64],
) -> Result<Vec<f64>> {
    let (m0, m1) = split_kernel(ctx.kernel(), ctx.grid().horizon())?;
    let pairing = g.dot(kappa)?;
    let grad = gradient_series(ctx, kappa, states);
    let hist = HistoryOperator::new(&m1, ctx.grid());
    let f1k = f1_pairing(ctx, f1, kappa, states)?;
    Ok((0..states.len())
        .map(|i| pairing * p[i] - (1.0 + m0) * grad[i] - hist.apply(i, &grad) + f1k[i])
        .collect())
}

fn split_kernel(m: &MemoryKernel, horizon: f64) -> Result<(f64, HistoryKernel)> {
    let gate = m_star_gate(m, horizon);
    if !gate.pass {
        return Err(Error::KernelGateFailed(gate.message));
    }
    let m0 = m
        .value_at_origin()
        .ok_or_else(|| Error::KernelGateFailed("m(0) is not finite".into()))?;
    Ok((m0, m.derivative_kernel()?))
}

fn gradient_series(ctx: &ResolventContext, kappa: &SpectralField, states: &[SpectralField]) -> Vec<f64> {
    states
        .iter()
        .map(|u| gradient_pairing_coeffs(ctx.lambdas(), u.coeffs(), kappa.coeffs()))
        .collect()
}

fn f1_pairing(
    ctx: &ResolventContext,
    f1: &NonlinearitySpec,
    kappa: &SpectralField,
    states: &[SpectralField],
) -> Result<Vec<f64>> {
    if f1.kind.is_zero() {
        return Ok(vec![0.0; states.len()]);
    }
    let basis = ctx.basis();
    let zero = vec![0.0; basis.len()];
    states
        .par_iter()
        .map(|u| {
            let f = f1.kind.eval(basis, u.coeffs(), &zero)?;
            Ok(f.iter().zip(kappa.coeffs()).map(|(a, b)| a * b).sum())
        })
        .collect()
}

/// Recovers `(u, p)` from the measurement.
pub fn reconstruct(
    ctx: &ResolventContext,
    spec: &InverseProblemSpec,
    opts: &PicardOptions,
) -> Result<Reconstruction> {
    for (what, u) in [("g", &spec.g), ("kappa", &spec.kappa), ("xi", &spec.xi)] {
        check_basis(ctx, what, u)?;
    }
    if spec.f1.kind.uses_history() {
        return Err(Error::Domain("f1 must not depend on the history term".into()));
    }
    spec.f1.check_basis(ctx.basis())?;
    let grid = ctx.grid();
    let nt = grid.len();
    if spec.psi.len() != nt {
        return Err(Error::GridMismatch {
            expected: nt,
            got: spec.psi.len(),
        });
    }
    let pairing = spec.g.dot(&spec.kappa)?;
    if !(pairing.abs() >= spec.pairing_floor) {
        return Err(Error::PairingTooSmall {
            pairing: pairing.abs(),
            floor: spec.pairing_floor,
        });
    }
    let (m0, m1) = split_kernel(ctx.kernel(), grid.horizon())?;
    let psi0 = spec.xi.dot(&spec.kappa)?;
    if (spec.psi[0] - psi0).abs() > spec.consistency_tol {
        return Err(Error::Measurement(format!(
            "psi(0) = {} but (xi, kappa) = {psi0}",
            spec.psi[0]
        )));
    }
    let psi_prime = match &spec.psi_derivative {
        PsiDerivative::Analytic(d) if d.len() != nt => {
            return Err(Error::GridMismatch {
                expected: nt,
                got: d.len(),
            })
        }
        PsiDerivative::Analytic(d) => d.clone(),
        PsiDerivative::FiniteDifference => derivative_psi(&spec.psi, grid)?,
    };

    let solution = integrated_picard(ctx, spec, pairing, opts)?;
    let grad = gradient_series(ctx, &spec.kappa, &solution.states);
    let hist = HistoryOperator::new(&m1, grid);
    let f1k = f1_pairing(ctx, &spec.f1, &spec.kappa, &solution.states)?;
    let p = (0..nt)
        .map(|i| (psi_prime[i] + (1.0 + m0) * grad[i] + hist.apply(i, &grad) - f1k[i]) / pairing)
        .collect();
    let residual = solution
        .states
        .iter()
        .zip(&spec.psi)
        .map(|(u, &y)| u.dot(&spec.kappa).map(|v| (v - y).abs()))
        .collect::<Result<_>>()?;
    Ok(Reconstruction {
        solution,
        p,
        psi_prime,
        residual,
        pairing,
    })
}

fn integrated_picard(
    ctx: &ResolventContext,
    spec: &InverseProblemSpec,
    pairing: f64,
    opts: &PicardOptions,
) -> Result<MildSolution> {
    let grid = ctx.grid();
    let t = grid.nodes();
    let nt = grid.len();
    let basis = ctx.basis();
    let modes = basis.len();
    let lambdas = ctx.lambdas();
    let xi = spec.xi.coeffs();
    let g = spec.g.coeffs();
    let kappa = spec.kappa.coeffs();
    let weight: Vec<f64> = t.iter().map(|&s| (-opts.beta * s).exp()).collect();
    let has_f1 = !spec.f1.kind.is_zero();

    // f_1(u) per mode and its cumulative trapezoid integrals
    let f1_modes = |u: &[Vec<f64>]| -> Result<Vec<Vec<f64>>> {
        if !has_f1 {
            return Ok(vec![vec![0.0; nt]; modes]);
        }
        let zero = vec![0.0; modes];
        let nodes: Vec<Vec<f64>> = (0..nt)
            .into_par_iter()
            .map(|i| {
                let v: Vec<f64> = u.iter().map(|s| s[i]).collect();
                spec.f1.kind.eval(basis, &v, &zero)
            })
            .collect::<Result<_>>()?;
        Ok((0..modes).map(|n| nodes.iter().map(|f| f[n]).collect()).collect())
    };
    let kappa_pair = |series: &[Vec<f64>], i: usize| -> f64 {
        series.iter().zip(kappa).map(|(s, k)| s[i] * k).sum()
    };

    // u⁰ = S(t)ξ, i.e. Q = 0 and no f_1 contribution
    let mut u: Vec<Vec<f64>> = (0..modes)
        .map(|n| ctx.table().column(n).iter().map(|w| w * xi[n]).collect())
        .collect();
    let mut q = vec![0.0; nt];
    let mut f1_cum_kappa = vec![0.0; nt];
    let mut residuals = Vec::new();
    for k in 0..opts.max_iterations {
        let f1 = f1_modes(&u)?;
        let f1_kappa: Vec<f64> = (0..nt).map(|i| kappa_pair(&f1, i)).collect();
        let new_cum = grid.cumulative_trapezoid(&f1_kappa);
        for i in 0..nt {
            q[i] += spec.psi[i] - kappa_pair(&u, i) + f1_cum_kappa[i] - new_cum[i];
        }
        f1_cum_kappa = new_cum;
        let next: Vec<Vec<f64>> = (0..modes)
            .into_par_iter()
            .map(|n| {
                let nodal: Vec<f64> = q.iter().map(|v| g[n] * v / pairing).collect();
                let rhs = Rhs {
                    constant: xi[n],
                    nodal: Some(&nodal),
                    integrated: has_f1.then_some(f1[n].as_slice()),
                };
                ctx.solve_mode(n, rhs)
            })
            .collect::<Result<_>>()?;
        let residual = (0..nt)
            .map(|i| {
                let d: Vec<f64> = next.iter().zip(&u).map(|(a, b)| a[i] - b[i]).collect();
                weight[i] * hnorm_coeffs(lambdas, &d, spec.f1.mu)
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
                states: from_mode_major(&u, basis)?,
                iterations: k + 1,
                residuals,
                converged: true,
                beta: opts.beta,
                mu: spec.f1.mu,
            });
        }
    }
    let partial = MildSolution {
        grid: grid.clone(),
        states: from_mode_major(&u, basis)?,
        iterations: residuals.len(),
        residuals: residuals.clone(),
        converged: false,
        beta: opts.beta,
        mu: spec.f1.mu,
    };
    Err(Error::NonConvergence {
        iterations: residuals.len(),
        last_residual: residuals.last().copied().unwrap_or(f64::NAN),
        residuals,
        partial: Box::new(partial),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{build_basis, Domain};
    use std::f64::consts::PI;

    fn ctx(kernel: MemoryKernel, modes: usize, steps: usize) -> ResolventContext {
        let basis = build_basis(Domain::interval(1.0).unwrap(), modes).unwrap();
        ResolventContext::new(basis, kernel, &TimeGrid::uniform(1.0, steps).unwrap()).unwrap()
    }

    fn zero_f1() -> NonlinearitySpec {
        NonlinearitySpec::zero(1.0, 0.5).unwrap()
    }

    #[test]
    fn derivative_examples() {
        let grid = TimeGrid::uniform(1.0, 1024).unwrap();
        let c = vec![3.0; 1025];
        assert!(derivative_psi(&c, &grid).unwrap().iter().all(|v| v.abs() < 1e-10));
        let lin: Vec<f64> = grid.nodes().to_vec();
        assert!(derivative_psi(&lin, &grid).unwrap().iter().all(|v| (v - 1.0).abs() < 1e-10));
        let s: Vec<f64> = grid.nodes().iter().map(|t| t.sin()).collect();
        let d = derivative_psi(&s, &grid).unwrap();
        let err = grid
            .nodes()
            .iter()
            .zip(&d)
            .map(|(t, v)| (t.cos() - v).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-5, "{err}");
        let short = TimeGrid::uniform(1.0, 1).unwrap();
        assert!(matches!(derivative_psi(&[0.0, 1.0], &short), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn forward_single_mode_closed_form() {
        let c = ctx(MemoryKernel::Zero, 2, 2048);
        let e1 = SpectralField::mode(c.basis().clone(), 0).unwrap();
        let zero = SpectralField::zeros(c.basis().clone());
        let p = vec![1.0; 2049];
        let out = forward_simulate(&c, &e1, &e1, &zero_f1(), &zero, &p, &PicardOptions::default()).unwrap();
        let l = PI * PI;
        for (i, &t) in c.grid().nodes().iter().enumerate() {
            assert!((out.psi[i] + (-l * t).exp_m1() / l).abs() < 1e-6);
        }
        let none = forward_simulate(&c, &e1, &e1, &zero_f1(), &zero, &vec![0.0; 2049], &PicardOptions::default()).unwrap();
        assert!(none.psi.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn round_trip_recovers_amplitude() {
        let c = ctx(MemoryKernel::exponential(1.0, 1.0).unwrap(), 8, 512);
        let basis = c.basis().clone();
        let mut gc = vec![0.0; 8];
        gc[0] = 1.0;
        gc[1] = 0.5;
        let g = SpectralField::new(basis.clone(), gc).unwrap();
        let kappa = SpectralField::mode(basis.clone(), 0).unwrap();
        let xi = SpectralField::zeros(basis.clone());
        let p: Vec<f64> = c.grid().nodes().iter().map(|t| 1.0 + (2.0 * PI * t).sin()).collect();
        let opts = PicardOptions::default();
        let fwd = forward_simulate(&c, &g, &kappa, &zero_f1(), &xi, &p, &opts).unwrap();
        let dpsi = model_psi_derivative(&c, &g, &kappa, &zero_f1(), &fwd.solution.states, &p).unwrap();
        let spec = InverseProblemSpec {
            g,
            kappa,
            psi: fwd.psi.clone(),
            psi_derivative: PsiDerivative::Analytic(dpsi),
            f1: zero_f1(),
            xi,
            pairing_floor: DEFAULT_PAIRING_FLOOR,
            consistency_tol: 1e-12,
        };
        let rec = reconstruct(&c, &spec, &opts).unwrap();
        let err = rec.p.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 0.02 * 2.0, "{err}");
        assert!(rec.residual.iter().all(|&r| r <= 10.0 * opts.tol));
    }

    #[test]
    fn rejects_bad_inputs() {
        let frac = ctx(MemoryKernel::fractional(1.0, 0.5).unwrap(), 2, 64);
        let b = frac.basis().clone();
        let e1 = SpectralField::mode(b.clone(), 0).unwrap();
        let e2 = SpectralField::mode(b.clone(), 1).unwrap();
        let zero = SpectralField::zeros(b.clone());
        let spec = |g: &SpectralField, psi0: f64| InverseProblemSpec {
            g: g.clone(),
            kappa: e1.clone(),
            psi: vec![psi0; 65],
            psi_derivative: PsiDerivative::FiniteDifference,
            f1: zero_f1(),
            xi: zero.clone(),
            pairing_floor: DEFAULT_PAIRING_FLOOR,
            consistency_tol: 1e-12,
        };
        let opts = PicardOptions::default();
        assert!(matches!(reconstruct(&frac, &spec(&e2, 0.0), &opts), Err(Error::PairingTooSmall { .. })));
        match reconstruct(&frac, &spec(&e1, 0.0), &opts) {
            Err(Error::KernelGateFailed(msg)) => assert!(msg.contains("|m'|"), "{msg}"),
            other => panic!("{other:?}"),
        }
        let ex = ctx(MemoryKernel::exponential(1.0, 1.0).unwrap(), 2, 64);
        let e1x = SpectralField::mode(ex.basis().clone(), 0).unwrap();
        let mut s = spec(&e1x, 0.5);
        s.kappa = e1x.clone();
        s.xi = SpectralField::zeros(ex.basis().clone());
        assert!(matches!(reconstruct(&ex, &s, &opts), Err(Error::Measurement(_))));
        // zero data give zero amplitude
        s.psi = vec![0.0; 65];
        let rec = reconstruct(&ex, &s, &opts).unwrap();
        assert!(rec.p.iter().all(|&v| v == 0.0));
    }
}
