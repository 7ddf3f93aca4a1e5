//! The resolvent family `S(t)ξ = Σ ω(t, λ_n) ξ_n e_n`, its convolution with a
//! forcing, and numerical checks of the norm bounds it satisfies.
//!
//! `S * g` is never assembled from lagged samples of `ω`. For each mode,
//! `v = ω * g` is the solution of `v + λ (1 + m) * v = 1 * g`, so the
//! convolution is one forced solve with the same stepper that produced `ω`.
//! This works on graded grids without interpolating `ω` at lags.

use std::sync::Arc;

use rayon::prelude::*;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::kernels::{
    reciprocal_cumulative_probe, CellMoments, HistoryKernel, Kernel, MemoryKernel,
};
use crate::product::ProductWeights;
use crate::quad::tanh_sinh;
use crate::relaxation::{batch_with_steppers, RelaxationTable};
use crate::spectral::{hnorm_coeffs, SpectralBasis, SpectralField};
use crate::stepper::{ModeStepper, Rhs};

/// Basis, memory kernel and the relaxation table of every basis eigenvalue.
#[derive(Clone, Debug)]
pub struct ResolventContext {
    basis: Arc<SpectralBasis>,
    kernel: MemoryKernel,
    table: RelaxationTable,
    weights: ProductWeights,
    steppers: Vec<ModeStepper>,
}

impl ResolventContext {
    pub fn new(basis: Arc<SpectralBasis>, kernel: MemoryKernel, grid: &TimeGrid) -> Result<Self> {
        let (table, weights, steppers) = batch_with_steppers(&kernel, basis.lambdas(), grid)?;
        Ok(Self {
            basis,
            kernel,
            table,
            weights,
            steppers,
        })
    }

    pub fn basis(&self) -> &Arc<SpectralBasis> {
        &self.basis
    }

    pub fn kernel(&self) -> &MemoryKernel {
        &self.kernel
    }

    pub fn table(&self) -> &RelaxationTable {
        &self.table
    }

    pub fn grid(&self) -> &TimeGrid {
        self.table.grid()
    }

    pub fn lambdas(&self) -> &[f64] {
        self.basis.lambdas()
    }

    pub fn modes(&self) -> usize {
        self.basis.len()
    }

    /// Solves `y + λ_n (1 + m) * y = r` for mode `n`.
    pub fn solve_mode(&self, n: usize, rhs: Rhs<'_>) -> Result<Vec<f64>> {
        let st = &self.steppers[n];
        st.solve(&self.weights, self.grid(), rhs)
            .map(|(y, _)| y)
            .map_err(|reason| Error::Relaxation {
                index: n,
                lambda: st.lambda(),
                reason,
            })
    }

    /// `(ω_n * g_n)(t_i)` for every mode; `g` and the result are mode-major
    /// (`g[n][i]`).
    pub fn convolve_modes(&self, g: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if g.len() != self.modes() {
            return Err(Error::BasisMismatch(format!(
                "expected {} modes, got {}",
                self.modes(),
                g.len()
            )));
        }
        let nt = self.grid().len();
        if let Some(bad) = g.iter().find(|s| s.len() != nt) {
            return Err(Error::GridMismatch {
                expected: nt,
                got: bad.len(),
            });
        }
        g.par_iter()
            .enumerate()
            .map(|(n, gn)| {
                if gn.iter().all(|&v| v == 0.0) {
                    Ok(vec![0.0; nt])
                } else {
                    self.solve_mode(n, Rhs::integrated(0.0, gn))
                }
            })
            .collect()
    }

    fn check_field(&self, u: &SpectralField) -> Result<()> {
        if !Arc::ptr_eq(u.basis(), &self.basis) && **u.basis() != *self.basis {
            return Err(Error::BasisMismatch(
                "field is not expanded in the context basis".into(),
            ));
        }
        Ok(())
    }
}

/// `S(t_i) ξ`.
#[allow(non_snake_case)]
pub fn apply_S(ctx: &ResolventContext, i: usize, xi: &SpectralField) -> Result<SpectralField> {
    ctx.check_field(xi)?;
    let nt = ctx.grid().len();
    if i >= nt {
        return Err(Error::GridMismatch {
            expected: nt,
            got: i + 1,
        });
    }
    let coeffs = xi
        .coeffs()
        .iter()
        .enumerate()
        .map(|(n, &c)| c * ctx.table.omega(i, n))
        .collect();
    SpectralField::new(ctx.basis.clone(), coeffs)
}

/// `(S * g)(t_i)` at every node, `g` given at every node.
#[allow(non_snake_case)]
pub fn convolve_S(ctx: &ResolventContext, g: &[SpectralField]) -> Result<Vec<SpectralField>> {
    let nt = ctx.grid().len();
    if g.len() != nt {
        return Err(Error::GridMismatch {
            expected: nt,
            got: g.len(),
        });
    }
    for f in g {
        ctx.check_field(f)?;
    }
    let out = ctx.convolve_modes(&to_mode_major(g, ctx.modes()))?;
    from_mode_major(&out, &ctx.basis)
}

/// `series[i]` fields to `out[n][i]`.
pub fn to_mode_major(series: &[SpectralField], modes: usize) -> Vec<Vec<f64>> {
    (0..modes)
        .map(|n| series.iter().map(|f| f.coeffs()[n]).collect())
        .collect()
}

pub fn from_mode_major(modes: &[Vec<f64>], basis: &Arc<SpectralBasis>) -> Result<Vec<SpectralField>> {
    let nt = modes.first().map_or(0, Vec::len);
    (0..nt)
        .map(|i| SpectralField::new(basis.clone(), modes.iter().map(|m| m[i]).collect()))
        .collect()
}

/// Outcome of one checked bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundStatus {
    Pass,
    Fail,
    Skip,
}

impl BoundStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Pass => "pass",
            Self::Fail => "fail",
            Self::Skip => "skip",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundRow {
    /// `operator_norm`, `convolution`, `time_derivative`, `smoothing` or
    /// `weak_target`.
    pub item: &'static str,
    /// Time of the worst margin (NaN when skipped).
    pub t: f64,
    /// Right side minus left side, minimized over nodes and trials.
    pub worst_margin: f64,
    pub status: BoundStatus,
    pub reason: String,
}

#[derive(Clone, Debug)]
pub struct ResolventReport {
    pub tolerance: f64,
    pub rows: Vec<BoundRow>,
}

impl ResolventReport {
    pub fn row(&self, item: &str) -> Option<&BoundRow> {
        self.rows.iter().find(|r| r.item == item)
    }

    /// No row failed (skips are allowed).
    pub fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.status != BoundStatus::Fail)
    }
}

/// First node checked by the derivative bound.
pub const DERIVATIVE_START: usize = 4;

#[derive(Clone, Copy)]
struct Worst {
    t: f64,
    margin: f64,
}

impl Worst {
    fn new() -> Self {
        Self {
            t: f64::NAN,
            margin: f64::INFINITY,
        }
    }

    fn see(&mut self, t: f64, margin: f64) {
        if margin < self.margin || margin.is_nan() {
            self.t = t;
            self.margin = margin;
        }
    }

    fn row(self, item: &'static str, tol: f64, reason: String) -> BoundRow {
        let pass = self.margin >= -tol;
        BoundRow {
            item,
            t: self.t,
            worst_margin: self.margin,
            status: if pass { BoundStatus::Pass } else { BoundStatus::Fail },
            reason,
        }
    }
}

fn skip(item: &'static str, reason: String) -> BoundRow {
    BoundRow {
        item,
        t: f64::NAN,
        worst_margin: f64::NAN,
        status: BoundStatus::Skip,
        reason,
    }
}

/// `1 / (1 * m)` as a convolution kernel. Moments are exact for the
/// fractional kernel and computed by tanh-sinh quadrature otherwise.
struct ReciprocalCumulative<'a>(&'a MemoryKernel);

impl Kernel for ReciprocalCumulative<'_> {
    fn cell_moments(&self, a: f64, b: f64) -> CellMoments {
        if let MemoryKernel::Fractional { m0, alpha } = self.0 {
            let c = (1.0 - alpha) * gamma(*alpha) / m0;
            return HistoryKernel::PowerLaw {
                amplitude: c,
                exponent: alpha - 1.0,
            }
            .cell_moments(a, b);
        }
        let r = |s: f64| 1.0 / self.0.cumulative(s).unwrap_or(f64::NAN);
        CellMoments {
            mass: tanh_sinh(r, a, b, 1e-13),
            first: tanh_sinh(|s| (s - a) * r(s), a, b, 1e-13),
        }
    }
}

/// Checks, for the trial data, the bounds
///
/// * `operator_norm`: `‖S(t)ξ‖_μ <= ω(t, λ_1) ‖ξ‖_μ`;
/// * `convolution`: `‖(S*g)(t)‖²_μ <= ∫_0^t ω(t-τ, λ_1) ‖g(τ)‖²_{μ-1} dτ`;
/// * `time_derivative`: `‖S(t+h)ξ - S(t)ξ‖_μ / h <= ‖ξ‖_μ / t` for
///   `t >= t_4`, only for nonincreasing `m`;
/// * `smoothing`: `‖(S*g)(t)‖²_μ <= ∫_0^t (t-τ)^{-δ} ‖g(τ)‖²_{μ-1-δ} dτ`;
/// * `weak_target`: `‖(S*g)(t)‖²_μ <= ∫_0^t ‖g(τ)‖²_{μ-2} / (1*m)(t-τ) dτ`,
///   only when `1/(1*m)` passes the integrability probe.
///
/// `trials` feed the first and third bound, `forcings` (one field per node)
/// the others. Time integrals on the right use product weights for the
/// piecewise-linear interpolant of the squared norms; the one with `ω` is a
/// forced solve, consistent with [`convolve_S`].
pub fn verify_resolvent_bounds(
    ctx: &ResolventContext,
    mu: f64,
    delta: f64,
    trials: &[SpectralField],
    forcings: &[Vec<SpectralField>],
    tol: f64,
) -> Result<ResolventReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("delta must lie in (0,1), got {delta}")));
    }
    if !mu.is_finite() {
        return Err(Error::Domain(format!("mu must be finite, got {mu}")));
    }
    for xi in trials {
        ctx.check_field(xi)?;
        if xi.coeffs().iter().all(|&c| c == 0.0) {
            return Err(Error::Domain("trial fields must be nonzero".into()));
        }
    }
    let grid = ctx.grid();
    let t = grid.nodes();
    let nt = t.len();
    let lambdas = ctx.lambdas();
    let omega1 = ctx.table.column(0);
    let mut rows = Vec::new();

    // operator norm and difference quotients share the trajectories S(t_i)ξ
    let mut op = Worst::new();
    let mut dq = Worst::new();
    let check_dq = ctx.kernel.is_nonincreasing() && nt > DERIVATIVE_START + 1;
    for xi in trials {
        let norm = hnorm_coeffs(lambdas, xi.coeffs(), mu);
        let at = |i: usize| -> Vec<f64> {
            xi.coeffs()
                .iter()
                .enumerate()
                .map(|(n, &c)| c * ctx.table.omega(i, n))
                .collect()
        };
        let mut prev = at(0);
        for i in 0..nt {
            let cur = if i == 0 { prev.clone() } else { at(i) };
            op.see(t[i], omega1[i] * norm - hnorm_coeffs(lambdas, &cur, mu));
            if check_dq && i > DERIVATIVE_START {
                let h = t[i] - t[i - 1];
                let diff: Vec<f64> = cur.iter().zip(&prev).map(|(a, b)| a - b).collect();
                let quotient = hnorm_coeffs(lambdas, &diff, mu) / h;
                dq.see(t[i - 1], norm / t[i - 1] - quotient);
            }
            prev = cur;
        }
    }
    if trials.is_empty() {
        rows.push(skip("operator_norm", "no trial fields".into()));
    } else {
        rows.push(op.row("operator_norm", tol, format!("{} trial fields", trials.len())));
    }
    let dq_row = if trials.is_empty() {
        skip("time_derivative", "no trial fields".into())
    } else if !ctx.kernel.is_nonincreasing() {
        skip("time_derivative", "memory kernel is not nonincreasing".into())
    } else if !check_dq {
        skip("time_derivative", format!("grid has fewer than {} nodes", DERIVATIVE_START + 2))
    } else {
        dq.row(
            "time_derivative",
            tol,
            format!("forward differences for t >= t_{DERIVATIVE_START}"),
        )
    };

    // convolution bounds
    let probe = reciprocal_cumulative_probe(&ctx.kernel, grid.horizon());
    let smoothing_weights = ProductWeights::new(
        &HistoryKernel::PowerLaw {
            amplitude: 1.0,
            exponent: -delta,
        },
        grid,
    );
    let weak_weights = probe
        .pass
        .then(|| ProductWeights::new(&ReciprocalCumulative(&ctx.kernel), grid));
    let mut conv = Worst::new();
    let mut smooth = Worst::new();
    let mut weak = Worst::new();
    for g in forcings {
        if g.len() != nt {
            return Err(Error::GridMismatch {
                expected: nt,
                got: g.len(),
            });
        }
        let sg = convolve_S(ctx, g)?;
        let lhs: Vec<f64> = sg.iter().map(|v| hnorm_coeffs(lambdas, v.coeffs(), mu).powi(2)).collect();
        let sq = |rho: f64| -> Vec<f64> {
            g.iter().map(|v| hnorm_coeffs(lambdas, v.coeffs(), rho).powi(2)).collect()
        };
        let q1 = sq(mu - 1.0);
        let rhs_conv = ctx.solve_mode(0, Rhs::integrated(0.0, &q1))?;
        let rhs_smooth = smoothing_weights.convolve(&sq(mu - 1.0 - delta));
        for i in 0..nt {
            conv.see(t[i], rhs_conv[i] - lhs[i]);
            smooth.see(t[i], rhs_smooth[i] - lhs[i]);
        }
        if let Some(w) = &weak_weights {
            let rhs_weak = w.convolve(&sq(mu - 2.0));
            for i in 0..nt {
                weak.see(t[i], rhs_weak[i] - lhs[i]);
            }
        }
    }
    let n_forcings = format!("{} forcings", forcings.len());
    if forcings.is_empty() {
        rows.push(skip("convolution", "no forcings".into()));
    } else {
        rows.push(conv.row("convolution", tol, n_forcings.clone()));
    }
    rows.push(dq_row);
    if forcings.is_empty() {
        rows.push(skip("smoothing", "no forcings".into()));
    } else {
        rows.push(smooth.row("smoothing", tol, format!("{n_forcings}, delta = {delta}")));
    }
    if !probe.pass {
        rows.push(skip("weak_target", probe.message));
    } else if forcings.is_empty() {
        rows.push(skip("weak_target", "no forcings".into()));
    } else {
        rows.push(weak.row("weak_target", tol, probe.message));
    }
    Ok(ResolventReport {
        tolerance: tol,
        rows,
    })
}
