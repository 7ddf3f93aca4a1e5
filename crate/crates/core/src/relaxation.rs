//! The relaxation function `ω(t, λ)`, solution of
//! `ω(t) + λ ∫_0^t (1 + m(t - τ)) ω(τ) dτ = 1`.
//!
//! Discretized by the implicit product-trapezoidal rule: `ω` is
//! piecewise linear in time and `1 + m` is integrated exactly against it
//! through cell moments, so the singular fractional kernel needs no
//! regularization. Stiff eigenvalues get a refined initial layer, see
//! [`crate::stepper`].

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{MemoryKernel, ShiftedKernel};
use crate::product::ProductWeights;
use crate::stepper::{ModeStepper, Rhs};

pub use crate::grid::{GridKind, TimeGrid};

/// Slack granted to the exact inequalities when checking a computed table.
pub const DEFAULT_MONOTONICITY_TOL: f64 = 1e-8;

/// Samples `ω(t_i, λ_n)` for one grid and a batch of eigenvalues.
#[derive(Clone, Debug)]
pub struct RelaxationTable {
    grid: TimeGrid,
    lambdas: Vec<f64>,
    /// column-major: `columns[n][i] = ω(t_i, λ_n)`
    columns: Vec<Vec<f64>>,
    /// `∫_0^{t_i} ω(·, λ_n)` with the solver's own trapezoid rule
    integrals: Vec<Vec<f64>>,
    refined: Vec<bool>,
}

impl RelaxationTable {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// `ω(t_i, λ_n)`.
    pub fn omega(&self, i: usize, n: usize) -> f64 {
        self.columns[n][i]
    }

    /// All samples for `λ_n`.
    pub fn column(&self, n: usize) -> &[f64] {
        &self.columns[n]
    }

    /// `∫_0^{t_i} ω(s, λ_n) ds` by the trapezoid rule on the nodes the solver
    /// used (base nodes, plus the refined layer for stiff columns).
    pub fn integral(&self, n: usize) -> &[f64] {
        &self.integrals[n]
    }

    /// Whether column `n` needed a refined initial layer.
    pub fn is_refined(&self, n: usize) -> bool {
        self.refined[n]
    }

    /// `ω(t, λ_n)` at an arbitrary `t ∈ [0, T]`, linear in time between nodes.
    pub fn omega_at(&self, t: f64, n: usize) -> f64 {
        self.grid.interpolate(&self.columns[n], t)
    }
}

fn check_lambda(index: usize, lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Relaxation {
            index,
            lambda,
            reason: "lambda must be positive and finite".into(),
        });
    }
    Ok(())
}

/// Product-trapezoidal weights of `1 + m` on `grid`.
pub fn relaxation_weights(m: &MemoryKernel, grid: &TimeGrid) -> ProductWeights {
    ProductWeights::new(&ShiftedKernel(m), grid)
}

/// Solves for `ω(·, λ)` on `grid`.
pub fn solve_relaxation(m: &MemoryKernel, lambda: f64, grid: &TimeGrid) -> Result<Vec<f64>> {
    check_lambda(0, lambda)?;
    let w = relaxation_weights(m, grid);
    Ok(solve_column(m, &w, grid, 0, lambda)?.0)
}

fn solve_column(
    m: &MemoryKernel,
    w: &ProductWeights,
    grid: &TimeGrid,
    index: usize,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>, bool)> {
    let stepper = ModeStepper::new(&ShiftedKernel(m), grid, lambda);
    let (omega, integral) = solve_with(&stepper, w, grid, index)?;
    Ok((omega, integral, stepper.is_refined()))
}

fn solve_with(
    stepper: &ModeStepper,
    w: &ProductWeights,
    grid: &TimeGrid,
    index: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    stepper
        .solve(w, grid, Rhs::constant(1.0))
        .map_err(|reason| Error::Relaxation {
            index,
            lambda: stepper.lambda(),
            reason,
        })
}

fn check_sorted(lambdas: &[f64]) -> Result<()> {
    for (i, &l) in lambdas.iter().enumerate() {
        check_lambda(i, l)?;
        if i > 0 && l < lambdas[i - 1] {
            return Err(Error::Relaxation {
                index: i,
                lambda: l,
                reason: "lambdas must be sorted ascending".into(),
            });
        }
    }
    Ok(())
}

/// Solves for every `λ` in `lambdas` (ascending, positive). Weights are built
/// once and columns are computed in parallel.
pub fn relaxation_batch(
    m: &MemoryKernel,
    lambdas: &[f64],
    grid: &TimeGrid,
) -> Result<RelaxationTable> {
    Ok(batch_with_steppers(m, lambdas, grid)?.0)
}

/// [`relaxation_batch`] that also hands back the shared weights and the
/// per-eigenvalue steppers, for reuse by forced solves.
pub(crate) fn batch_with_steppers(
    m: &MemoryKernel,
    lambdas: &[f64],
    grid: &TimeGrid,
) -> Result<(RelaxationTable, ProductWeights, Vec<ModeStepper>)> {
    check_sorted(lambdas)?;
    let w = relaxation_weights(m, grid);
    let steppers: Vec<ModeStepper> = lambdas
        .par_iter()
        .map(|&l| ModeStepper::new(&ShiftedKernel(m), grid, l))
        .collect();
    let solved = steppers
        .par_iter()
        .enumerate()
        .map(|(n, st)| solve_with(st, &w, grid, n))
        .collect::<Result<Vec<_>>>()?;
    let mut columns = Vec::with_capacity(solved.len());
    let mut integrals = Vec::with_capacity(solved.len());
    for (c, i) in solved {
        columns.push(c);
        integrals.push(i);
    }
    let table = RelaxationTable {
        grid: grid.clone(),
        lambdas: lambdas.to_vec(),
        columns,
        integrals,
        refined: steppers.iter().map(ModeStepper::is_refined).collect(),
    };
    Ok((table, w, steppers))
}

/// One checked property for one eigenvalue (or the cross-column check).
#[derive(Clone, Debug, PartialEq)]
pub struct PropertyRow {
    /// `"omega_bound"`, `"omega_integral"` or `"lambda_monotone"`.
    pub property: &'static str,
    /// The eigenvalue of the column (the larger one for the cross check).
    pub lambda: f64,
    /// Smallest slack over the grid; negative when violated.
    pub worst_margin: f64,
    /// Node where the worst margin occurs.
    pub worst_index: usize,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct RelaxationReport {
    pub tolerance: f64,
    pub rows: Vec<PropertyRow>,
}

impl RelaxationReport {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    /// Worst margin of a given property over all columns.
    pub fn worst(&self, property: &str) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.property == property)
            .map(|r| r.worst_margin)
            .fold(f64::INFINITY, f64::min)
    }
}

fn worst_of(iter: impl Iterator<Item = (usize, f64)>) -> (usize, f64) {
    iter.fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc })
}

/// Checks the computed table against the exact properties of `ω`:
///
/// * (a) `0 < ω(t) <= 1 / (1 + λ ∫_0^t (1 + m))` and `ω` nonincreasing in `t`;
///   positivity counts toward the margin, so `ω = -1e-17` passes at any
///   reasonable tolerance;
/// * (b) `∫_0^t ω <= (1 - ω(t)) / λ` with the solver's trapezoid rule;
/// * (c) `ω(t, λ)` nonincreasing in `λ`.
pub fn verify_relaxation(table: &RelaxationTable, m: &MemoryKernel, tol: f64) -> Result<RelaxationReport> {
    let grid = table.grid();
    let t = grid.nodes();
    let cumulative: Vec<f64> = t
        .iter()
        .map(|&s| m.cumulative(s).map(|c| s + c))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (n, &lambda) in table.lambdas().iter().enumerate() {
        let w = table.column(n);
        // (a): bound, positivity and monotonicity in t
        let (idx, margin) = worst_of((0..w.len()).map(|i| {
            let bound = 1.0 / (1.0 + lambda * cumulative[i]);
            let mut slack = (bound - w[i]).min(w[i]);
            if i + 1 < w.len() {
                slack = slack.min(w[i] - w[i + 1]);
            }
            (i, slack)
        }));
        rows.push(PropertyRow {
            property: "omega_bound",
            lambda,
            worst_margin: margin,
            worst_index: idx,
            pass: margin >= -tol,
        });
        // (b)
        let integral = table.integral(n);
        let (idx, margin) =
            worst_of((0..w.len()).map(|i| (i, (1.0 - w[i]) / lambda - integral[i])));
        rows.push(PropertyRow {
            property: "omega_integral",
            lambda,
            worst_margin: margin,
            worst_index: idx,
            pass: margin >= -tol,
        });
        // (c)
        if n > 0 {
            let prev = table.column(n - 1);
            let (idx, margin) = worst_of((0..w.len()).map(|i| (i, prev[i] - w[i])));
            rows.push(PropertyRow {
                property: "lambda_monotone",
                lambda,
                worst_margin: margin,
                worst_index: idx,
                pass: margin >= -tol,
            });
        }
    }
    Ok(RelaxationReport { tolerance: tol, rows })
}
