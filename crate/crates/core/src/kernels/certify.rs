//! Numerical certificates for the structural hypotheses on the memory kernel:
//! complete positivity of `a = 1 + m`, the first-kind split `k * a = 1`,
//! integrability of `m'` and of `1 / (1 * m)` near the origin.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::kernels::{Kernel, MemoryKernel, ShiftedKernel};
use crate::product::ProductWeights;
use crate::stepper::{ModeStepper, Rhs};
use crate::quad::tanh_sinh;

/// Absolute slack granted to exact sign/monotonicity statements.
pub const DEFAULT_CERTIFICATE_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CertificateStatus {
    Pass,
    Fail,
    NotApplicable,
}

impl CertificateStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Pass => "pass",
            Self::Fail => "fail",
            Self::NotApplicable => "not-applicable",
        }
    }
}

/// Result for one sampled `θ`.
#[derive(Clone, Debug)]
pub struct ThetaCertificate {
    pub theta: f64,
    /// `s` solving `s + θ a * s = 1`, one value per node.
    pub s: Vec<f64>,
    /// Samples of `r` solving `r + θ a * r = a`.
    pub r: Vec<f64>,
    /// `"direct"` when `r` was solved from its own equation, `"difference"`
    /// when it was recovered as `-s'/θ` on cell midpoints (singular `a`).
    pub r_method: &'static str,
    pub min_s: f64,
    pub min_r: f64,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct CompletePositivityReport {
    pub tolerance: f64,
    pub thetas: Vec<ThetaCertificate>,
    pub pass: bool,
}

/// Solves both resolvent equations of `a = 1 + m` for every `θ` and checks
/// that their solutions stay nonnegative on the grid.
pub fn certify_completely_positive(
    m: &MemoryKernel,
    thetas: &[f64],
    grid: &TimeGrid,
    tol: f64,
) -> Result<CompletePositivityReport> {
    if thetas.is_empty() {
        return Err(Error::Domain("at least one theta sample is required".into()));
    }
    if let Some(bad) = thetas.iter().find(|&&t| !(t > 0.0) || !t.is_finite()) {
        return Err(Error::Domain(format!("theta samples must be positive, got {bad}")));
    }
    let weights = ProductWeights::new(&ShiftedKernel(m), grid);
    let a_nodes: Option<Vec<f64>> = m.value_at_origin().map(|m0| {
        grid.nodes()
            .iter()
            .enumerate()
            .map(|(i, &t)| 1.0 + if i == 0 { m0 } else { m.value(t) })
            .collect()
    });

    let thetas: Vec<ThetaCertificate> = thetas
        .par_iter()
        .map(|&theta| -> Result<ThetaCertificate> {
            let stepper = ModeStepper::new(&ShiftedKernel(m), grid, theta);
            let solve = |rhs: Rhs<'_>| {
                stepper
                    .solve(&weights, grid, rhs)
                    .map(|(v, _)| v)
                    .map_err(|e| Error::Domain(format!("internal solver failure: {e}")))
            };
            let s = solve(Rhs::constant(1.0))?;
            let (r, r_method) = match &a_nodes {
                Some(a) => (solve(Rhs::nodal(a))?, "direct"),
                None => {
                    let t = grid.nodes();
                    let r = s
                        .windows(2)
                        .zip(t.windows(2))
                        .map(|(sv, tv)| -(sv[1] - sv[0]) / (theta * (tv[1] - tv[0])))
                        .collect();
                    (r, "difference")
                }
            };
            let min_s = s.iter().copied().fold(f64::INFINITY, f64::min);
            let min_r = r.iter().copied().fold(f64::INFINITY, f64::min);
            Ok(ThetaCertificate {
                theta,
                pass: min_s >= -tol && min_r >= -tol,
                s,
                r,
                r_method,
                min_s,
                min_r,
            })
        })
        .collect::<Result<_>>()?;
    let pass = thetas.iter().all(|c| c.pass);
    Ok(CompletePositivityReport {
        tolerance: tol,
        thetas,
        pass,
    })
}

/// Outcome of the first-kind split `k * (1 + m) = 1`.
#[derive(Clone, Debug)]
pub struct PcReport {
    pub status: CertificateStatus,
    /// Cell averages of `k`, one per grid cell (so `t = 0` is never sampled).
    pub k: Vec<f64>,
    pub min_k: f64,
    /// Largest increase `k_{j+1} - k_j`; nonpositive for a nonincreasing `k`.
    pub max_increase: f64,
    pub reason: String,
}

/// Solves `k * a = 1` by piecewise-constant collocation and checks that `k` is
/// nonnegative and nonincreasing. Bounded kernels are reported as not
/// applicable: the split then needs `ε > 0`, outside the unbounded-kernel
/// setting.
pub fn certify_pc(m: &MemoryKernel, grid: &TimeGrid, tol: f64, diagonal_floor: f64) -> Result<PcReport> {
    if m.is_bounded() {
        return Ok(PcReport {
            status: CertificateStatus::NotApplicable,
            k: Vec::new(),
            min_k: f64::NAN,
            max_increase: f64::NAN,
            reason: "bounded kernel: the split needs eps > 0, only unbounded kernels are certified"
                .into(),
        });
    }
    let a = ShiftedKernel(m);
    let t = grid.nodes();
    let n = grid.steps();
    // mass of `a` over [t_i - t_{j+1}, t_i - t_j]
    let lag_mass: Option<Vec<f64>> = grid.uniform_step().map(|h| {
        (0..n)
            .map(|c| a.cell_moments(c as f64 * h, (c + 1) as f64 * h).mass)
            .collect()
    });
    let coef = |i: usize, j: usize| -> f64 {
        match &lag_mass {
            Some(lm) => lm[i - 1 - j],
            None => a.cell_moments(t[i] - t[j + 1], t[i] - t[j]).mass,
        }
    };
    let mut k = Vec::with_capacity(n);
    for i in 1..=n {
        let diag = coef(i, i - 1);
        if diag < diagonal_floor {
            return Err(Error::IllConditioned(format!(
                "diagonal weight {diag:e} at node {i} is below the floor {diagonal_floor:e}"
            )));
        }
        let hist: f64 = (0..i - 1).map(|j| coef(i, j) * k[j]).sum();
        k.push((1.0 - hist) / diag);
    }
    let min_k = k.iter().copied().fold(f64::INFINITY, f64::min);
    let max_increase = k
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    let pass = min_k >= -tol && max_increase <= tol;
    Ok(PcReport {
        status: if pass {
            CertificateStatus::Pass
        } else {
            CertificateStatus::Fail
        },
        reason: if pass {
            "k nonnegative and nonincreasing on the grid".into()
        } else {
            format!("min k = {min_k:e}, largest increase = {max_increase:e}")
        },
        k,
        min_k,
        max_increase,
    })
}

/// Dyadic integrability probe near the origin.
#[derive(Clone, Debug)]
pub struct GateReport {
    pub pass: bool,
    /// Estimated `∫_0^T` of the probed function (partial sums plus a geometric
    /// tail) when the probe passes; the last partial sum otherwise.
    pub integral: f64,
    /// `∫` over `[T 2^{-k}, T 2^{-k+1}]`, `k = 1, 2, ...`
    pub increments: Vec<f64>,
    pub message: String,
}

const DYADIC_LEVELS: usize = 60;
const TAIL_WINDOW: usize = 8;
const MAX_TAIL_RATIO: f64 = 0.995;

fn dyadic_probe<F: Fn(f64) -> f64>(f: F, horizon: f64, what: &str) -> GateReport {
    let mut increments = Vec::with_capacity(DYADIC_LEVELS);
    let mut upper = horizon;
    for _ in 0..DYADIC_LEVELS {
        let lower = 0.5 * upper;
        increments.push(tanh_sinh(&f, lower, upper, 1e-12));
        upper = lower;
    }
    let partial: f64 = increments.iter().sum();
    if increments.iter().any(|d| !d.is_finite()) {
        return GateReport {
            pass: false,
            integral: f64::INFINITY,
            increments,
            message: format!("{what} is not finite near t = 0"),
        };
    }
    if increments.iter().all(|&d| d == 0.0) {
        return GateReport {
            pass: true,
            integral: 0.0,
            increments,
            message: format!("{what} vanishes identically"),
        };
    }
    let tail = &increments[DYADIC_LEVELS - TAIL_WINDOW..];
    let ratios: Vec<f64> = tail.windows(2).map(|w| w[1] / w[0]).collect();
    let worst = ratios.iter().copied().fold(0.0, f64::max);
    if ratios.iter().all(|r| r.is_finite()) && worst <= MAX_TAIL_RATIO {
        let last = increments[DYADIC_LEVELS - 1];
        let tail_bound = last * worst / (1.0 - worst);
        GateReport {
            pass: true,
            integral: partial + tail_bound,
            increments,
            message: format!(
                "dyadic integrals of {what} on [T 2^-k, T 2^-k+1] decay geometrically (ratio <= {worst:.4})"
            ),
        }
    } else {
        GateReport {
            pass: false,
            integral: partial,
            increments,
            message: format!(
                "dyadic integrals of {what} do not Cauchy-converge toward t = 0 (tail ratio {worst:.4}); not integrable on (0,T)"
            ),
        }
    }
}

/// Checks `m' ∈ L¹(0, T)`.
pub fn m_star_gate(m: &MemoryKernel, horizon: f64) -> GateReport {
    dyadic_probe(|t| m.derivative(t).abs(), horizon, "|m'|")
}

/// Checks `1 / (1 * m) ∈ L¹(0, T)`.
pub fn reciprocal_cumulative_probe(m: &MemoryKernel, horizon: f64) -> GateReport {
    dyadic_probe(
        |t| 1.0 / m.cumulative(t).unwrap_or(f64::NAN),
        horizon,
        "1/(1*m)",
    )
}
