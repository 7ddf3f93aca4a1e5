use crate::error::{Error, Result};
use crate::kernels::HistoryKernel;
use crate::mild::MildSolution;
use crate::quad::tanh_sinh;
use crate::spectral::hnorm_coeffs;

#[derive(Clone, Debug, PartialEq)]
pub struct HolderReport {
    pub gamma: f64,
    pub mu: f64,
    pub t_min: f64,
    /// `sup (t/h)^γ ‖u(t+h) - u(t)‖_μ` over the sampled pairs.
    pub seminorm: f64,
    pub worst_t: f64,
    pub worst_h: f64,
    /// `sup (t/h)^γ ∫_t^{t+h} |ℓ|` over the same pairs.
    pub ell1: f64,
    /// `sup_t t^γ ∫_0^t |ℓ(τ)| (t-τ)^{-γ} dτ` over grid nodes.
    pub ell2: f64,
    /// Dyadic increments `T/2, T/4, ...` down to the smallest grid step.
    pub h_values: Vec<f64>,
    pub pairs: usize,
    pub warnings: Vec<String>,
}

/// `u` at time `x`, linear in time between nodes.
fn state_at(u: &MildSolution, x: f64) -> Vec<f64> {
    let t = u.grid.nodes();
    let j = u.grid.locate(x);
    let scale = u.grid.horizon();
    if (x - t[j]).abs() <= 1e-12 * scale || j + 1 >= t.len() {
        return u.states[j].coeffs().to_vec();
    }
    if (t[j + 1] - x).abs() <= 1e-12 * scale {
        return u.states[j + 1].coeffs().to_vec();
    }
    let s = (x - t[j]) / (t[j + 1] - t[j]);
    u.states[j]
        .coeffs()
        .iter()
        .zip(u.states[j + 1].coeffs())
        .map(|(a, b)| a + s * (b - a))
        .collect()
}

/// Weighted Hölder seminorm of a computed solution over `t >= t_min` and
/// dyadic `h`, plus the history-kernel constants `ℓ*₁`, `ℓ*₂`.
pub fn holder_estimate(
    u: &MildSolution,
    l: &HistoryKernel,
    gamma: f64,
    mu: f64,
    t_min: f64,
) -> Result<HolderReport> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Domain(format!("gamma must lie in (0,1), got {gamma}")));
    }
    if !(t_min > 0.0) {
        return Err(Error::Domain(format!("t_min must be positive, got {t_min}")));
    }
    let mut warnings = Vec::new();
    if gamma >= 0.5 {
        warnings.push(format!("gamma = {gamma} is not below 1/2"));
    }
    let grid = &u.grid;
    let t = grid.nodes();
    let horizon = grid.horizon();
    let lambdas = u.states[0].basis().lambdas().to_vec();
    let min_step = t.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let mut h_values = Vec::new();
    let mut h = 0.5 * horizon;
    while h >= min_step * (1.0 - 1e-9) {
        h_values.push(h);
        h *= 0.5;
    }
    let (mut seminorm, mut worst_t, mut worst_h, mut ell1) = (0.0f64, f64::NAN, f64::NAN, 0.0f64);
    let mut pairs = 0;
    for &h in &h_values {
        for (i, &ti) in t.iter().enumerate() {
            if ti < t_min * (1.0 - 1e-12) || ti + h > horizon * (1.0 + 1e-12) {
                continue;
            }
            pairs += 1;
            let weight = (ti / h).powf(gamma);
            let next = state_at(u, ti + h);
            let d: Vec<f64> = next.iter().zip(u.states[i].coeffs()).map(|(a, b)| a - b).collect();
            let v = weight * hnorm_coeffs(&lambdas, &d, mu);
            if v > seminorm || worst_t.is_nan() {
                seminorm = v;
                worst_t = ti;
                worst_h = h;
            }
            ell1 = ell1.max(weight * l.abs_integral(ti, ti + h));
        }
    }
    if pairs == 0 {
        warnings.push("no (t, h) pair satisfies t >= t_min and t + h <= T".into());
    }
    let ell2 = if l.is_zero() {
        0.0
    } else {
        t[1..]
            .iter()
            .map(|&s| {
                let f = |tau: f64| l.value(tau).abs() * (s - tau).powf(-gamma);
                s.powf(gamma) * tanh_sinh(f, 0.0, s, 1e-11)
            })
            .fold(0.0, f64::max)
    };
    Ok(HolderReport {
        gamma,
        mu,
        t_min,
        seminorm,
        worst_t,
        worst_h,
        ell1,
        ell2,
        h_values,
        pairs,
        warnings,
    })
}
