use statrs::function::beta::beta;
use statrs::function::gamma::{gamma, gamma_lr};

use crate::error::{Error, Result};
use crate::kernels::{reciprocal_cumulative_probe, MemoryKernel};
use crate::mild::NonlinearitySpec;
use crate::quad::tanh_sinh;

/// A strict inequality `value < threshold` and its outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
    pub detail: String,
}

fn nonneg(what: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what} must be finite and >= 0, got {v}")))
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("delta must lie in (0,1), got {delta}")))
    }
}

fn check_horizon(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("horizon T must be positive, got {t}")))
    }
}

fn lipschitz_mass(lstar: f64, kstar: f64, l1: f64) -> Result<f64> {
    nonneg("L*", lstar)?;
    nonneg("K*", kstar)?;
    nonneg("|l|_L1", l1)?;
    Ok(lstar * lstar + kstar * kstar * l1 * l1)
}

/// Small-data existence: `8 T^{1-δ} (1-δ)^{-1} (L*² + K*² ‖ℓ‖²_{L¹}) < 1`.
pub fn check_small_data(lstar: f64, kstar: f64, l1: f64, horizon: f64, delta: f64) -> Result<Decision> {
    check_delta(delta)?;
    check_horizon(horizon)?;
    let value = 8.0 * horizon.powf(1.0 - delta) / (1.0 - delta) * lipschitz_mass(lstar, kstar, l1)?;
    Ok(Decision {
        name: "small_data",
        value,
        threshold: 1.0,
        pass: value < 1.0,
        detail: "8 T^(1-delta) (1-delta)^-1 (L*^2 + K*^2 |l|^2) < 1".into(),
    })
}

/// Regular forcing (output in `ℍ^{μ-1}`): `4 (L*² + K*² ‖ℓ‖²_{L¹}) < λ_1`.
pub fn check_regular_forcing(lstar: f64, kstar: f64, l1: f64, lambda1: f64) -> Result<Decision> {
    if !(lambda1 > 0.0) {
        return Err(Error::Domain(format!("lambda_1 must be positive, got {lambda1}")));
    }
    let value = 4.0 * lipschitz_mass(lstar, kstar, l1)?;
    Ok(Decision {
        name: "regular_forcing",
        value,
        threshold: lambda1,
        pass: value < lambda1,
        detail: "4 (L*^2 + K*^2 |l|^2) < lambda_1".into(),
    })
}

/// Hölder regularity: `16 B(1-δ, 1-2γ) T^{1-δ} (L*² + K*² ℓ*₂²) < 1`, with
/// `γ ∈ (δ/2, 1/2)`.
pub fn check_holder(
    lstar: f64,
    kstar: f64,
    ell2: f64,
    horizon: f64,
    delta: f64,
    gamma_exp: f64,
) -> Result<Decision> {
    check_delta(delta)?;
    check_horizon(horizon)?;
    if !(gamma_exp > 0.0 && gamma_exp < 0.5) {
        return Err(Error::Domain(format!("gamma must lie in (0,1/2), got {gamma_exp}")));
    }
    let b = beta(1.0 - delta, 1.0 - 2.0 * gamma_exp);
    let value = 16.0 * b * horizon.powf(1.0 - delta) * lipschitz_mass(lstar, kstar, ell2)?;
    let in_range = gamma_exp > 0.5 * delta;
    Ok(Decision {
        name: "holder",
        value,
        threshold: 1.0,
        pass: value < 1.0 && in_range,
        detail: if in_range {
            format!("16 B(1-delta,1-2gamma) T^(1-delta) (L*^2 + K*^2 l2*^2) < 1, B = {b}")
        } else {
            format!("gamma = {gamma_exp} is not above delta/2 = {}", 0.5 * delta)
        },
    })
}

/// Which convolution estimate the weighted contraction relies on.
#[derive(Clone, Debug)]
pub enum ConvolutionBound {
    /// Output in `ℍ^{μ-1-δ}`, kernel `τ^{-δ}`.
    Smoothing { delta: f64 },
    /// Output in `ℍ^{μ-2}`, kernel `1 / (1*m)(τ)`; needs that to be integrable.
    WeakTarget(MemoryKernel),
}

impl ConvolutionBound {
    /// `∫_0^T e^{-2βτ} k(τ) dτ`.
    fn weighted_mass(&self, horizon: f64, beta_w: f64) -> Result<f64> {
        match self {
            Self::Smoothing { delta } => {
                check_delta(*delta)?;
                Ok(gamma_weighted(1.0 - delta, 1.0, horizon, beta_w))
            }
            Self::WeakTarget(m) => {
                let probe = reciprocal_cumulative_probe(m, horizon);
                if !probe.pass {
                    return Err(Error::KernelGateFailed(probe.message));
                }
                if let MemoryKernel::Fractional { m0, alpha } = m {
                    let c = (1.0 - alpha) * gamma(*alpha) / m0;
                    return Ok(gamma_weighted(*alpha, c, horizon, beta_w));
                }
                let f = |s: f64| (-2.0 * beta_w * s).exp() / m.cumulative(s).unwrap_or(f64::NAN);
                Ok(tanh_sinh(f, 0.0, horizon, 1e-12))
            }
        }
    }
}

/// `c ∫_0^T e^{-2βτ} τ^{a-1} dτ`.
fn gamma_weighted(a: f64, c: f64, horizon: f64, beta_w: f64) -> f64 {
    if beta_w == 0.0 {
        return c * horizon.powf(a) / a;
    }
    let x = 2.0 * beta_w;
    c * x.powf(-a) * gamma(a) * gamma_lr(a, x * horizon)
}

/// Global Lipschitz case in the norm `sup e^{-βt}‖·‖_μ`:
/// `2 (L*² + K*² ‖ℓ‖²) ∫_0^T e^{-2βτ} k(τ) dτ < 1`.
pub fn check_weighted_contraction(
    lstar: f64,
    kstar: f64,
    l1: f64,
    horizon: f64,
    bound: &ConvolutionBound,
    beta_w: f64,
) -> Result<Decision> {
    check_horizon(horizon)?;
    nonneg("beta", beta_w)?;
    let value = 2.0 * lipschitz_mass(lstar, kstar, l1)? * bound.weighted_mass(horizon, beta_w)?;
    Ok(Decision {
        name: "weighted_contraction",
        value,
        threshold: 1.0,
        pass: value < 1.0,
        detail: format!("beta = {beta_w}; contraction factor sqrt(value) = {}", value.sqrt()),
    })
}

/// Smallest `β >= 0` (to bisection accuracy) with contraction value `<= target`.
pub fn choose_beta(
    lstar: f64,
    kstar: f64,
    l1: f64,
    horizon: f64,
    bound: &ConvolutionBound,
    target: f64,
) -> Result<f64> {
    if !(target > 0.0) {
        return Err(Error::Domain(format!("target must be positive, got {target}")));
    }
    let value = |b: f64| check_weighted_contraction(lstar, kstar, l1, horizon, bound, b).map(|d| d.value);
    if value(0.0)? <= target {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while value(hi)? > target {
        hi *= 2.0;
        if hi > 1e18 {
            return Err(Error::Domain("no finite beta reaches the target".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if value(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Radius of the invariant ball for the small-data result.
#[derive(Clone, Debug, PartialEq)]
pub struct RadiusChoice {
    pub rho: f64,
    /// `8 T^{1-δ} (1-δ)^{-1} (L_f(ρ)² + K_f(ρ‖ℓ‖)² ‖ℓ‖²)` at the chosen radius.
    pub value: f64,
    /// Radii tried, in order.
    pub scanned: Vec<f64>,
}

const RADIUS_SCAN: usize = 40;

/// First radius `ρ` in `2‖ξ‖, 4‖ξ‖, 8‖ξ‖, ...` with
/// `8 T^{1-δ} (1-δ)^{-1} (L_f(ρ)² + K_f(ρ‖ℓ‖)² ‖ℓ‖²) <= 1`. For monotone
/// curves the inequality then holds on every smaller ball.
pub fn select_radius(
    spec: &NonlinearitySpec,
    l1: f64,
    horizon: f64,
    delta: f64,
    xi_norm: f64,
) -> Result<RadiusChoice> {
    check_delta(delta)?;
    check_horizon(horizon)?;
    nonneg("|xi|", xi_norm)?;
    let factor = 8.0 * horizon.powf(1.0 - delta) / (1.0 - delta);
    let lip = &spec.lipschitz;
    let value = |rho: f64| -> f64 {
        let l = (lip.l_f)(rho);
        let k = (lip.k_f)(rho * l1);
        factor * (l * l + k * k * l1 * l1)
    };
    if xi_norm == 0.0 {
        let v = factor * lipschitz_mass(lip.l_star, lip.k_star, l1)?;
        return if v <= 1.0 {
            Ok(RadiusChoice {
                rho: 0.0,
                value: v,
                scanned: vec![0.0],
            })
        } else {
            Err(Error::RadiusSelection(format!(
                "zero datum, but the limit value {v} exceeds 1"
            )))
        };
    }
    let mut scanned = Vec::new();
    let mut rho = 2.0 * xi_norm;
    for _ in 0..RADIUS_SCAN {
        scanned.push(rho);
        let v = value(rho);
        if v <= 1.0 {
            return Ok(RadiusChoice { rho, value: v, scanned });
        }
        rho *= 2.0;
    }
    Err(Error::RadiusSelection(format!(
        "8 T^(1-delta) (1-delta)^-1 (L_f(rho)^2 + K_f(rho |l|)^2 |l|^2) exceeds 1 for every rho in [{:e}, {:e}] (at rho = 2|xi| it is {:e}); reduce |xi| or the Lipschitz data",
        scanned[0],
        rho / 2.0,
        value(scanned[0])
    )))
}
