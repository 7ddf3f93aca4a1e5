use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::spectral::{Domain, SpectralBasis, SpectralField};

/// A monotone curve `ρ ↦ L(ρ)`.
pub type Curve = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `f(v, w)` on coefficient vectors. Must map zeros to zeros.
pub type CustomFn = Arc<dyn Fn(&SpectralBasis, &[f64], &[f64]) -> Result<Vec<f64>> + Send + Sync>;

#[derive(Clone)]
pub enum Nonlinearity {
    Zero,
    /// `f(v, w)_n = c_n v_n`
    LinearDiagonal(Vec<f64>),
    /// `c |v|^{p-1} v` (sign preserving) or `c |v|^p` (`absolute`), evaluated
    /// at collocation nodes.
    PolynomialPower { p: f64, coefficient: f64, absolute: bool },
    /// `(χ · ∇) w` for a constant vector `χ`.
    AdvectionHistory { chi: Vec<f64> },
    Sum(Vec<Nonlinearity>),
    Custom(CustomFn),
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "Zero"),
            Self::LinearDiagonal(c) => f.debug_tuple("LinearDiagonal").field(c).finish(),
            Self::PolynomialPower { p, coefficient, absolute } => f
                .debug_struct("PolynomialPower")
                .field("p", p)
                .field("coefficient", coefficient)
                .field("absolute", absolute)
                .finish(),
            Self::AdvectionHistory { chi } => {
                f.debug_struct("AdvectionHistory").field("chi", chi).finish()
            }
            Self::Sum(parts) => f.debug_tuple("Sum").field(parts).finish(),
            Self::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl Nonlinearity {
    /// Whether `f` depends on its second argument.
    pub fn uses_history(&self) -> bool {
        match self {
            Self::AdvectionHistory { chi } => chi.iter().any(|&c| c != 0.0),
            Self::Sum(parts) => parts.iter().any(Self::uses_history),
            Self::Custom(_) => true,
            _ => false,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Self::Zero => true,
            Self::LinearDiagonal(c) => c.iter().all(|&x| x == 0.0),
            Self::PolynomialPower { coefficient, .. } => *coefficient == 0.0,
            Self::AdvectionHistory { chi } => chi.iter().all(|&c| c == 0.0),
            Self::Sum(parts) => parts.iter().all(Self::is_zero),
            Self::Custom(_) => false,
        }
    }

    fn validate(&self, basis: &SpectralBasis) -> Result<()> {
        match self {
            Self::LinearDiagonal(c) if c.len() != basis.len() => Err(Error::BasisMismatch(format!(
                "diagonal nonlinearity has {} coefficients for {} modes",
                c.len(),
                basis.len()
            ))),
            Self::PolynomialPower { p, .. } if !(*p > 1.0) || !p.is_finite() => {
                Err(Error::Domain(format!("power nonlinearity needs p > 1, got {p}")))
            }
            Self::AdvectionHistory { chi } if chi.len() != basis.domain().dimension() => {
                Err(Error::Domain(format!(
                    "advection vector has {} components on a {}-dimensional domain",
                    chi.len(),
                    basis.domain().dimension()
                )))
            }
            Self::Sum(parts) => parts.iter().try_for_each(|p| p.validate(basis)),
            _ => Ok(()),
        }
    }

    /// `f(v, w)` on coefficient vectors.
    pub fn eval(&self, basis: &SpectralBasis, v: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        let n = basis.len();
        match self {
            Self::Zero => Ok(vec![0.0; n]),
            Self::LinearDiagonal(c) => Ok(c.iter().zip(v).map(|(a, b)| a * b).collect()),
            Self::PolynomialPower { p, coefficient, absolute } => {
                if v.iter().all(|&x| x == 0.0) || *coefficient == 0.0 {
                    return Ok(vec![0.0; n]);
                }
                let mut samples = basis.synthesize_nodes(v);
                for (node, x) in samples.iter_mut().enumerate() {
                    let y = if *absolute {
                        coefficient * x.abs().powf(*p)
                    } else {
                        coefficient * x.abs().powf(p - 1.0) * *x
                    };
                    if !y.is_finite() {
                        return Err(Error::NonFinite {
                            node,
                            position: basis.nodes().swap_remove(node),
                            value: y,
                        });
                    }
                    *x = y;
                }
                basis.project_nodes(&samples)
            }
            Self::AdvectionHistory { chi } => {
                let mut out = vec![0.0; n];
                for (axis, &c) in chi.iter().enumerate() {
                    if c != 0.0 {
                        let d = basis.derivative_coefficients(w, axis);
                        out.iter_mut().zip(d).for_each(|(o, x)| *o += c * x);
                    }
                }
                Ok(out)
            }
            Self::Sum(parts) => {
                let mut out = vec![0.0; n];
                for p in parts {
                    let y = p.eval(basis, v, w)?;
                    out.iter_mut().zip(y).for_each(|(o, x)| *o += x);
                }
                Ok(out)
            }
            Self::Custom(f) => {
                let y = f(basis, v, w)?;
                if y.len() != n {
                    return Err(Error::BasisMismatch(format!(
                        "custom nonlinearity returned {} coefficients for {n} modes",
                        y.len()
                    )));
                }
                Ok(y)
            }
        }
    }
}

/// Local Lipschitz data: `‖f(v1,w1) - f(v2,w2)‖_{-θ} <= L(ρ)‖v1-v2‖_μ + K(ρ')‖w1-w2‖_μ`
/// on balls of radius `ρ`, `ρ'`, with limits `L*`, `K*` as the radii go to 0.
#[derive(Clone)]
pub struct Lipschitz {
    pub l_f: Curve,
    pub k_f: Curve,
    pub l_star: f64,
    pub k_star: f64,
}

impl fmt::Debug for Lipschitz {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Lipschitz")
            .field("l_star", &self.l_star)
            .field("k_star", &self.k_star)
            .finish_non_exhaustive()
    }
}

impl Lipschitz {
    pub fn constant(l: f64, k: f64) -> Self {
        Self {
            l_f: Arc::new(move |_| l),
            k_f: Arc::new(move |_| k),
            l_star: l,
            k_star: k,
        }
    }

    fn add(&self, other: &Self) -> Self {
        let (a, b) = (self.l_f.clone(), other.l_f.clone());
        let (c, d) = (self.k_f.clone(), other.k_f.clone());
        Self {
            l_f: Arc::new(move |r| a(r) + b(r)),
            k_f: Arc::new(move |r| c(r) + d(r)),
            l_star: self.l_star + other.l_star,
            k_star: self.k_star + other.k_star,
        }
    }
}

/// A nonlinearity with its regularity orders and Lipschitz data.
#[derive(Clone, Debug)]
pub struct NonlinearitySpec {
    pub kind: Nonlinearity,
    /// Order of the inputs, `0 < μ < 2`.
    pub mu: f64,
    /// Output lies in `ℍ^{-θ}`.
    pub theta: f64,
    pub lipschitz: Lipschitz,
}

/// `sup |u| <= C ‖u‖_{ℍ¹}` on the span of the basis. On an interval this is
/// the sharp `√L / 2`; on a rectangle the truncation-dependent
/// `(Σ_n ‖e_n‖²_∞ / λ_n)^{1/2}`, which grows like `√(log N)`.
pub fn sup_norm_constant(basis: &SpectralBasis) -> f64 {
    match basis.domain() {
        Domain::Interval { length } => 0.5 * length.sqrt(),
        Domain::Rectangle { lx, ly } => {
            let e_inf = 4.0 / (lx * ly);
            basis.lambdas().iter().map(|l| e_inf / l).sum::<f64>().sqrt()
        }
    }
}

fn check_orders(mu: f64, theta: f64) -> Result<()> {
    if !(mu > 0.0 && mu < 2.0) {
        return Err(Error::Domain(format!("mu must lie in (0,2), got {mu}")));
    }
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::Domain(format!("theta must be positive, got {theta}")));
    }
    Ok(())
}

impl NonlinearitySpec {
    pub fn new(kind: Nonlinearity, mu: f64, theta: f64, lipschitz: Lipschitz) -> Result<Self> {
        check_orders(mu, theta)?;
        Ok(Self {
            kind,
            mu,
            theta,
            lipschitz,
        })
    }

    pub fn zero(mu: f64, theta: f64) -> Result<Self> {
        Self::new(Nonlinearity::Zero, mu, theta, Lipschitz::constant(0.0, 0.0))
    }

    /// `f(v)_n = c_n v_n`, with `L = max_n |c_n| λ_n^{-(θ+μ)/2}`.
    pub fn linear_diagonal(basis: &SpectralBasis, coeffs: Vec<f64>, mu: f64, theta: f64) -> Result<Self> {
        check_orders(mu, theta)?;
        let kind = Nonlinearity::LinearDiagonal(coeffs);
        kind.validate(basis)?;
        let Nonlinearity::LinearDiagonal(c) = &kind else { unreachable!() };
        let l = c
            .iter()
            .zip(basis.lambdas())
            .map(|(c, lam)| c.abs() * lam.powf(-(theta + mu) / 2.0))
            .fold(0.0, f64::max);
        Self::new(kind, mu, theta, Lipschitz::constant(l, 0.0))
    }

    /// `c |v|^{p-1} v` (or `c |v|^p`) with `μ = 1`:
    /// `L(ρ) = p |c| λ_1^{-(θ+1)/2} (C ρ)^{p-1}`, `C` from [`sup_norm_constant`].
    pub fn power(basis: &SpectralBasis, p: f64, coefficient: f64, absolute: bool, theta: f64) -> Result<Self> {
        let kind = Nonlinearity::PolynomialPower { p, coefficient, absolute };
        kind.validate(basis)?;
        let scale = p * coefficient.abs() * basis.lambda1().powf(-(theta + 1.0) / 2.0);
        let c_inf = sup_norm_constant(basis);
        let lipschitz = Lipschitz {
            l_f: Arc::new(move |rho| scale * (c_inf * rho).powf(p - 1.0)),
            k_f: Arc::new(|_| 0.0),
            l_star: 0.0,
            k_star: 0.0,
        };
        Self::new(kind, 1.0, theta, lipschitz)
    }

    /// `(χ · ∇) w` with `μ = 1` and `K = |χ| λ_1^{-θ/2}`.
    pub fn advection(basis: &SpectralBasis, chi: Vec<f64>, theta: f64) -> Result<Self> {
        let kind = Nonlinearity::AdvectionHistory { chi };
        kind.validate(basis)?;
        let Nonlinearity::AdvectionHistory { chi } = &kind else { unreachable!() };
        let norm = chi.iter().map(|c| c * c).sum::<f64>().sqrt();
        let k = norm * basis.lambda1().powf(-theta / 2.0);
        Self::new(kind, 1.0, theta, Lipschitz::constant(0.0, k))
    }

    /// The power term plus history advection, `μ = 1`, `θ = δ`.
    pub fn power_advection(
        basis: &SpectralBasis,
        p: f64,
        absolute: bool,
        chi: Vec<f64>,
        delta: f64,
    ) -> Result<Self> {
        Self::sum(vec![
            Self::power(basis, p, 1.0, absolute, delta)?,
            Self::advection(basis, chi, delta)?,
        ])
    }

    /// Sum of parts sharing `μ` and `θ`; Lipschitz data add up.
    pub fn sum(parts: Vec<Self>) -> Result<Self> {
        let Some(first) = parts.first() else {
            return Err(Error::Domain("empty sum of nonlinearities".into()));
        };
        let (mu, theta) = (first.mu, first.theta);
        if parts.iter().any(|p| p.mu != mu || p.theta != theta) {
            return Err(Error::Domain("summed nonlinearities must share mu and theta".into()));
        }
        let lipschitz = parts[1..]
            .iter()
            .fold(first.lipschitz.clone(), |acc, p| acc.add(&p.lipschitz));
        let kind = Nonlinearity::Sum(parts.into_iter().map(|p| p.kind).collect());
        Self::new(kind, mu, theta, lipschitz)
    }

    pub fn check_basis(&self, basis: &SpectralBasis) -> Result<()> {
        self.kind.validate(basis)
    }
}

/// `f(v, w)` for fields on one basis.
pub fn evaluate_f(spec: &NonlinearitySpec, v: &SpectralField, w: &SpectralField) -> Result<SpectralField> {
    v.check_same_basis(w)?;
    spec.kind.validate(v.basis())?;
    let out = spec.kind.eval(v.basis(), v.coeffs(), w.coeffs())?;
    SpectralField::new(v.basis().clone(), out)
}
