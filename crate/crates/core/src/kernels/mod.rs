//! Memory kernels `m` of the nonlocal derivative, history kernels `ℓ` of the
//! convolution operator `H`, and their exact cell moments.

mod certify;
mod table;

pub use certify::{
    certify_completely_positive, certify_pc, m_star_gate, reciprocal_cumulative_probe,
    CertificateStatus, CompletePositivityReport, GateReport, PcReport, ThetaCertificate,
    DEFAULT_CERTIFICATE_TOL,
};
pub use table::PiecewiseLinear;

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::quad::gauss_legendre8;

/// Moments of a kernel over one cell `[a, b]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CellMoments {
    /// `∫_a^b k(σ) dσ`
    pub mass: f64,
    /// `∫_a^b k(σ) (σ - a) dσ`
    pub first: f64,
}

/// A kernel that can be integrated exactly (or to machine precision) against
/// linear functions on any cell. Implemented by every kernel used in a causal
/// convolution.
pub trait Kernel: Sync {
    /// Moments over `[a, b]`, `0 <= a <= b`.
    fn cell_moments(&self, a: f64, b: f64) -> CellMoments;

    /// Size of the kernel near the origin, used to judge when a step is stiff.
    /// Singular kernels report their value at `horizon`; the singular part is
    /// judged separately through the first-cell weight.
    fn local_scale(&self, _horizon: f64) -> f64 {
        1.0
    }

    /// Whether the kernel is unbounded at the origin.
    fn is_singular(&self) -> bool {
        false
    }
}

/// Kernel `m` of the nonlocal derivative `D_t^{m} v = d/dt ∫_0^t m(t-s) v(s) ds`.
#[derive(Clone, Debug, PartialEq)]
pub enum MemoryKernel {
    Zero,
    Constant { m0: f64 },
    /// `m(t) = m0 t^{-α} / Γ(α)`
    Fractional { m0: f64, alpha: f64 },
    /// `m(t) = m0 e^{-c t}`
    Exponential { m0: f64, decay: f64 },
    /// Linear interpolation of samples, extended by constants outside them.
    Tabulated(PiecewiseLinear),
}

impl MemoryKernel {
    pub fn constant(m0: f64) -> Result<Self> {
        if !(m0 >= 0.0) || !m0.is_finite() {
            return Err(Error::Domain(format!("constant kernel needs m0 >= 0, got {m0}")));
        }
        Ok(Self::Constant { m0 })
    }

    pub fn fractional(m0: f64, alpha: f64) -> Result<Self> {
        if !(m0 > 0.0) || !m0.is_finite() {
            return Err(Error::Domain(format!("fractional kernel needs m0 > 0, got {m0}")));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Domain(format!(
                "fractional kernel needs alpha in (0,1), got {alpha}"
            )));
        }
        Ok(Self::Fractional { m0, alpha })
    }

    pub fn exponential(m0: f64, decay: f64) -> Result<Self> {
        if !(m0 > 0.0) || !m0.is_finite() {
            return Err(Error::Domain(format!("exponential kernel needs m0 > 0, got {m0}")));
        }
        if !(decay > 0.0) || !decay.is_finite() {
            return Err(Error::Domain(format!(
                "exponential kernel needs decay > 0, got {decay}"
            )));
        }
        Ok(Self::Exponential { m0, decay })
    }

    /// Tabulated kernel from samples with strictly increasing, positive
    /// abscissae and nonnegative values.
    pub fn tabulated(t: Vec<f64>, m: Vec<f64>) -> Result<Self> {
        if t.first().is_some_and(|&t0| !(t0 > 0.0)) {
            return Err(Error::Domain("tabulated kernel abscissae must start above 0".into()));
        }
        if m.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::Domain("tabulated memory kernel values must be >= 0".into()));
        }
        Ok(Self::Tabulated(PiecewiseLinear::new(t, m)?))
    }

    /// Parses a two-column CSV (`t, m(t)`); a non-numeric first line is
    /// treated as a header.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let (t, m) = table::parse_two_columns(text)?;
        Self::tabulated(t, m)
    }

    /// Pointwise value for `t > 0`.
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Constant { m0 } => *m0,
            Self::Fractional { m0, alpha } => m0 * t.powf(-alpha) / gamma(*alpha),
            Self::Exponential { m0, decay } => m0 * (-decay * t).exp(),
            Self::Tabulated(p) => p.value(t),
        }
    }

    /// `m(0)`, or `None` when the kernel is singular at the origin.
    pub fn value_at_origin(&self) -> Option<f64> {
        match self {
            Self::Fractional { .. } => None,
            other => Some(other.value(0.0)),
        }
    }

    /// `m'(t)` for `t > 0`.
    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            Self::Zero | Self::Constant { .. } => 0.0,
            Self::Fractional { m0, alpha } => {
                -alpha * m0 * t.powf(-alpha - 1.0) / gamma(*alpha)
            }
            Self::Exponential { m0, decay } => -decay * m0 * (-decay * t).exp(),
            Self::Tabulated(p) => p.slope(t),
        }
    }

    /// `(1 * m)(t) = ∫_0^t m`.
    pub fn cumulative(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("cumulative integral needs t >= 0, got {t}")));
        }
        Ok(match self {
            Self::Zero => 0.0,
            Self::Constant { m0 } => m0 * t,
            Self::Fractional { m0, alpha } => {
                m0 * t.powf(1.0 - alpha) / ((1.0 - alpha) * gamma(*alpha))
            }
            Self::Exponential { m0, decay } => -m0 * (-decay * t).exp_m1() / decay,
            Self::Tabulated(p) => p.integral(0.0, t),
        })
    }

    /// Whether cell integrals are available in closed form.
    pub fn has_closed_form_moments(&self) -> bool {
        !matches!(self, Self::Tabulated(_))
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, Self::Fractional { .. })
    }

    /// Nonincreasing on `(0, ∞)`.
    pub fn is_nonincreasing(&self) -> bool {
        match self {
            Self::Tabulated(p) => p.values().windows(2).all(|w| w[1] <= w[0]),
            _ => true,
        }
    }

    /// The derivative `m'` as a history kernel, used when the nonlocal term is
    /// split as `m(0) v + m' * v`. Fails for kernels singular at the origin.
    pub fn derivative_kernel(&self) -> Result<HistoryKernel> {
        match self {
            Self::Zero | Self::Constant { .. } => Ok(HistoryKernel::Zero),
            Self::Exponential { m0, decay } => HistoryKernel::exponential(-decay * m0, *decay),
            Self::Fractional { .. } => Err(Error::KernelGateFailed(
                "the fractional kernel has no integrable derivative at the origin".into(),
            )),
            Self::Tabulated(p) => {
                // piecewise-constant slopes sampled at cell midpoints
                let t = p.abscissae();
                if t.len() < 2 {
                    return Ok(HistoryKernel::Zero);
                }
                let mid: Vec<f64> = t.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
                let slopes: Vec<f64> = mid.iter().map(|&s| p.slope(s)).collect();
                HistoryKernel::tabulated(mid, slopes)
            }
        }
    }
}

impl Kernel for MemoryKernel {
    fn cell_moments(&self, a: f64, b: f64) -> CellMoments {
        match self {
            Self::Zero => CellMoments::default(),
            Self::Constant { m0 } => constant_moments(*m0, a, b),
            Self::Fractional { m0, alpha } => {
                power_moments(m0 / gamma(*alpha), -alpha, a, b)
            }
            Self::Exponential { m0, decay } => exponential_moments(*m0, *decay, a, b),
            Self::Tabulated(p) => p.cell_moments(a, b),
        }
    }
}

/// `1 + m`, the kernel of the integrated relaxation equation.
#[derive(Clone, Copy, Debug)]
pub struct ShiftedKernel<'a>(pub &'a MemoryKernel);

impl Kernel for ShiftedKernel<'_> {
    fn cell_moments(&self, a: f64, b: f64) -> CellMoments {
        let m = self.0.cell_moments(a, b);
        let h = b - a;
        CellMoments {
            mass: m.mass + h,
            first: m.first + 0.5 * h * h,
        }
    }

    fn local_scale(&self, horizon: f64) -> f64 {
        1.0 + self.0.value_at_origin().unwrap_or_else(|| self.0.value(horizon)).abs()
    }

    fn is_singular(&self) -> bool {
        self.0.value_at_origin().is_none()
    }
}

/// Kernel `ℓ` of the history operator `H v = ℓ * v`.
#[derive(Clone, Debug, PartialEq)]
pub enum HistoryKernel {
    Zero,
    Constant { value: f64 },
    /// `ℓ(t) = A e^{-c t}`
    Exponential { amplitude: f64, decay: f64 },
    /// `ℓ(t) = A t^β`, `β > -1`
    PowerLaw { amplitude: f64, exponent: f64 },
    Tabulated(PiecewiseLinear),
}

impl HistoryKernel {
    pub fn constant(value: f64) -> Result<Self> {
        finite("history constant", value)?;
        Ok(Self::Constant { value })
    }

    pub fn exponential(amplitude: f64, decay: f64) -> Result<Self> {
        finite("history amplitude", amplitude)?;
        if !(decay >= 0.0) || !decay.is_finite() {
            return Err(Error::Domain(format!("history decay must be >= 0, got {decay}")));
        }
        Ok(Self::Exponential { amplitude, decay })
    }

    pub fn power_law(amplitude: f64, exponent: f64) -> Result<Self> {
        finite("history amplitude", amplitude)?;
        if !(exponent > -1.0) || !exponent.is_finite() {
            return Err(Error::Domain(format!(
                "power-law exponent must exceed -1 for integrability, got {exponent}"
            )));
        }
        Ok(Self::PowerLaw { amplitude, exponent })
    }

    pub fn tabulated(t: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Ok(Self::Tabulated(PiecewiseLinear::new(t, values)?))
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let (t, v) = table::parse_two_columns(text)?;
        Self::tabulated(t, v)
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Constant { value } => *value,
            Self::Exponential { amplitude, decay } => amplitude * (-decay * t).exp(),
            Self::PowerLaw { amplitude, exponent } => amplitude * t.powf(*exponent),
            Self::Tabulated(p) => p.value(t),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Self::Zero => true,
            Self::Constant { value } => *value == 0.0,
            Self::Exponential { amplitude, .. } | Self::PowerLaw { amplitude, .. } => {
                *amplitude == 0.0
            }
            Self::Tabulated(p) => p.values().iter().all(|&v| v == 0.0),
        }
    }

    /// `∫_a^b |ℓ|`.
    pub fn abs_integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        match self {
            Self::Tabulated(p) => p.abs_integral(a, b),
            // single-signed kinds
            _ => self.cell_moments(a, b).mass.abs(),
        }
    }

    /// `‖ℓ‖_{L¹(0,T)}`.
    pub fn l1_norm(&self, horizon: f64) -> f64 {
        self.abs_integral(0.0, horizon)
    }
}

impl Kernel for HistoryKernel {
    fn cell_moments(&self, a: f64, b: f64) -> CellMoments {
        match self {
            Self::Zero => CellMoments::default(),
            Self::Constant { value } => constant_moments(*value, a, b),
            Self::Exponential { amplitude, decay } => {
                exponential_moments(*amplitude, *decay, a, b)
            }
            Self::PowerLaw { amplitude, exponent } => power_moments(*amplitude, *exponent, a, b),
            Self::Tabulated(p) => p.cell_moments(a, b),
        }
    }
}

fn finite(what: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what} must be finite, got {v}")))
    }
}

fn constant_moments(c: f64, a: f64, b: f64) -> CellMoments {
    let h = b - a;
    CellMoments {
        mass: c * h,
        first: 0.5 * c * h * h,
    }
}

/// Moments of `c σ^β`. Cells touching the origin use the antiderivative;
/// cells away from it use Gauss-Legendre, which avoids the cancellation of
/// differencing large powers.
fn power_moments(c: f64, beta: f64, a: f64, b: f64) -> CellMoments {
    if b <= a {
        return CellMoments::default();
    }
    if a == 0.0 {
        let mass = c * b.powf(beta + 1.0) / (beta + 1.0);
        let first = c * b.powf(beta + 2.0) / (beta + 2.0);
        return CellMoments { mass, first };
    }
    if b > 3.0 * a {
        // wide cell: the closed form is well conditioned here
        let p1 = beta + 1.0;
        let p2 = beta + 2.0;
        let mass = c * (b.powf(p1) - a.powf(p1)) / p1;
        let raw = c * (b.powf(p2) - a.powf(p2)) / p2;
        return CellMoments {
            mass,
            first: raw - a * mass,
        };
    }
    let mass = gauss_legendre8(|s| s.powf(beta), a, b) * c;
    let first = gauss_legendre8(|s| s.powf(beta) * (s - a), a, b) * c;
    CellMoments { mass, first }
}

fn exponential_moments(amp: f64, decay: f64, a: f64, b: f64) -> CellMoments {
    let h = b - a;
    if decay == 0.0 {
        return constant_moments(amp, a, b);
    }
    let y = decay * h;
    let scale = amp * (-decay * a).exp();
    // ∫_0^h e^{-c x} dx and ∫_0^h x e^{-c x} dx
    let i0 = -(-y).exp_m1() / decay;
    let i1 = if y < 1e-3 {
        // h^2 (1/2 - y/3 + y^2/8 - y^3/30)
        h * h * (0.5 - y / 3.0 + y * y / 8.0 - y * y * y / 30.0)
    } else {
        (-(-y).exp_m1() - y * (-y).exp()) / (decay * decay)
    };
    CellMoments {
        mass: scale * i0,
        first: scale * i1,
    }
}

/// Exact cell integrals `∫ m` and `∫ s m(s) ds` over every grid cell.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentTable {
    /// `∫_{t_j}^{t_{j+1}} m(s) ds`
    pub mass: Vec<f64>,
    /// `∫_{t_j}^{t_{j+1}} s m(s) ds`
    pub first: Vec<f64>,
}

/// `(1 * m)(t)`.
pub fn kernel_cumulative(m: &MemoryKernel, t: f64) -> Result<f64> {
    m.cumulative(t)
}

/// Cell moments of `m` on every cell of `grid`.
pub fn kernel_moments(m: &MemoryKernel, grid: &TimeGrid) -> MomentTable {
    let nodes = grid.nodes();
    let (mut mass, mut first) = (Vec::new(), Vec::new());
    for w in nodes.windows(2) {
        let cm = m.cell_moments(w[0], w[1]);
        mass.push(cm.mass);
        first.push(cm.first + w[0] * cm.mass);
    }
    MomentTable { mass, first }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::tanh_sinh;
    use std::f64::consts::PI;

    #[test]
    fn cumulative_examples() {
        assert_eq!(kernel_cumulative(&MemoryKernel::Zero, 1.0).unwrap(), 0.0);
        let c = MemoryKernel::constant(1.0).unwrap();
        assert_eq!(kernel_cumulative(&c, 2.0).unwrap(), 2.0);
        let f = MemoryKernel::fractional(1.0, 0.5).unwrap();
        let v = kernel_cumulative(&f, 1.0).unwrap();
        assert!((v - 2.0 / PI.sqrt()).abs() < 1e-14);
        // quadrature away from the origin cross-checks the antiderivative
        let tail = tanh_sinh(|s| f.value(s), 0.25, 1.0, 1e-13);
        let diff = v - kernel_cumulative(&f, 0.25).unwrap();
        assert!((tail - diff).abs() < 1e-11);
        assert!(kernel_cumulative(&f, -1.0).is_err());
    }

    #[test]
    fn moment_examples() {
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        let zero = kernel_moments(&MemoryKernel::Zero, &g);
        assert!(zero.mass.iter().chain(&zero.first).all(|&v| v == 0.0));

        let h = 0.25;
        let c = kernel_moments(&MemoryKernel::constant(2.0).unwrap(), &g);
        assert!((c.mass[0] - 2.0 * h).abs() < 1e-15);
        assert!((c.first[0] - h * h).abs() < 1e-15);

        let f = kernel_moments(&MemoryKernel::fractional(1.0, 0.5).unwrap(), &g);
        assert!((f.mass[0] - 2.0 * h.sqrt() / PI.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn exponential_moments_match_quadrature() {
        let k = MemoryKernel::exponential(1.5, 2.0).unwrap();
        for &(a, b) in &[(0.0, 1e-6), (0.0, 0.3), (0.7, 0.7001), (1.0, 2.5)] {
            let m = k.cell_moments(a, b);
            // composite Gauss-Legendre is exact to rounding for this smooth integrand
            let composite = |f: &dyn Fn(f64) -> f64| -> f64 {
                let h = (b - a) / 16.0;
                (0..16)
                    .map(|i| gauss_legendre8(f, a + i as f64 * h, a + (i + 1) as f64 * h))
                    .sum()
            };
            let mass = composite(&|s| k.value(s));
            let first = composite(&|s| k.value(s) * (s - a));
            assert!((m.mass - mass).abs() <= 1e-13 * mass, "{a} {b}");
            assert!((m.first - first).abs() <= 1e-12 * first, "{a} {b}");
        }
    }

    #[test]
    fn power_law_cells_agree_across_branches() {
        let k = HistoryKernel::power_law(2.0, -0.4).unwrap();
        for &(a, b) in &[(0.1, 0.2), (0.1, 0.35), (0.01, 1.0)] {
            let m = k.cell_moments(a, b);
            let mass = tanh_sinh(|s| k.value(s), a, b, 1e-14);
            let first = tanh_sinh(|s| k.value(s) * (s - a), a, b, 1e-14);
            assert!((m.mass - mass).abs() < 1e-12);
            assert!((m.first - first).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(MemoryKernel::constant(-1.0).is_err());
        assert!(MemoryKernel::fractional(1.0, 1.0).is_err());
        assert!(MemoryKernel::fractional(0.0, 0.5).is_err());
        assert!(MemoryKernel::exponential(1.0, 0.0).is_err());
        assert!(MemoryKernel::tabulated(vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(MemoryKernel::tabulated(vec![0.1, 1.0], vec![1.0, -1.0]).is_err());
        assert!(HistoryKernel::power_law(1.0, -1.0).is_err());
    }

    #[test]
    fn structural_flags() {
        assert!(MemoryKernel::exponential(1.0, 1.0).unwrap().is_nonincreasing());
        assert!(!MemoryKernel::fractional(1.0, 0.5).unwrap().is_bounded());
        let t = MemoryKernel::tabulated(vec![0.1, 0.5], vec![1.0, 2.0]).unwrap();
        assert!(!t.is_nonincreasing());
        assert!(!t.has_closed_form_moments());
        assert_eq!(t.value_at_origin(), Some(1.0));
    }

    #[test]
    fn history_l1_norms() {
        let e = HistoryKernel::exponential(-2.0, 1.0).unwrap();
        assert!((e.l1_norm(1.0) - 2.0 * (1.0 - (-1f64).exp())).abs() < 1e-14);
        let p = HistoryKernel::power_law(1.0, -0.5).unwrap();
        assert!((p.l1_norm(4.0) - 4.0).abs() < 1e-13);
        let tab = HistoryKernel::tabulated(vec![0.0, 1.0, 2.0], vec![1.0, -1.0, -1.0]).unwrap();
        // triangle above and below the axis on [0,1], then -1 on [1,2]
        assert!((tab.l1_norm(2.0) - 1.5).abs() < 1e-14);
    }
}
