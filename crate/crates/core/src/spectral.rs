//! Dirichlet sine eigenbases on an interval or a rectangle, coefficient
//! fields and the Hilbert scale norms built on them.
//!
//! Fields are stored as coefficients against the orthonormal eigenfunctions.
//! Point values live on an equispaced interior collocation grid with `2N + 1`
//! nodes per axis, where the discrete sine transform is exactly orthogonal.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Domain {
    Interval { length: f64 },
    Rectangle { lx: f64, ly: f64 },
}

impl Domain {
    pub fn interval(length: f64) -> Result<Self> {
        check_length("L", length)?;
        Ok(Self::Interval { length })
    }

    pub fn rectangle(lx: f64, ly: f64) -> Result<Self> {
        check_length("Lx", lx)?;
        check_length("Ly", ly)?;
        Ok(Self::Rectangle { lx, ly })
    }

    pub fn dimension(&self) -> usize {
        match self {
            Self::Interval { .. } => 1,
            Self::Rectangle { .. } => 2,
        }
    }

    /// Lengths per axis.
    pub fn lengths(&self) -> Vec<f64> {
        match *self {
            Self::Interval { length } => vec![length],
            Self::Rectangle { lx, ly } => vec![lx, ly],
        }
    }
}

fn check_length(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::Domain(format!("side length {name} must be positive, got {v}")));
    }
    Ok(())
}

/// One eigenpair: axis indices (second index 0 on an interval) and `λ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mode {
    pub index: (usize, usize),
    pub lambda: f64,
}

/// Sampled sine functions along one axis: `values[n-1][k] = √(2/L) sin(nπx_k/L)`.
#[derive(Clone, Debug)]
struct AxisTable {
    length: f64,
    nodes: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl AxisTable {
    fn new(length: f64, max_index: usize, points: usize) -> Self {
        let p = points + 1;
        let nodes: Vec<f64> = (1..p).map(|k| k as f64 * length / p as f64).collect();
        let norm = (2.0 / length).sqrt();
        let values = (1..=max_index)
            .map(|n| {
                (1..p)
                    .map(|k| norm * (PI * (n * k) as f64 / p as f64).sin())
                    .collect()
            })
            .collect();
        Self {
            length,
            nodes,
            values,
        }
    }

    /// Quadrature weight of every node (`L / P`).
    fn weight(&self) -> f64 {
        self.length / (self.nodes.len() + 1) as f64
    }
}

/// Dirichlet eigenpairs of `-Δ`, sorted by eigenvalue.
#[derive(Clone)]
pub struct SpectralBasis {
    domain: Domain,
    modes: Vec<Mode>,
    lambdas: Vec<f64>,
    axes: Vec<AxisTable>,
}

impl fmt::Debug for SpectralBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralBasis")
            .field("domain", &self.domain)
            .field("modes", &self.modes.len())
            .finish()
    }
}

impl PartialEq for SpectralBasis {
    fn eq(&self, other: &Self) -> bool {
        self.domain == other.domain && self.modes == other.modes
    }
}

/// Builds the first `n` eigenpairs. Ties on a rectangle are ordered by the
/// first axis index.
pub fn build_basis(domain: Domain, n: usize) -> Result<Arc<SpectralBasis>> {
    if n == 0 {
        return Err(Error::Domain("the basis needs at least one mode".into()));
    }
    match domain {
        Domain::Interval { length } => check_length("L", length)?,
        Domain::Rectangle { lx, ly } => {
            check_length("Lx", lx)?;
            check_length("Ly", ly)?;
        }
    }
    let points = 2 * n + 1;
    let (modes, axes) = match domain {
        Domain::Interval { length } => {
            let modes = (1..=n)
                .map(|j| Mode {
                    index: (j, 0),
                    lambda: (j as f64 * PI / length).powi(2),
                })
                .collect();
            (modes, vec![AxisTable::new(length, n, points)])
        }
        Domain::Rectangle { lx, ly } => {
            let mut all = Vec::with_capacity(n * n);
            for j in 1..=n {
                for k in 1..=n {
                    all.push(Mode {
                        index: (j, k),
                        lambda: (j as f64 * PI / lx).powi(2) + (k as f64 * PI / ly).powi(2),
                    });
                }
            }
            all.sort_by(|a, b| a.lambda.total_cmp(&b.lambda).then(a.index.cmp(&b.index)));
            all.truncate(n);
            let jmax = all.iter().map(|m| m.index.0).max().unwrap_or(1);
            let kmax = all.iter().map(|m| m.index.1).max().unwrap_or(1);
            (
                all,
                vec![AxisTable::new(lx, jmax, points), AxisTable::new(ly, kmax, points)],
            )
        }
    };
    let lambdas = modes.iter().map(|m: &Mode| m.lambda).collect();
    Ok(Arc::new(SpectralBasis {
        domain,
        modes,
        lambdas,
        axes,
    }))
}

impl SpectralBasis {
    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn lambda1(&self) -> f64 {
        self.lambdas[0]
    }

    /// Number of collocation nodes (product over axes).
    pub fn node_count(&self) -> usize {
        self.axes.iter().map(|a| a.nodes.len()).product()
    }

    /// Collocation nodes; on a rectangle the first coordinate varies slowest.
    pub fn nodes(&self) -> Vec<Vec<f64>> {
        match self.axes.as_slice() {
            [x] => x.nodes.iter().map(|&v| vec![v]).collect(),
            [x, y] => x
                .nodes
                .iter()
                .flat_map(|&a| y.nodes.iter().map(move |&b| vec![a, b]))
                .collect(),
            _ => unreachable!(),
        }
    }

    /// Quadrature weight shared by all collocation nodes.
    pub fn node_weight(&self) -> f64 {
        self.axes.iter().map(AxisTable::weight).product()
    }

    /// Value of eigenfunction `n` (0-based) at a point.
    pub fn eigenfunction(&self, n: usize, point: &[f64]) -> f64 {
        let (j, k) = self.modes[n].index;
        let lengths = self.domain.lengths();
        let s = |idx: usize, x: f64, l: f64| (2.0 / l).sqrt() * (idx as f64 * PI * x / l).sin();
        match lengths.as_slice() {
            [l] => s(j, point[0], *l),
            [lx, ly] => s(j, point[0], *lx) * s(k, point[1], *ly),
            _ => unreachable!(),
        }
    }

    /// Dense per-axis coefficient layout: `(axis-0 index, axis-1 index)`, both 1-based.
    fn dense_shape(&self) -> (usize, usize) {
        match self.axes.as_slice() {
            [x] => (x.values.len(), 1),
            [x, y] => (x.values.len(), y.values.len()),
            _ => unreachable!(),
        }
    }

    /// Point values of `coeffs` at the collocation nodes.
    pub fn synthesize_nodes(&self, coeffs: &[f64]) -> Vec<f64> {
        match self.axes.as_slice() {
            [x] => {
                let mut out = vec![0.0; x.nodes.len()];
                for (c, row) in coeffs.iter().zip(&x.values) {
                    if *c != 0.0 {
                        out.iter_mut().zip(row).for_each(|(o, v)| *o += c * v);
                    }
                }
                out
            }
            [x, y] => {
                let (jmax, _) = self.dense_shape();
                let py = y.nodes.len();
                // first contract over k: partial[j][q] = Σ_k c_jk e_k(y_q)
                let mut partial = vec![vec![0.0; py]; jmax];
                for (m, &c) in self.modes.iter().zip(coeffs) {
                    if c != 0.0 {
                        let (j, k) = m.index;
                        partial[j - 1]
                            .iter_mut()
                            .zip(&y.values[k - 1])
                            .for_each(|(o, v)| *o += c * v);
                    }
                }
                let mut out = vec![0.0; x.nodes.len() * py];
                for (j, row) in partial.iter().enumerate() {
                    if row.iter().all(|&v| v == 0.0) {
                        continue;
                    }
                    for (p, &ex) in x.values[j].iter().enumerate() {
                        let dst = &mut out[p * py..(p + 1) * py];
                        dst.iter_mut().zip(row).for_each(|(o, v)| *o += ex * v);
                    }
                }
                out
            }
            _ => unreachable!(),
        }
    }

    /// Coefficients of collocation samples (discrete sine transform).
    pub fn project_nodes(&self, samples: &[f64]) -> Result<Vec<f64>> {
        if samples.len() != self.node_count() {
            return Err(Error::NodeCountMismatch {
                expected: self.node_count(),
                got: samples.len(),
            });
        }
        let w = self.node_weight();
        Ok(match self.axes.as_slice() {
            [x] => x
                .values
                .iter()
                .map(|row| w * row.iter().zip(samples).map(|(a, b)| a * b).sum::<f64>())
                .collect(),
            [x, y] => {
                let (jmax, _) = self.dense_shape();
                let py = y.nodes.len();
                // partial[j][q] = Σ_p e_j(x_p) f(x_p, y_q)
                let mut partial = vec![vec![0.0; py]; jmax];
                for (j, part) in partial.iter_mut().enumerate() {
                    for (p, &ex) in x.values[j].iter().enumerate() {
                        let src = &samples[p * py..(p + 1) * py];
                        part.iter_mut().zip(src).for_each(|(o, v)| *o += ex * v);
                    }
                }
                self.modes
                    .iter()
                    .map(|m| {
                        let (j, k) = m.index;
                        w * partial[j - 1]
                            .iter()
                            .zip(&y.values[k - 1])
                            .map(|(a, b)| a * b)
                            .sum::<f64>()
                    })
                    .collect()
            }
            _ => unreachable!(),
        })
    }

    /// Exact `∂/∂x_axis` of the span followed by L² projection back onto it:
    /// `(∂ e_j, e_k)` for sine pairs is `2jk(1 - (-1)^{j+k}) / ((k² - j²) L)`.
    pub fn derivative_coefficients(&self, coeffs: &[f64], axis: usize) -> Vec<f64> {
        let lengths = self.domain.lengths();
        let l = lengths[axis];
        let pick = |m: &Mode| if axis == 0 { m.index.0 } else { m.index.1 };
        let other = |m: &Mode| if axis == 0 { m.index.1 } else { m.index.0 };
        let mut out = vec![0.0; self.len()];
        for (ko, mo) in self.modes.iter().enumerate() {
            let k = pick(mo);
            let mut s = 0.0;
            for (mi, &c) in self.modes.iter().zip(coeffs) {
                if c == 0.0 || other(mi) != other(mo) {
                    continue;
                }
                let j = pick(mi);
                if (j + k) % 2 == 1 {
                    let (jf, kf) = (j as f64, k as f64);
                    s += c * 4.0 * jf * kf / ((kf * kf - jf * jf) * l);
                }
            }
            out[ko] = s;
        }
        out
    }
}

/// A field as coefficients against an eigenbasis.
#[derive(Clone, Debug)]
pub struct SpectralField {
    basis: Arc<SpectralBasis>,
    coeffs: Vec<f64>,
}

impl PartialEq for SpectralField {
    fn eq(&self, other: &Self) -> bool {
        same_basis(&self.basis, &other.basis) && self.coeffs == other.coeffs
    }
}

fn same_basis(a: &Arc<SpectralBasis>, b: &Arc<SpectralBasis>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

impl SpectralField {
    pub fn new(basis: Arc<SpectralBasis>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(Error::BasisMismatch(format!(
                "{} coefficients for a basis of {} modes",
                coeffs.len(),
                basis.len()
            )));
        }
        Ok(Self { basis, coeffs })
    }

    pub fn zeros(basis: Arc<SpectralBasis>) -> Self {
        let n = basis.len();
        Self {
            basis,
            coeffs: vec![0.0; n],
        }
    }

    /// The `n`-th eigenfunction (0-based).
    pub fn mode(basis: Arc<SpectralBasis>, n: usize) -> Result<Self> {
        let mut f = Self::zeros(basis);
        if n >= f.coeffs.len() {
            return Err(Error::BasisMismatch(format!("mode {n} outside the basis")));
        }
        f.coeffs[n] = 1.0;
        Ok(f)
    }

    pub fn basis(&self) -> &Arc<SpectralBasis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn check_same_basis(&self, other: &SpectralField) -> Result<()> {
        if same_basis(&self.basis, &other.basis) {
            Ok(())
        } else {
            Err(Error::BasisMismatch("fields live on different bases".into()))
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            basis: self.basis.clone(),
            coeffs: self.coeffs.iter().map(|c| a * c).collect(),
        }
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &SpectralField) -> Result<Self> {
        self.check_same_basis(other)?;
        Ok(Self {
            basis: self.basis.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(x, y)| x + a * y)
                .collect(),
        })
    }

    /// `(u, v)` in L².
    pub fn dot(&self, other: &SpectralField) -> Result<f64> {
        self.check_same_basis(other)?;
        Ok(self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b).sum())
    }
}

/// `(Σ λ_n^ρ c_n²)^{1/2}`, for any real `ρ`.
pub fn hnorm(u: &SpectralField, rho: f64) -> f64 {
    hnorm_coeffs(u.basis.lambdas(), u.coeffs(), rho)
}

/// [`hnorm`] on a bare coefficient slice.
pub fn hnorm_coeffs(lambdas: &[f64], coeffs: &[f64], rho: f64) -> f64 {
    if rho == 0.0 {
        return coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
    }
    lambdas
        .iter()
        .zip(coeffs)
        .map(|(l, c)| l.powf(rho) * c * c)
        .sum::<f64>()
        .sqrt()
}

/// `(-Δ)^γ u`.
pub fn fractional_laplacian(u: &SpectralField, gamma: f64) -> SpectralField {
    if gamma == 0.0 {
        return u.clone();
    }
    SpectralField {
        basis: u.basis.clone(),
        coeffs: u
            .basis
            .lambdas()
            .iter()
            .zip(&u.coeffs)
            .map(|(l, c)| l.powf(gamma) * c)
            .collect(),
    }
}

/// Coefficients of samples taken at the basis collocation nodes.
pub fn project(samples: &[f64], basis: &Arc<SpectralBasis>) -> Result<SpectralField> {
    let coeffs = basis.project_nodes(samples)?;
    Ok(SpectralField {
        basis: basis.clone(),
        coeffs,
    })
}

/// Point values of `u` at arbitrary points (one coordinate per axis).
pub fn synthesize(u: &SpectralField, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    let dim = u.basis.domain().dimension();
    points
        .iter()
        .map(|p| {
            if p.len() != dim {
                return Err(Error::Domain(format!(
                    "point has {} coordinates, domain has {dim}",
                    p.len()
                )));
            }
            Ok(u
                .coeffs
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(n, c)| c * u.basis.eigenfunction(n, p))
                .sum())
        })
        .collect()
}

/// `(∇u, ∇κ) = Σ λ_n u_n κ_n`.
pub fn gradient_pairing(u: &SpectralField, kappa: &SpectralField) -> Result<f64> {
    u.check_same_basis(kappa)?;
    Ok(gradient_pairing_coeffs(u.basis.lambdas(), &u.coeffs, &kappa.coeffs))
}

pub fn gradient_pairing_coeffs(lambdas: &[f64], u: &[f64], kappa: &[f64]) -> f64 {
    lambdas
        .iter()
        .zip(u)
        .zip(kappa)
        .map(|((l, a), b)| l * a * b)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_interval(n: usize) -> Arc<SpectralBasis> {
        build_basis(Domain::interval(1.0).unwrap(), n).unwrap()
    }

    #[test]
    fn interval_eigenvalues() {
        let b = unit_interval(3);
        let pi2 = PI * PI;
        assert_eq!(b.lambdas(), &[pi2, 4.0 * pi2, 9.0 * pi2]);
        assert_eq!(b.node_count(), 7);
    }

    #[test]
    fn rectangle_sorting_and_ties() {
        let b = build_basis(Domain::rectangle(1.0, 1.0).unwrap(), 3).unwrap();
        let pi2 = PI * PI;
        assert!((b.lambdas()[0] - 2.0 * pi2).abs() < 1e-12);
        assert!((b.lambdas()[1] - 5.0 * pi2).abs() < 1e-12);
        assert_eq!(b.modes()[1].index, (1, 2));
        assert_eq!(b.modes()[2].index, (2, 1));
    }

    #[test]
    fn rejects_bad_domains() {
        assert!(Domain::interval(0.0).is_err());
        assert!(Domain::rectangle(1.0, -2.0).is_err());
        assert!(build_basis(Domain::Interval { length: 1.0 }, 0).is_err());
        assert!(build_basis(Domain::Interval { length: f64::NAN }, 2).is_err());
    }

    #[test]
    fn norms_of_first_mode() {
        let b = unit_interval(4);
        let e1 = SpectralField::mode(b, 0).unwrap();
        assert_eq!(hnorm(&e1, 0.0), 1.0);
        assert!((hnorm(&e1, 2.0) - PI * PI).abs() < 1e-12);
        assert!((hnorm(&e1, -2.0) - 1.0 / (PI * PI)).abs() < 1e-15);
        let l = fractional_laplacian(&e1, 1.0);
        assert!((l.coeffs()[0] - PI * PI).abs() < 1e-12);
        assert_eq!(fractional_laplacian(&e1, 0.0), e1);
    }

    #[test]
    fn synthesize_second_mode() {
        let b = unit_interval(4);
        let e2 = SpectralField::mode(b, 1).unwrap();
        let v = synthesize(&e2, &[vec![0.25]]).unwrap();
        assert!((v[0] - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn round_trip_on_both_domains() {
        for domain in [Domain::interval(2.0).unwrap(), Domain::rectangle(1.0, 0.7).unwrap()] {
            let b = build_basis(domain, 8).unwrap();
            let c: Vec<f64> = (0..8).map(|i| ((i * 7 + 3) % 5) as f64 - 2.0).collect();
            let samples = b.synthesize_nodes(&c);
            let back = b.project_nodes(&samples).unwrap();
            for (x, y) in c.iter().zip(&back) {
                assert!((x - y).abs() < 1e-12);
            }
            // nodal synthesis agrees with pointwise evaluation
            let u = SpectralField::new(b.clone(), c.clone()).unwrap();
            let pts = b.nodes();
            let direct = synthesize(&u, &pts).unwrap();
            for (x, y) in direct.iter().zip(&samples) {
                assert!((x - y).abs() < 1e-12);
            }
        }
        let b = unit_interval(3);
        assert!(matches!(b.project_nodes(&[0.0; 3]), Err(Error::NodeCountMismatch { .. })));
        assert!(project(&[0.0; 7], &b).unwrap().coeffs().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn pairings() {
        let b = unit_interval(3);
        let pi2 = PI * PI;
        let e1 = SpectralField::mode(b.clone(), 0).unwrap();
        let e2 = SpectralField::mode(b.clone(), 1).unwrap();
        assert!((gradient_pairing(&e1, &e1).unwrap() - pi2).abs() < 1e-12);
        assert_eq!(gradient_pairing(&e1, &e2).unwrap(), 0.0);
        let u = SpectralField::new(b, vec![2.0, 1.0, 0.0]).unwrap();
        assert!((gradient_pairing(&u, &e2).unwrap() - 4.0 * pi2).abs() < 1e-12);
        let other = unit_interval(4);
        assert!(gradient_pairing(&e1, &SpectralField::zeros(other)).is_err());
    }

    #[test]
    fn derivative_matches_closed_form_integral() {
        // (d/dx e_1, e_2) = 8/3 on (0, 1)
        let b = unit_interval(4);
        let d = b.derivative_coefficients(&[1.0, 0.0, 0.0, 0.0], 0);
        assert!(d[0].abs() < 1e-15);
        assert!((d[1] - 8.0 / 3.0).abs() < 1e-14);
        assert!(d[2].abs() < 1e-15);
    }
}
