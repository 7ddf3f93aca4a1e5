//! Second-kind Volterra solves `y + λ (k * y) = r` for one eigenvalue.
//!
//! The scheme is the product-trapezoidal rule of [`crate::product`]. When
//! `λ` is large compared with the grid step, the plain rule overshoots
//! in the initial layer (the first value can come out negative, and the
//! local part alternates in sign once `λ h > 2`). For those eigenvalues the
//! first cells are subdivided so that every sub-step satisfies
//! `λ a(0) h <= 2 STIFF_BOUND`, over a layer of width `LAYER_WIDTH / λ`, and the first
//! sub-cell is further split geometrically toward the origin until the weight
//! carried by the initial value is below the same bound. For kernels that are
//! singular at the origin the first cell is always split this way, down to
//! `HEAD_FRACTION` of its width, since the solution has a `√t` term there.
//! Past the layer the base grid and its shared weights are used unchanged, so
//! only `O(N K)` extra moments are computed per eigenvalue (`K` fine nodes).

use crate::grid::TimeGrid;
use crate::kernels::Kernel;
use crate::product::ProductWeights;

/// Bound on `λ · w` for the weights touching a fine step.
pub const STIFF_BOUND: f64 = 0.25;
/// Width of the refined layer in units of `1/λ`; `e^{-36}` is below
/// double-precision resolution of the initial value.
pub const LAYER_WIDTH: f64 = 36.0;
const MAX_HEAD_LEVELS: usize = 400;
const HEAD_FRACTION: f64 = 1.0 / 256.0;

/// Right-hand side `r(t) = c + p(t) + ∫_0^t q`, with `p`, `q` given at the
/// base nodes and linear in between.
#[derive(Clone, Copy, Debug, Default)]
pub struct Rhs<'a> {
    pub constant: f64,
    pub nodal: Option<&'a [f64]>,
    pub integrated: Option<&'a [f64]>,
}

impl<'a> Rhs<'a> {
    pub fn constant(c: f64) -> Self {
        Self {
            constant: c,
            ..Self::default()
        }
    }

    pub fn nodal(values: &'a [f64]) -> Self {
        Self {
            nodal: Some(values),
            ..Self::default()
        }
    }

    pub fn integrated(c: f64, integrand: &'a [f64]) -> Self {
        Self {
            constant: c,
            integrated: Some(integrand),
            ..Self::default()
        }
    }
}

struct RhsEval<'a> {
    rhs: Rhs<'a>,
    nodes: &'a [f64],
    cumulative: Option<Vec<f64>>,
}

impl<'a> RhsEval<'a> {
    fn new(rhs: Rhs<'a>, grid: &'a TimeGrid) -> Self {
        let cumulative = rhs.integrated.map(|q| grid.cumulative_trapezoid(q));
        Self {
            rhs,
            nodes: grid.nodes(),
            cumulative,
        }
    }

    fn at_node(&self, j: usize) -> f64 {
        let mut r = self.rhs.constant;
        if let Some(p) = self.rhs.nodal {
            r += p[j];
        }
        if let Some(c) = &self.cumulative {
            r += c[j];
        }
        r
    }

    /// Value at `t` inside base cell `[t_j, t_{j+1}]`.
    fn in_cell(&self, j: usize, t: f64) -> f64 {
        let h = self.nodes[j + 1] - self.nodes[j];
        let s = t - self.nodes[j];
        let mut r = self.rhs.constant;
        if let Some(p) = self.rhs.nodal {
            r += p[j] + (p[j + 1] - p[j]) * s / h;
        }
        if let (Some(q), Some(c)) = (self.rhs.integrated, &self.cumulative) {
            r += c[j] + q[j] * s + 0.5 * (q[j + 1] - q[j]) * s * s / h;
        }
        r
    }
}

#[derive(Clone, Debug)]
struct Layer {
    /// Fine nodes on `[0, t_end]`, `t_end` a base node.
    nodes: Vec<f64>,
    /// Base cell containing each fine node (the cell to its left for base nodes).
    cell: Vec<usize>,
    /// Base index of the last fine node.
    end: usize,
    /// `rows[p][q]`, `q <= p`, weights among fine nodes.
    rows: Vec<Vec<f64>>,
    /// For base rows `i > end`: weights on all fine nodes.
    tail: Vec<Vec<f64>>,
}

/// Solver for one eigenvalue on a fixed base grid.
#[derive(Clone, Debug)]
pub struct ModeStepper {
    lambda: f64,
    layer: Option<Layer>,
}

fn cell_split<K: Kernel + ?Sized>(kernel: &K, a: f64, b: f64, h: f64) -> (f64, f64) {
    // (weight of left node, weight of right node) for a cell of width h whose
    // kernel argument runs over [a, b]
    let m = kernel.cell_moments(a.max(0.0), b);
    (m.first / h, m.mass - m.first / h)
}

impl ModeStepper {
    pub fn new<K: Kernel + ?Sized>(kernel: &K, grid: &TimeGrid, lambda: f64) -> Self {
        let t = grid.nodes();
        let n = grid.len();
        let bound = STIFF_BOUND / lambda;
        let scale = kernel.local_scale(grid.horizon());
        let reach = LAYER_WIDTH / (lambda * scale);
        let h_max = 2.0 * bound / scale;

        let mut counts = Vec::new();
        for j in 0..n - 1 {
            if t[j] >= reach {
                break;
            }
            counts.push(((t[j + 1] - t[j]) / h_max).ceil().max(1.0) as usize);
        }
        let mut end = counts.iter().rposition(|&c| c > 1).map_or(0, |j| j + 1);
        let first_sub = (t[1] - t[0]) / counts.first().copied().unwrap_or(1) as f64;
        let far = |s: f64| kernel.cell_moments(0.0, s).first / s;
        let head_min = if kernel.is_singular() {
            first_sub * HEAD_FRACTION
        } else {
            0.0
        };
        let needs_head = far(first_sub) > bound || head_min > 0.0;
        if needs_head {
            end = end.max(1);
        }
        if end == 0 {
            return Self {
                lambda,
                layer: None,
            };
        }

        let mut nodes = vec![0.0];
        let mut cell = vec![0];
        if needs_head {
            let mut s = first_sub;
            let mut head = Vec::new();
            while (far(s) > bound || s > head_min) && head.len() < MAX_HEAD_LEVELS && s > f64::MIN_POSITIVE * 1e10 {
                s *= 0.5;
                head.push(s);
            }
            for &x in head.iter().rev() {
                nodes.push(x);
                cell.push(0);
            }
        }
        for j in 0..end {
            let c = counts.get(j).copied().unwrap_or(1);
            let h = (t[j + 1] - t[j]) / c as f64;
            for k in 1..c {
                nodes.push(t[j] + k as f64 * h);
                cell.push(j);
            }
            nodes.push(t[j + 1]);
            cell.push(j);
        }

        let fine = nodes.len();
        let mut rows = Vec::with_capacity(fine);
        rows.push(vec![0.0]);
        for p in 1..fine {
            let mut row = vec![0.0; p + 1];
            for q in 0..p {
                let h = nodes[q + 1] - nodes[q];
                let (l, r) = cell_split(kernel, nodes[p] - nodes[q + 1], nodes[p] - nodes[q], h);
                row[q] += l;
                row[q + 1] += r;
            }
            rows.push(row);
        }
        let mut tail = Vec::with_capacity(n - end - 1);
        for i in end + 1..n {
            let mut row = vec![0.0; fine];
            for q in 0..fine - 1 {
                let h = nodes[q + 1] - nodes[q];
                let (l, r) = cell_split(kernel, t[i] - nodes[q + 1], t[i] - nodes[q], h);
                row[q] += l;
                row[q + 1] += r;
            }
            // left-node share of the first unrefined cell
            let h = t[end + 1] - t[end];
            row[fine - 1] += cell_split(kernel, t[i] - t[end + 1], t[i] - t[end], h).0;
            tail.push(row);
        }
        Self {
            lambda,
            layer: Some(Layer {
                nodes,
                cell,
                end,
                rows,
                tail,
            }),
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Whether the initial cells were subdivided for this eigenvalue.
    pub fn is_refined(&self) -> bool {
        self.layer.is_some()
    }

    /// Number of fine nodes in the refined layer (0 when not refined).
    pub fn layer_nodes(&self) -> usize {
        self.layer.as_ref().map_or(0, |l| l.nodes.len())
    }

    /// Solves on the base grid described by `grid`/`base`; returns the values
    /// at base nodes and the trapezoid integral `∫_0^{t_i} y` over the grid the
    /// solver actually used.
    pub fn solve(
        &self,
        base: &ProductWeights,
        grid: &TimeGrid,
        rhs: Rhs<'_>,
    ) -> std::result::Result<(Vec<f64>, Vec<f64>), String> {
        let n = grid.len();
        let t = grid.nodes();
        let lambda = self.lambda;
        let r = RhsEval::new(rhs, grid);
        let step = |coef: f64, at: usize| -> std::result::Result<f64, String> {
            if coef > 0.0 {
                Ok(coef)
            } else {
                Err(format!("step coefficient {coef} at node {at} is not positive"))
            }
        };
        let mut y = vec![0.0; n];
        let mut cum = vec![0.0; n];
        y[0] = r.at_node(0);
        let start = match &self.layer {
            None => 1,
            Some(layer) => {
                let fine = layer.nodes.len();
                let mut yf = Vec::with_capacity(fine);
                yf.push(y[0]);
                let mut area = 0.0;
                let mut base_j = 0;
                for p in 1..fine {
                    let row = &layer.rows[p];
                    let hist: f64 = row[..p].iter().zip(&yf).map(|(w, v)| w * v).sum();
                    let tp = layer.nodes[p];
                    let at_base = tp == t[base_j + 1];
                    let rp = if at_base {
                        r.at_node(base_j + 1)
                    } else {
                        r.in_cell(layer.cell[p], tp)
                    };
                    let coef = step(1.0 + lambda * row[p], p)?;
                    let v = (rp - lambda * hist) / coef;
                    area += 0.5 * (tp - layer.nodes[p - 1]) * (v + yf[p - 1]);
                    yf.push(v);
                    if at_base {
                        base_j += 1;
                        y[base_j] = v;
                        cum[base_j] = area;
                    }
                }
                debug_assert_eq!(base_j, layer.end);
                for i in layer.end + 1..n {
                    let tail = &layer.tail[i - layer.end - 1];
                    let hist: f64 = tail.iter().zip(&yf).map(|(w, v)| w * v).sum::<f64>()
                        + base.history_from(i, layer.end + 1, &y);
                    let coef = step(1.0 + lambda * base.diagonal(i), i)?;
                    y[i] = (r.at_node(i) - lambda * hist) / coef;
                    cum[i] = cum[i - 1] + 0.5 * (t[i] - t[i - 1]) * (y[i] + y[i - 1]);
                }
                n
            }
        };
        for i in start..n {
            let coef = step(1.0 + lambda * base.diagonal(i), i)?;
            y[i] = (r.at_node(i) - lambda * base.history(i, &y)) / coef;
            cum[i] = cum[i - 1] + 0.5 * (t[i] - t[i - 1]) * (y[i] + y[i - 1]);
        }
        Ok((y, cum))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{MemoryKernel, ShiftedKernel};

    fn solve(m: &MemoryKernel, grid: &TimeGrid, lambda: f64, rhs: Rhs<'_>) -> Vec<f64> {
        let k = ShiftedKernel(m);
        let w = ProductWeights::new(&k, grid);
        ModeStepper::new(&k, grid, lambda).solve(&w, grid, rhs).unwrap().0
    }

    #[test]
    fn mild_eigenvalues_are_not_refined() {
        let g = TimeGrid::uniform(1.0, 64).unwrap();
        let m = MemoryKernel::Zero;
        assert!(!ModeStepper::new(&ShiftedKernel(&m), &g, 10.0).is_refined());
        assert!(ModeStepper::new(&ShiftedKernel(&m), &g, 1e4).is_refined());
    }

    #[test]
    fn stiff_zero_kernel_stays_positive_and_accurate() {
        let g = TimeGrid::uniform(1.0, 128).unwrap();
        let lambda = 5000.0;
        let y = solve(&MemoryKernel::Zero, &g, lambda, Rhs::constant(1.0));
        for (i, &v) in y.iter().enumerate() {
            let exact = (-lambda * g.t(i)).exp();
            assert!(v > -1e-13 && (v - exact).abs() < 1e-3, "{i} {v} {exact}");
        }
    }

    #[test]
    fn stiff_fractional_first_step_is_resolved() {
        let g = TimeGrid::uniform(1.0, 256).unwrap();
        let m = MemoryKernel::fractional(1.0, 0.9).unwrap();
        let y = solve(&m, &g, 1e4, Rhs::constant(1.0));
        assert!(y.iter().all(|&v| v > 0.0));
        assert!(y.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn forced_solve_matches_closed_form() {
        // y' = -λ y + 1, y(0) = 0  <=>  y + λ (1 * y) = t
        let g = TimeGrid::uniform(1.0, 200).unwrap();
        let ones = vec![1.0; g.len()];
        for lambda in [3.0, 3000.0] {
            let y = solve(&MemoryKernel::Zero, &g, lambda, Rhs::integrated(0.0, &ones));
            for (i, &v) in y.iter().enumerate() {
                let exact = (1.0 - (-lambda * g.t(i)).exp()) / lambda;
                let tol = if lambda < 10.0 { 1e-5 } else { 0.02 / lambda };
                assert!((v - exact).abs() < tol, "{lambda} {i} {v} {exact}");
            }
        }
    }

    #[test]
    fn nodal_and_integrated_parts_add() {
        let g = TimeGrid::graded(1.0, 40, 2.0).unwrap();
        let m = MemoryKernel::exponential(1.0, 2.0).unwrap();
        let p: Vec<f64> = g.nodes().iter().map(|t| t.sin()).collect();
        let q: Vec<f64> = g.nodes().iter().map(|t| 1.0 + t).collect();
        for lambda in [2.0, 900.0] {
            let a = solve(&m, &g, lambda, Rhs { constant: 0.5, nodal: Some(&p), integrated: Some(&q) });
            let b = solve(&m, &g, lambda, Rhs::constant(0.5));
            let c = solve(&m, &g, lambda, Rhs::nodal(&p));
            let d = solve(&m, &g, lambda, Rhs::integrated(0.0, &q));
            for i in 0..g.len() {
                assert!((a[i] - b[i] - c[i] - d[i]).abs() < 1e-12);
            }
        }
    }
}
