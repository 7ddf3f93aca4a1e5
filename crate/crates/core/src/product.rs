//! Product-trapezoidal quadrature for causal convolutions.
//!
//! For a kernel `k` and nodal values `v_j` on a [`TimeGrid`], the convolution
//! `(k * v)(t_i) = ∫_0^{t_i} k(t_i - s) v(s) ds` is approximated by integrating
//! `k` exactly against the piecewise-linear interpolant of `v`. Only cell
//! moments of the kernel are needed, so kernels with an integrable singularity
//! at the origin are never evaluated there.

use crate::grid::TimeGrid;
use crate::kernels::Kernel;

/// Weights `w_{ij}` of the product-trapezoidal rule on a fixed grid.
#[derive(Clone, Debug)]
pub struct ProductWeights {
    layout: Layout,
}

#[derive(Clone, Debug)]
enum Layout {
    /// Uniform grids: weights depend only on the lag `i - j`.
    /// `first[i]` is the weight of node 0 in row `i`, `lag[d]` the weight of
    /// node `i - d` for `1 <= i - d`.
    Uniform { first: Vec<f64>, lag: Vec<f64> },
    /// Row-wise lower-triangular storage, `rows[i][j]` for `j <= i`.
    General { rows: Vec<Vec<f64>> },
}

impl ProductWeights {
    pub fn new<K: Kernel + ?Sized>(kernel: &K, grid: &TimeGrid) -> Self {
        let n = grid.len();
        if let Some(h) = grid.uniform_step() {
            // Lag cell c covers σ ∈ [c h, (c+1) h].
            let mut near = vec![0.0; n]; // weight toward σ = c h
            let mut far = vec![0.0; n]; // weight toward σ = (c+1) h
            for c in 0..n - 1 {
                let a = c as f64 * h;
                let m = kernel.cell_moments(a, a + h);
                far[c] = m.first / h;
                near[c] = m.mass - m.first / h;
            }
            let mut first = vec![0.0; n];
            let mut lag = vec![0.0; n];
            lag[0] = near[0];
            for d in 1..n {
                first[d] = far[d - 1];
                lag[d] = far[d - 1] + near[d];
            }
            Self {
                layout: Layout::Uniform { first, lag },
            }
        } else {
            let t = grid.nodes();
            let mut rows = Vec::with_capacity(n);
            rows.push(vec![0.0]);
            for i in 1..n {
                let mut row = vec![0.0; i + 1];
                for j in 0..i {
                    // cell [t_j, t_{j+1}] maps to σ ∈ [t_i - t_{j+1}, t_i - t_j]
                    let a = t[i] - t[j + 1];
                    let b = t[i] - t[j];
                    let h = t[j + 1] - t[j];
                    let m = kernel.cell_moments(a.max(0.0), b);
                    row[j] += m.first / h;
                    row[j + 1] += m.mass - m.first / h;
                }
                rows.push(row);
            }
            Self {
                layout: Layout::General { rows },
            }
        }
    }

    /// Weight multiplying the unknown at the current node `i`.
    pub fn diagonal(&self, i: usize) -> f64 {
        if i == 0 {
            return 0.0;
        }
        match &self.layout {
            Layout::Uniform { lag, .. } => lag[0],
            Layout::General { rows } => rows[i][i],
        }
    }

    /// Weight `w_{ij}`.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        if i == 0 || j > i {
            return 0.0;
        }
        match &self.layout {
            Layout::Uniform { first, lag } => {
                if j == 0 {
                    first[i]
                } else {
                    lag[i - j]
                }
            }
            Layout::General { rows } => rows[i][j],
        }
    }

    /// `Σ_{j<i} w_{ij} v_j`: the part of the convolution at `t_i` that uses
    /// already-known values.
    pub fn history(&self, i: usize, v: &[f64]) -> f64 {
        if i == 0 {
            return 0.0;
        }
        match &self.layout {
            Layout::Uniform { first, lag } => {
                let mut s = first[i] * v[0];
                // lag[i - j] for j = 1..i, walk lags backwards alongside v
                let lags = &lag[1..i];
                let vals = &v[1..i];
                for (w, x) in lags.iter().rev().zip(vals.iter()) {
                    s += w * x;
                }
                s
            }
            Layout::General { rows } => rows[i][..i].iter().zip(v).map(|(w, x)| w * x).sum(),
        }
    }

    /// `Σ_{lo<=j<i} w_{ij} v_j`.
    pub fn history_from(&self, i: usize, lo: usize, v: &[f64]) -> f64 {
        if i == 0 || lo >= i {
            return 0.0;
        }
        if lo == 0 {
            return self.history(i, v);
        }
        match &self.layout {
            Layout::Uniform { lag, .. } => lag[1..=i - lo]
                .iter()
                .rev()
                .zip(&v[lo..i])
                .map(|(w, x)| w * x)
                .sum(),
            Layout::General { rows } => rows[i][lo..i].iter().zip(&v[lo..i]).map(|(w, x)| w * x).sum(),
        }
    }

    /// Full convolution `Σ_{j<=i} w_{ij} v_j`.
    pub fn apply(&self, i: usize, v: &[f64]) -> f64 {
        self.history(i, v) + self.diagonal(i) * v[i]
    }

    /// Convolution at every node.
    pub fn convolve(&self, v: &[f64]) -> Vec<f64> {
        (0..v.len()).map(|i| self.apply(i, v)).collect()
    }

    /// Row sums; equal to `∫_0^{t_i} k` for exact moments.
    pub fn row_sum(&self, i: usize) -> f64 {
        (0..=i).map(|j| self.weight(i, j)).sum()
    }

    /// Smallest weight over the whole lower triangle.
    pub fn min_weight(&self) -> f64 {
        match &self.layout {
            Layout::Uniform { first, lag } => first[1..]
                .iter()
                .chain(lag.iter())
                .fold(f64::INFINITY, |m, &w| m.min(w)),
            Layout::General { rows } => rows[1..]
                .iter()
                .flatten()
                .fold(f64::INFINITY, |m, &w| m.min(w)),
        }
    }
}

/// Solves `y_i + λ Σ_{j<=i} w_{ij} y_j = rhs_i` node by node.
///
/// This is the implicit product-trapezoidal discretization of the second-kind
/// equation `y + λ (k * y) = rhs`; `y_0 = rhs_0` because the integral vanishes
/// at the origin. Fails when the step coefficient `1 + λ w_ii` is not positive.
pub fn solve_second_kind(
    weights: &ProductWeights,
    lambda: f64,
    rhs: &[f64],
) -> std::result::Result<Vec<f64>, String> {
    let mut y = Vec::with_capacity(rhs.len());
    y.push(rhs[0]);
    for (i, &r) in rhs.iter().enumerate().skip(1) {
        let coef = 1.0 + lambda * weights.diagonal(i);
        if !(coef > 0.0) {
            return Err(format!("step coefficient {coef} at node {i} is not positive"));
        }
        let hist = weights.history(i, &y);
        y.push((r - lambda * hist) / coef);
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{HistoryKernel, MemoryKernel};

    #[test]
    fn uniform_and_general_layouts_agree() {
        let k = MemoryKernel::fractional(1.0, 0.3).unwrap();
        let uni = TimeGrid::uniform(1.0, 16).unwrap();
        let custom = TimeGrid::from_nodes(uni.nodes().to_vec()).unwrap();
        let a = ProductWeights::new(&k, &uni);
        let b = ProductWeights::new(&k, &custom);
        for i in 0..uni.len() {
            for j in 0..=i {
                let (x, y) = (a.weight(i, j), b.weight(i, j));
                assert!((x - y).abs() < 1e-12 * (1.0 + x.abs()), "{i} {j} {x} {y}");
            }
        }
    }

    #[test]
    fn row_sums_reproduce_cumulative_integral() {
        let k = MemoryKernel::exponential(2.0, 3.0).unwrap();
        let g = TimeGrid::graded(1.5, 20, 2.0).unwrap();
        let w = ProductWeights::new(&k, &g);
        for i in 0..g.len() {
            let exact = k.cumulative(g.t(i)).unwrap();
            assert!((w.row_sum(i) - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn integrates_linear_functions_exactly() {
        // ∫_0^t (t - s)^{-1/2} s ds = (4/3) t^{3/2}
        let k = HistoryKernel::power_law(1.0, -0.5).unwrap();
        let g = TimeGrid::uniform(1.0, 10).unwrap();
        let w = ProductWeights::new(&k, &g);
        let v: Vec<f64> = g.nodes().to_vec();
        for i in 0..g.len() {
            let t = g.t(i);
            let exact = 4.0 / 3.0 * t.powf(1.5);
            assert!((w.apply(i, &v) - exact).abs() < 1e-12);
        }
    }
}
