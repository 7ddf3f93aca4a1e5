use crate::error::{Error, Result};

/// How the nodes of a [`TimeGrid`] were generated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GridKind {
    Uniform,
    /// `t_i = T (i/N)^r`, clustering nodes near the origin.
    Graded { exponent: f64 },
    /// Arbitrary strictly increasing nodes.
    Custom,
}

/// Discretization of `[0, T]`: strictly increasing nodes with `t_0 = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    nodes: Vec<f64>,
    kind: GridKind,
}

impl TimeGrid {
    /// `steps` equal cells on `[0, horizon]`.
    pub fn uniform(horizon: f64, steps: usize) -> Result<Self> {
        check_horizon(horizon, steps)?;
        let h = horizon / steps as f64;
        let mut nodes: Vec<f64> = (0..=steps).map(|i| i as f64 * h).collect();
        nodes[steps] = horizon;
        Ok(Self {
            nodes,
            kind: GridKind::Uniform,
        })
    }

    /// Graded nodes `t_i = T (i/N)^r` with `r >= 1`.
    pub fn graded(horizon: f64, steps: usize, exponent: f64) -> Result<Self> {
        check_horizon(horizon, steps)?;
        if !(exponent >= 1.0) || !exponent.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "grading exponent must be >= 1, got {exponent}"
            )));
        }
        if exponent == 1.0 {
            return Self::uniform(horizon, steps);
        }
        let n = steps as f64;
        let mut nodes: Vec<f64> = (0..=steps)
            .map(|i| horizon * (i as f64 / n).powf(exponent))
            .collect();
        nodes[steps] = horizon;
        Ok(Self {
            nodes,
            kind: GridKind::Graded { exponent },
        })
    }

    /// Wraps caller-provided nodes after validation.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        validate_nodes(&nodes)?;
        Ok(Self {
            nodes,
            kind: GridKind::Custom,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    /// Number of nodes (`steps + 1`).
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn t(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    /// The common step when the grid is uniform.
    pub fn uniform_step(&self) -> Option<f64> {
        match self.kind {
            GridKind::Uniform => Some(self.horizon() / self.steps() as f64),
            _ => None,
        }
    }

    /// Largest index `i` with `t_i <= t`, clamped to the last cell.
    pub fn locate(&self, t: f64) -> usize {
        if t <= 0.0 {
            return 0;
        }
        let last = self.steps();
        if t >= self.horizon() {
            return last.saturating_sub(1);
        }
        match self.nodes.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(last - 1),
            Err(i) => i - 1,
        }
    }

    /// Piecewise-linear interpolation of nodal `values` at time `t`.
    pub fn interpolate(&self, values: &[f64], t: f64) -> f64 {
        let i = self.locate(t);
        let (t0, t1) = (self.nodes[i], self.nodes[i + 1]);
        let s = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        values[i] * (1.0 - s) + values[i + 1] * s
    }

    /// Cumulative trapezoid integral of nodal values, one entry per node.
    pub fn cumulative_trapezoid(&self, values: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(values.len());
        let mut acc = 0.0;
        out.push(0.0);
        for i in 1..values.len() {
            acc += 0.5 * (self.nodes[i] - self.nodes[i - 1]) * (values[i] + values[i - 1]);
            out.push(acc);
        }
        out
    }
}

fn check_horizon(horizon: f64, steps: usize) -> Result<()> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidGrid(format!(
            "final time must be positive, got {horizon}"
        )));
    }
    if steps == 0 {
        return Err(Error::InvalidGrid("at least one time step is required".into()));
    }
    Ok(())
}

pub(crate) fn validate_nodes(nodes: &[f64]) -> Result<()> {
    if nodes.len() < 2 {
        return Err(Error::InvalidGrid("need at least two nodes".into()));
    }
    if nodes[0] != 0.0 {
        return Err(Error::InvalidGrid(format!(
            "first node must be 0, got {}",
            nodes[0]
        )));
    }
    for (i, w) in nodes.windows(2).enumerate() {
        if !(w[1] > w[0]) || !w[1].is_finite() {
            return Err(Error::InvalidGrid(format!(
                "nodes must be strictly increasing (nodes {} and {})",
                i,
                i + 1
            )));
        }
    }
    Ok(())
}
