use crate::error::{Error, Result};
use crate::kernels::CellMoments;

/// Piecewise-linear function through samples `(t_k, v_k)`, held constant
/// before the first and after the last sample.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseLinear {
    t: Vec<f64>,
    v: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(t: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if t.is_empty() || t.len() != v.len() {
            return Err(Error::Domain(format!(
                "table needs matching, nonempty columns ({} vs {})",
                t.len(),
                v.len()
            )));
        }
        if !(t[0] >= 0.0) {
            return Err(Error::Domain("table abscissae must be >= 0".into()));
        }
        if t.windows(2).any(|w| !(w[1] > w[0])) || t.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("table abscissae must be strictly increasing".into()));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("table values must be finite".into()));
        }
        Ok(Self { t, v })
    }

    pub fn abscissae(&self) -> &[f64] {
        &self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.v
    }

    pub fn value(&self, x: f64) -> f64 {
        let n = self.t.len();
        if x <= self.t[0] {
            return self.v[0];
        }
        if x >= self.t[n - 1] {
            return self.v[n - 1];
        }
        let k = self.t.partition_point(|&s| s <= x) - 1;
        let s = (x - self.t[k]) / (self.t[k + 1] - self.t[k]);
        self.v[k] + s * (self.v[k + 1] - self.v[k])
    }

    pub fn slope(&self, x: f64) -> f64 {
        let n = self.t.len();
        if n < 2 || x <= self.t[0] || x >= self.t[n - 1] {
            return 0.0;
        }
        let k = self.t.partition_point(|&s| s <= x) - 1;
        (self.v[k + 1] - self.v[k]) / (self.t[k + 1] - self.t[k])
    }

    /// Linear pieces `(x0, x1)` covering `[a, b]`, split at sample points.
    fn pieces(&self, a: f64, b: f64) -> Vec<(f64, f64)> {
        let mut cuts = vec![a];
        cuts.extend(self.t.iter().copied().filter(|&s| s > a && s < b));
        cuts.push(b);
        cuts.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        self.pieces(a, b)
            .into_iter()
            .map(|(x0, x1)| 0.5 * (x1 - x0) * (self.value(x0) + self.value(x1)))
            .sum()
    }

    pub fn abs_integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let mut s = 0.0;
        for (x0, x1) in self.pieces(a, b) {
            let (y0, y1) = (self.value(x0), self.value(x1));
            let len = x1 - x0;
            if y0 * y1 >= 0.0 {
                s += 0.5 * len * (y0.abs() + y1.abs());
            } else {
                // split at the zero crossing
                let r = y0.abs() / (y0.abs() + y1.abs());
                s += 0.5 * len * (r * y0.abs() + (1.0 - r) * y1.abs());
            }
        }
        s
    }

    pub fn cell_moments(&self, a: f64, b: f64) -> CellMoments {
        if b <= a {
            return CellMoments::default();
        }
        let mut m = CellMoments::default();
        for (x0, x1) in self.pieces(a, b) {
            let (y0, y1) = (self.value(x0), self.value(x1));
            let len = x1 - x0;
            let (p, q) = (x0 - a, x1 - a);
            m.mass += 0.5 * len * (y0 + y1);
            // exact integral of the product of two linear functions
            m.first += len / 6.0 * (2.0 * p * y0 + p * y1 + q * y0 + 2.0 * q * y1);
        }
        m
    }
}

/// Reads two numeric columns; skips a non-numeric first line and blank lines.
pub(crate) fn parse_two_columns(text: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split(',').map(str::trim);
        let (a, b) = match (cols.next(), cols.next()) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::Parse(format!(
                    "line {}: expected two comma-separated columns",
                    lineno + 1
                )))
            }
        };
        match (a.parse::<f64>(), b.parse::<f64>()) {
            (Ok(x), Ok(y)) => {
                xs.push(x);
                ys.push(y);
            }
            _ if xs.is_empty() && lineno == 0 => continue,
            _ => {
                return Err(Error::Parse(format!(
                    "line {}: non-numeric entry `{line}`",
                    lineno + 1
                )))
            }
        }
    }
    Ok((xs, ys))
}
