//! Run configuration: a TOML file, `--set section.key=value` overrides and
//! validation that reports every problem at once.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use rstokes_core::kernels::{HistoryKernel, MemoryKernel};
use rstokes_core::mild::NonlinearitySpec;
use rstokes_core::spectral::{build_basis, hnorm, Domain, SpectralBasis, SpectralField};
use rstokes_core::TimeGrid;

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct RawConfig {
    pub seed: u64,
    pub domain: DomainSection,
    pub kernel: KernelSection,
    pub grid: GridSection,
    pub problem: ProblemSection,
    pub nonlinearity: NonlinearitySection,
    pub history_kernel: HistorySection,
    pub initial: InitialSection,
    pub verify: VerifySection,
    pub certify: CertifySection,
    pub inverse: Option<InverseSection>,
    pub output: OutputSection,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainSection {
    /// `interval` or `rectangle`
    pub kind: String,
    pub length: f64,
    pub lx: f64,
    pub ly: f64,
    pub modes: usize,
}

impl Default for DomainSection {
    fn default() -> Self {
        Self {
            kind: "interval".into(),
            length: 1.0,
            lx: 1.0,
            ly: 1.0,
            modes: 32,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    /// `zero`, `constant`, `fractional`, `exponential` or `tabulated`
    pub kind: String,
    pub m0: f64,
    pub alpha: f64,
    pub decay: f64,
    pub table_path: Option<String>,
}

impl Default for KernelSection {
    fn default() -> Self {
        Self {
            kind: "fractional".into(),
            m0: 1.0,
            alpha: 0.5,
            decay: 1.0,
            table_path: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub steps: usize,
    /// Exponent `r` of `t_i = T (i/N)^r`; 1 is uniform.
    pub grading: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            steps: 1024,
            grading: 1.0,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    pub mu: f64,
    /// Also used as `θ` of the nonlinearity.
    pub delta: f64,
    pub beta: f64,
    pub tol: f64,
    pub max_iterations: usize,
    /// Number of coefficients written per state row.
    pub output_modes: usize,
    pub gamma: f64,
    /// Smallest `t` of the Hölder estimate; 4 grid steps when absent.
    pub t_min: Option<f64>,
}

impl Default for ProblemSection {
    fn default() -> Self {
        Self {
            mu: 1.0,
            delta: 0.5,
            beta: 0.0,
            tol: 1e-10,
            max_iterations: 200,
            output_modes: 8,
            gamma: 0.4,
            t_min: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct NonlinearitySection {
    /// `zero`, `linear_diagonal`, `power`, `advection` or `power_advection`
    pub kind: String,
    pub p: f64,
    pub coefficient: f64,
    /// `|u|^p` instead of the sign-preserving `|u|^{p-1} u`.
    pub absolute: bool,
    pub chi: Vec<f64>,
    pub coeffs: Vec<f64>,
}

impl Default for NonlinearitySection {
    fn default() -> Self {
        Self {
            kind: "zero".into(),
            p: 3.0,
            coefficient: 1.0,
            absolute: false,
            chi: Vec::new(),
            coeffs: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct HistorySection {
    /// `zero`, `constant`, `exponential`, `power_law` or `tabulated`
    pub kind: String,
    pub value: f64,
    pub amplitude: f64,
    pub decay: f64,
    pub exponent: f64,
    pub table_path: Option<String>,
}

impl Default for HistorySection {
    fn default() -> Self {
        Self {
            kind: "zero".into(),
            value: 0.0,
            amplitude: 1.0,
            decay: 1.0,
            exponent: 0.0,
            table_path: None,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    /// `first_mode`, `two_modes` or `smooth`; ignored when `coeffs` is given.
    pub preset: Option<String>,
    pub coeffs: Option<Vec<f64>>,
    /// Rescale to this `H^mu` norm.
    pub norm: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub trials: usize,
    pub forcings: usize,
    pub tolerance: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            trials: 20,
            forcings: 3,
            tolerance: 1e-8,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifySection {
    pub thetas: Vec<f64>,
    pub tolerance: f64,
    pub diagonal_floor: f64,
}

impl Default for CertifySection {
    fn default() -> Self {
        Self {
            thetas: vec![0.1, 1.0, 10.0],
            tolerance: 1e-8,
            diagonal_floor: 1e-14,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct InverseSection {
    /// CSV `t,psi` or `t,psi,psi_prime`
    pub psi_path: String,
    /// One coefficient per line, optionally headed.
    pub g_path: String,
    pub kappa_path: String,
    /// `finite_difference` or `analytic` (third column of the psi file)
    pub derivative: String,
    pub pairing_floor: f64,
    pub consistency_tol: f64,
    pub f1: NonlinearitySection,
}

impl Default for InverseSection {
    fn default() -> Self {
        Self {
            psi_path: String::new(),
            g_path: String::new(),
            kappa_path: String::new(),
            derivative: "finite_difference".into(),
            pairing_floor: 1e-12,
            consistency_tol: 1e-8,
            f1: NonlinearitySection::default(),
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<String>,
}

/// Every violation found in a configuration.
#[derive(Debug)]
pub struct ConfigErrors(pub Vec<String>);

impl std::fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "invalid configuration ({} problem(s)):", self.0.len())?;
        for e in &self.0 {
            writeln!(f, "  {e}")?;
        }
        Ok(())
    }
}

/// Parses `text`, applies `overrides` (`section.key=value`, value in TOML
/// syntax or a bare string) and deserializes.
pub fn load(text: &str, overrides: &[String]) -> Result<(RawConfig, String), ConfigErrors> {
    let mut value: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigErrors(vec![format!("config: {}", e.message())]))?;
    let mut errors = Vec::new();
    for o in overrides {
        if let Err(e) = apply_override(&mut value, o) {
            errors.push(e);
        }
    }
    if !errors.is_empty() {
        return Err(ConfigErrors(errors));
    }
    let canonical = toml::to_string(&value).map_err(|e| ConfigErrors(vec![format!("config: {e}")]))?;
    let raw: RawConfig = toml::Value::Table(value)
        .try_into()
        .map_err(|e: toml::de::Error| ConfigErrors(vec![format!("config: {}", e.message())]))?;
    Ok((raw, canonical))
}

fn apply_override(table: &mut toml::Table, item: &str) -> Result<(), String> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| format!("--set {item}: expected section.key=value"))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(format!("--set {item}: empty key segment"));
    }
    let raw = raw.trim();
    let parsed = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut cur = table;
    for seg in &path[..path.len() - 1] {
        let entry = cur
            .entry(seg.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| format!("--set {item}: {seg} is not a section"))?;
    }
    cur.insert(path[path.len() - 1].to_string(), parsed);
    Ok(())
}

pub fn config_hash(canonical: &str) -> String {
    Sha256::digest(canonical.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Built objects shared by the subcommands.
pub struct Setup {
    pub basis: Arc<SpectralBasis>,
    pub kernel: MemoryKernel,
    pub grid: TimeGrid,
    pub history: HistoryKernel,
    pub nonlinearity: NonlinearitySpec,
    pub xi: SpectralField,
}

fn in_range(errors: &mut Vec<String>, key: &str, v: f64, ok: bool, what: &str) {
    if !ok || !v.is_finite() {
        errors.push(format!("{key} = {v}: must be {what}"));
    }
}

fn read(base: &Path, key: &str, path: &str, errors: &mut Vec<String>) -> Option<String> {
    let full = resolve(base, path);
    match std::fs::read_to_string(&full) {
        Ok(s) => Some(s),
        Err(e) => {
            errors.push(format!("{key} = {path}: cannot read {}: {e}", full.display()));
            None
        }
    }
}

pub fn resolve(base: &Path, path: &str) -> PathBuf {
    let p = Path::new(path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn memory_kernel(k: &KernelSection, base: &Path, errors: &mut Vec<String>) -> Option<MemoryKernel> {
    let built = match k.kind.as_str() {
        "zero" => Ok(MemoryKernel::Zero),
        "constant" => MemoryKernel::constant(k.m0),
        "fractional" => MemoryKernel::fractional(k.m0, k.alpha),
        "exponential" => MemoryKernel::exponential(k.m0, k.decay),
        "tabulated" => {
            let Some(path) = &k.table_path else {
                errors.push("kernel.table_path: required for a tabulated kernel".into());
                return None;
            };
            MemoryKernel::from_csv_str(&read(base, "kernel.table_path", path, errors)?)
        }
        other => {
            errors.push(format!(
                "kernel.kind = {other}: expected zero, constant, fractional, exponential or tabulated"
            ));
            return None;
        }
    };
    built.map_err(|e| errors.push(format!("kernel: {e}"))).ok()
}

fn history_kernel(h: &HistorySection, base: &Path, errors: &mut Vec<String>) -> Option<HistoryKernel> {
    let built = match h.kind.as_str() {
        "zero" => Ok(HistoryKernel::Zero),
        "constant" => HistoryKernel::constant(h.value),
        "exponential" => HistoryKernel::exponential(h.amplitude, h.decay),
        "power_law" => HistoryKernel::power_law(h.amplitude, h.exponent),
        "tabulated" => {
            let Some(path) = &h.table_path else {
                errors.push("history_kernel.table_path: required for a tabulated kernel".into());
                return None;
            };
            HistoryKernel::from_csv_str(&read(base, "history_kernel.table_path", path, errors)?)
        }
        other => {
            errors.push(format!(
                "history_kernel.kind = {other}: expected zero, constant, exponential, power_law or tabulated"
            ));
            return None;
        }
    };
    built.map_err(|e| errors.push(format!("history_kernel: {e}"))).ok()
}

pub fn nonlinearity(
    n: &NonlinearitySection,
    section: &str,
    basis: &SpectralBasis,
    mu: f64,
    delta: f64,
    errors: &mut Vec<String>,
) -> Option<NonlinearitySpec> {
    let built = match n.kind.as_str() {
        "zero" => NonlinearitySpec::zero(mu, delta),
        "linear_diagonal" => {
            let mut c = n.coeffs.clone();
            if c.len() > basis.len() {
                errors.push(format!(
                    "{section}.coeffs: {} values for {} modes",
                    c.len(),
                    basis.len()
                ));
                return None;
            }
            c.resize(basis.len(), 0.0);
            NonlinearitySpec::linear_diagonal(basis, c, mu, delta)
        }
        "power" => NonlinearitySpec::power(basis, n.p, n.coefficient, n.absolute, delta),
        "advection" => NonlinearitySpec::advection(basis, n.chi.clone(), delta),
        "power_advection" => NonlinearitySpec::power_advection(basis, n.p, n.absolute, n.chi.clone(), delta),
        other => {
            errors.push(format!(
                "{section}.kind = {other}: expected zero, linear_diagonal, power, advection or power_advection"
            ));
            return None;
        }
    };
    built.map_err(|e| errors.push(format!("{section}: {e}"))).ok()
}

fn initial(i: &InitialSection, basis: &Arc<SpectralBasis>, mu: f64, errors: &mut Vec<String>) -> Option<SpectralField> {
    let n = basis.len();
    let mut coeffs = match (&i.coeffs, i.preset.as_deref()) {
        (Some(c), _) => {
            if c.len() > n {
                errors.push(format!("initial.coeffs: {} values for {n} modes", c.len()));
                return None;
            }
            c.clone()
        }
        (None, None | Some("first_mode")) => vec![1.0],
        (None, Some("two_modes")) => vec![1.0, 0.5],
        (None, Some("smooth")) => (1..=n).map(|k| 1.0 / (k as f64).powi(3)).collect(),
        (None, Some(other)) => {
            errors.push(format!(
                "initial.preset = {other}: expected first_mode, two_modes or smooth"
            ));
            return None;
        }
    };
    coeffs.resize(n, 0.0);
    let mut xi = SpectralField::new(basis.clone(), coeffs)
        .map_err(|e| errors.push(format!("initial: {e}")))
        .ok()?;
    if let Some(target) = i.norm {
        in_range(errors, "initial.norm", target, target >= 0.0, ">= 0");
        let now = hnorm(&xi, mu);
        if now == 0.0 && target > 0.0 {
            errors.push("initial.norm: cannot rescale a zero datum".into());
            return None;
        }
        if now > 0.0 {
            xi = xi.scaled(target / now);
        }
    }
    Some(xi)
}

/// Checks every range and builds the shared objects; `base` resolves relative
/// paths.
pub fn validate(raw: &RawConfig, base: &Path) -> Result<Setup, ConfigErrors> {
    let mut e = Vec::new();
    let d = &raw.domain;
    if d.modes == 0 {
        e.push("domain.modes = 0: must be >= 1".into());
    }
    let domain = match d.kind.as_str() {
        "interval" => {
            in_range(&mut e, "domain.length", d.length, d.length > 0.0, "> 0");
            Domain::interval(d.length).ok()
        }
        "rectangle" => {
            in_range(&mut e, "domain.lx", d.lx, d.lx > 0.0, "> 0");
            in_range(&mut e, "domain.ly", d.ly, d.ly > 0.0, "> 0");
            Domain::rectangle(d.lx, d.ly).ok()
        }
        other => {
            e.push(format!("domain.kind = {other}: expected interval or rectangle"));
            None
        }
    };
    let g = &raw.grid;
    in_range(&mut e, "grid.T", g.horizon, g.horizon > 0.0, "> 0");
    in_range(&mut e, "grid.grading", g.grading, g.grading >= 1.0, ">= 1");
    if g.steps < 2 {
        e.push(format!("grid.steps = {}: must be >= 2", g.steps));
    }
    let p = &raw.problem;
    in_range(&mut e, "problem.mu", p.mu, true, "finite");
    in_range(&mut e, "problem.delta", p.delta, p.delta > 0.0 && p.delta < 1.0, "in (0, 1)");
    in_range(&mut e, "problem.beta", p.beta, p.beta >= 0.0, ">= 0");
    in_range(&mut e, "problem.tol", p.tol, p.tol > 0.0, "> 0");
    in_range(&mut e, "problem.gamma", p.gamma, p.gamma > 0.0 && p.gamma < 1.0, "in (0, 1)");
    if let Some(t) = p.t_min {
        in_range(&mut e, "problem.t_min", t, t > 0.0 && t < g.horizon, "in (0, T)");
    }
    if p.max_iterations == 0 {
        e.push("problem.max_iterations = 0: must be >= 1".into());
    }
    let v = &raw.verify;
    if v.trials == 0 {
        e.push("verify.trials = 0: must be >= 1".into());
    }
    in_range(&mut e, "verify.tolerance", v.tolerance, v.tolerance >= 0.0, ">= 0");
    let c = &raw.certify;
    if c.thetas.is_empty() {
        e.push("certify.thetas: at least one value is required".into());
    }
    for (i, &t) in c.thetas.iter().enumerate() {
        in_range(&mut e, &format!("certify.thetas[{i}]"), t, t > 0.0, "> 0");
    }
    in_range(&mut e, "certify.tolerance", c.tolerance, c.tolerance >= 0.0, ">= 0");
    in_range(&mut e, "certify.diagonal_floor", c.diagonal_floor, c.diagonal_floor >= 0.0, ">= 0");
    if let Some(inv) = &raw.inverse {
        for (key, path) in [
            ("inverse.psi_path", &inv.psi_path),
            ("inverse.g_path", &inv.g_path),
            ("inverse.kappa_path", &inv.kappa_path),
        ] {
            if path.is_empty() {
                e.push(format!("{key}: required"));
            }
        }
        if !matches!(inv.derivative.as_str(), "finite_difference" | "analytic") {
            e.push(format!(
                "inverse.derivative = {}: expected finite_difference or analytic",
                inv.derivative
            ));
        }
        in_range(&mut e, "inverse.pairing_floor", inv.pairing_floor, inv.pairing_floor >= 0.0, ">= 0");
        in_range(&mut e, "inverse.consistency_tol", inv.consistency_tol, inv.consistency_tol >= 0.0, ">= 0");
    }

    let kernel = memory_kernel(&raw.kernel, base, &mut e);
    let history = history_kernel(&raw.history_kernel, base, &mut e);
    let grid = if g.horizon > 0.0 && g.steps >= 2 && g.grading >= 1.0 {
        TimeGrid::graded(g.horizon, g.steps, g.grading)
            .map_err(|err| e.push(format!("grid: {err}")))
            .ok()
    } else {
        None
    };
    let basis = match domain {
        Some(dm) if d.modes > 0 => build_basis(dm, d.modes)
            .map_err(|err| e.push(format!("domain: {err}")))
            .ok(),
        _ => None,
    };
    let mut nl = None;
    let mut xi = None;
    if let Some(b) = &basis {
        if p.delta > 0.0 && p.delta < 1.0 && p.mu.is_finite() {
            nl = nonlinearity(&raw.nonlinearity, "nonlinearity", b, p.mu, p.delta, &mut e);
        }
        xi = initial(&raw.initial, b, p.mu, &mut e);
    }
    match (e.is_empty(), basis, kernel, grid, history, nl, xi) {
        (true, Some(basis), Some(kernel), Some(grid), Some(history), Some(nonlinearity), Some(xi)) => Ok(Setup {
            basis,
            kernel,
            grid,
            history,
            nonlinearity,
            xi,
        }),
        _ => {
            if e.is_empty() {
                e.push("config: could not build the problem".into());
            }
            Err(ConfigErrors(e))
        }
    }
}
