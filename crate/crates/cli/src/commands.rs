use std::path::Path;
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use rstokes_core::inverse::{reconstruct, InverseProblemSpec, PsiDerivative};
use rstokes_core::kernels::{
    certify_completely_positive, certify_pc, m_star_gate, reciprocal_cumulative_probe, CertificateStatus,
};
use rstokes_core::mild::{
    check_holder, check_regular_forcing, check_small_data, holder_estimate, picard_solve, select_radius,
    MildSolution, PicardOptions,
};
use rstokes_core::relaxation::{relaxation_batch, verify_relaxation, RelaxationReport, RelaxationTable};
use rstokes_core::resolvent::{verify_resolvent_bounds, ResolventContext};
use rstokes_core::spectral::{hnorm, SpectralBasis, SpectralField};
use rstokes_core::{Error, TimeGrid};

use crate::config::{nonlinearity, resolve, ConfigErrors, RawConfig, Setup};
use crate::output::{num, Csv, Sink};

pub enum Failure {
    Config(ConfigErrors),
    Solver(String),
    /// Partial artifacts are written before this is returned.
    NonConvergence(String),
    Io(std::io::Error),
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NonConvergence { .. } => Self::NonConvergence(e.to_string()),
            other => Self::Solver(other.to_string()),
        }
    }
}

fn omega_csv(table: &RelaxationTable) -> Csv {
    let mut header = vec!["t".to_string()];
    header.extend((1..=table.lambdas().len()).map(|n| format!("omega(lambda_{n})")));
    let mut csv = Csv::new(&header);
    for (i, &t) in table.grid().nodes().iter().enumerate() {
        let mut row = vec![t];
        row.extend((0..table.lambdas().len()).map(|n| table.omega(i, n)));
        csv.numbers(&row);
    }
    csv
}

fn relaxation_certificates(report: &RelaxationReport, sink: &mut Sink) {
    for property in ["omega_bound", "omega_integral", "lambda_monotone"] {
        let rows: Vec<_> = report.rows.iter().filter(|r| r.property == property).collect();
        let pass = rows.iter().all(|r| r.pass);
        sink.certify(
            format!("relaxation.{property}"),
            pass,
            format!("worst margin {:e} over {} rows", report.worst(property), rows.len()),
        );
    }
}

pub fn relax(setup: &Setup, raw: &RawConfig, sink: &mut Sink) -> Result<(), Failure> {
    let table = relaxation_batch(&setup.kernel, setup.basis.lambdas(), &setup.grid)?;
    sink.write("omega.csv", &omega_csv(&table))?;
    let report = verify_relaxation(&table, &setup.kernel, raw.verify.tolerance)?;
    let mut csv = Csv::new(&["property", "lambda", "worst_margin", "pass"]);
    for r in &report.rows {
        csv.row(&[r.property.to_string(), num(r.lambda), num(r.worst_margin), r.pass.to_string()]);
    }
    sink.write("relaxation_report.csv", &csv)?;
    relaxation_certificates(&report, sink);
    Ok(())
}

fn random_field(rng: &mut StdRng, basis: &Arc<SpectralBasis>) -> SpectralField {
    let coeffs = (0..basis.len())
        .map(|n| rng.gen_range(-1.0..1.0) / (1.0 + n as f64))
        .collect();
    SpectralField::new(basis.clone(), coeffs).expect("length matches the basis")
}

pub fn verify(setup: &Setup, raw: &RawConfig, sink: &mut Sink) -> Result<(), Failure> {
    let ctx = ResolventContext::new(setup.basis.clone(), setup.kernel.clone(), &setup.grid)?;
    let tol = raw.verify.tolerance;
    let relax = verify_relaxation(ctx.table(), &setup.kernel, tol)?;
    let mut rng = StdRng::seed_from_u64(raw.seed);
    let trials: Vec<SpectralField> = (0..raw.verify.trials).map(|_| random_field(&mut rng, &setup.basis)).collect();
    let horizon = setup.grid.horizon();
    let forcings: Vec<Vec<SpectralField>> = (0..raw.verify.forcings)
        .map(|_| {
            let a = random_field(&mut rng, &setup.basis);
            let b = random_field(&mut rng, &setup.basis);
            setup
                .grid
                .nodes()
                .iter()
                .map(|&t| a.axpy((3.0 * t / horizon).sin(), &b).expect("same basis"))
                .collect()
        })
        .collect();
    let bounds = verify_resolvent_bounds(&ctx, raw.problem.mu, raw.problem.delta, &trials, &forcings, tol)?;

    let mut csv = Csv::new(&["t", "item", "worst_margin", "status", "reason"]);
    let t = setup.grid.nodes();
    for r in &relax.rows {
        csv.row(&[
            num(t[r.worst_index]),
            r.property.to_string(),
            num(r.worst_margin),
            if r.pass { "pass" } else { "fail" }.to_string(),
            format!("lambda = {}", num(r.lambda)),
        ]);
    }
    for r in &bounds.rows {
        csv.row(&[
            num(r.t),
            r.item.to_string(),
            num(r.worst_margin),
            r.status.as_str().to_string(),
            r.reason.replace(',', ";"),
        ]);
    }
    sink.write("verify_report.csv", &csv)?;
    relaxation_certificates(&relax, sink);
    for r in &bounds.rows {
        if r.status.as_str() != "skip" {
            sink.certify(
                format!("resolvent.{}", r.item),
                r.status.as_str() == "pass",
                format!("worst margin {:e} at t = {}", r.worst_margin, r.t),
            );
        } else {
            sink.note(format!("resolvent.{} skipped: {}", r.item, r.reason));
        }
    }
    Ok(())
}

pub fn certify(setup: &Setup, raw: &RawConfig, sink: &mut Sink) -> Result<(), Failure> {
    let c = &raw.certify;
    let m = &setup.kernel;
    let cp = certify_completely_positive(m, &c.thetas, &setup.grid, c.tolerance)?;
    let pc = certify_pc(m, &setup.grid, c.tolerance, c.diagonal_floor)?;
    let horizon = setup.grid.horizon();
    let gate = m_star_gate(m, horizon);
    let probe = reciprocal_cumulative_probe(m, horizon);

    let mut csv = Csv::new(&["check", "theta", "value", "status", "detail"]);
    for th in &cp.thetas {
        csv.row(&[
            "complete_positivity".into(),
            num(th.theta),
            num(th.min_s.min(th.min_r)),
            if th.pass { "pass" } else { "fail" }.into(),
            format!("min s = {:e}; min r = {:e}; r by {}", th.min_s, th.min_r, th.r_method),
        ]);
    }
    csv.row(&[
        "pc_split".into(),
        String::new(),
        num(pc.min_k),
        pc.status.as_str().into(),
        pc.reason.replace(',', ";"),
    ]);
    for (name, g) in [("derivative_integrable", &gate), ("reciprocal_cumulative_integrable", &probe)] {
        csv.row(&[
            name.into(),
            String::new(),
            num(g.integral),
            if g.pass { "pass" } else { "fail" }.into(),
            g.message.replace(',', ";"),
        ]);
    }
    sink.write("certificates.csv", &csv)?;
    if !pc.k.is_empty() {
        let t = setup.grid.nodes();
        let mut kc = Csv::new(&["t", "k"]);
        for (j, &k) in pc.k.iter().enumerate() {
            kc.numbers(&[0.5 * (t[j] + t[j + 1]), k]);
        }
        sink.write("pc_k.csv", &kc)?;
    }

    sink.certify("complete_positivity", cp.pass, format!("{} theta sample(s)", cp.thetas.len()));
    match pc.status {
        CertificateStatus::NotApplicable => sink.note(format!("pc_split not applicable: {}", pc.reason)),
        s => sink.certify("pc_split", s == CertificateStatus::Pass, pc.reason.clone()),
    }
    sink.certify("derivative_integrable", gate.pass, gate.message.clone());
    sink.certify("reciprocal_cumulative_integrable", probe.pass, probe.message.clone());
    Ok(())
}

fn write_solution(u: &MildSolution, raw: &RawConfig, sink: &mut Sink) -> Result<(), Failure> {
    let mu = raw.problem.mu;
    let k = raw.problem.output_modes.min(u.states[0].coeffs().len());
    let mut header = vec!["t".to_string(), "norm_L2".into(), format!("norm_H{mu}")];
    header.extend((1..=k).map(|n| format!("coeff_{n}")));
    let mut csv = Csv::new(&header);
    for (t, s) in u.grid.nodes().iter().zip(&u.states) {
        let mut row = vec![*t, hnorm(s, 0.0), hnorm(s, mu)];
        row.extend_from_slice(&s.coeffs()[..k]);
        csv.numbers(&row);
    }
    sink.write("states.csv", &csv)?;
    let mut it = Csv::new(&["iteration", "residual", "ratio"]);
    for (i, r) in u.residuals.iter().enumerate() {
        let ratio = if i == 0 { String::new() } else { num(r / u.residuals[i - 1]) };
        it.row(&[(i + 1).to_string(), num(*r), ratio]);
    }
    sink.write("iterations.csv", &it)?;
    Ok(())
}

pub fn solve(setup: &Setup, raw: &RawConfig, sink: &mut Sink) -> Result<(), Failure> {
    let p = &raw.problem;
    let spec = &setup.nonlinearity;
    let horizon = setup.grid.horizon();
    let l1 = setup.history.l1_norm(horizon);
    let xi_norm = hnorm(&setup.xi, spec.mu);

    // hypothesis checks use the Lipschitz data on the selected ball
    let mut local = None;
    match select_radius(spec, l1, horizon, p.delta, xi_norm) {
        Ok(choice) => {
            let lstar = (spec.lipschitz.l_f)(choice.rho);
            let kstar = (spec.lipschitz.k_f)(choice.rho * l1);
            let d = check_small_data(lstar, kstar, l1, horizon, p.delta)?;
            sink.certify("small_data", d.pass, format!("{} = {:e} < {}; radius {:e}", d.detail, d.value, d.threshold, choice.rho));
            local = Some((lstar, kstar));
        }
        Err(e) => sink.certify("small_data", false, e.to_string()),
    }
    let d = check_regular_forcing(spec.lipschitz.l_star, spec.lipschitz.k_star, l1, setup.basis.lambda1())?;
    sink.certify("regular_forcing", d.pass, format!("{} = {:e} < {:e}", d.detail, d.value, d.threshold));

    let ctx = ResolventContext::new(setup.basis.clone(), setup.kernel.clone(), &setup.grid)?;
    let opts = PicardOptions {
        beta: p.beta,
        tol: p.tol,
        max_iterations: p.max_iterations,
    };
    let u = match picard_solve(&ctx, spec, &setup.history, &setup.xi, &opts) {
        Ok(u) => u,
        Err(Error::NonConvergence {
            iterations,
            last_residual,
            partial,
            ..
        }) => {
            write_solution(&partial, raw, sink)?;
            let msg = format!("Picard iteration did not converge: {iterations} iterations, last residual {last_residual:e} (problem.tol = {:e})", p.tol);
            sink.certify("converged", false, msg.clone());
            return Err(Failure::NonConvergence(msg));
        }
        Err(e) => return Err(e.into()),
    };
    write_solution(&u, raw, sink)?;
    sink.certify(
        "converged",
        u.converged,
        format!("{} iterations, last residual {:e}", u.iterations, u.residuals.last().copied().unwrap_or(0.0)),
    );

    let t_min = p.t_min.unwrap_or_else(|| setup.grid.nodes()[4.min(setup.grid.steps())]);
    let h = holder_estimate(&u, &setup.history, p.gamma, spec.mu, t_min)?;
    let mut csv = Csv::new(&["gamma", "mu", "t_min", "seminorm", "worst_t", "worst_h", "ell1", "ell2", "pairs"]);
    csv.row(&[
        num(h.gamma),
        num(h.mu),
        num(h.t_min),
        num(h.seminorm),
        num(h.worst_t),
        num(h.worst_h),
        num(h.ell1),
        num(h.ell2),
        h.pairs.to_string(),
    ]);
    sink.write("holder.csv", &csv)?;
    for w in &h.warnings {
        sink.note(format!("holder: {w}"));
    }
    if let Some((lstar, kstar)) = local {
        match check_holder(lstar, kstar, h.ell2, horizon, p.delta, p.gamma) {
            Ok(d) => sink.certify("holder", d.pass, format!("{} = {:e} < {}", d.detail, d.value, d.threshold)),
            Err(e) => sink.certify("holder", false, e.to_string()),
        }
    }
    Ok(())
}

fn numbers(text: &str, key: &str, columns: usize) -> Result<Vec<Vec<f64>>, Failure> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = line.split(',').map(|c| c.trim().parse::<f64>()).collect();
        match parsed {
            Ok(v) if v.len() >= columns => rows.push(v),
            Ok(v) => {
                return Err(Failure::Solver(format!(
                    "{key}: line {} has {} column(s), expected {columns}",
                    i + 1,
                    v.len()
                )))
            }
            // a header
            Err(_) if i == 0 => {}
            Err(e) => return Err(Failure::Solver(format!("{key}: line {}: {e}", i + 1))),
        }
    }
    Ok(rows)
}

fn coefficient_field(base: &Path, key: &str, path: &str, basis: &Arc<SpectralBasis>) -> Result<SpectralField, Failure> {
    let text = std::fs::read_to_string(resolve(base, path))
        .map_err(|e| Failure::Solver(format!("{key} = {path}: {e}")))?;
    let mut c: Vec<f64> = numbers(&text, key, 1)?.into_iter().map(|r| r[r.len() - 1]).collect();
    if c.len() > basis.len() {
        return Err(Failure::Solver(format!("{key}: {} coefficients for {} modes", c.len(), basis.len())));
    }
    c.resize(basis.len(), 0.0);
    Ok(SpectralField::new(basis.clone(), c)?)
}

pub fn inverse(setup: &Setup, raw: &RawConfig, base: &Path, sink: &mut Sink) -> Result<(), Failure> {
    let Some(inv) = &raw.inverse else {
        return Err(Failure::Config(ConfigErrors(vec![
            "inverse: section required for the inverse subcommand".into(),
        ])));
    };
    let analytic = inv.derivative == "analytic";
    let text = std::fs::read_to_string(resolve(base, &inv.psi_path))
        .map_err(|e| Failure::Solver(format!("inverse.psi_path = {}: {e}", inv.psi_path)))?;
    let rows = numbers(&text, "inverse.psi_path", if analytic { 3 } else { 2 })?;
    let grid = TimeGrid::from_nodes(rows.iter().map(|r| r[0]).collect())
        .map_err(|e| Failure::Solver(format!("inverse.psi_path: {e}")))?;
    let psi: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    let g = coefficient_field(base, "inverse.g_path", &inv.g_path, &setup.basis)?;
    let kappa = coefficient_field(base, "inverse.kappa_path", &inv.kappa_path, &setup.basis)?;
    let mut errors = Vec::new();
    let Some(f1) = nonlinearity(&inv.f1, "inverse.f1", &setup.basis, raw.problem.mu, raw.problem.delta, &mut errors) else {
        return Err(Failure::Config(ConfigErrors(errors)));
    };
    let spec = InverseProblemSpec {
        g,
        kappa,
        psi,
        psi_derivative: if analytic {
            PsiDerivative::Analytic(rows.iter().map(|r| r[2]).collect())
        } else {
            PsiDerivative::FiniteDifference
        },
        f1,
        xi: setup.xi.clone(),
        pairing_floor: inv.pairing_floor,
        consistency_tol: inv.consistency_tol,
    };
    let gate = m_star_gate(&setup.kernel, grid.horizon());
    sink.certify("derivative_integrable", gate.pass, gate.message.clone());
    let ctx = ResolventContext::new(setup.basis.clone(), setup.kernel.clone(), &grid)?;
    let opts = PicardOptions {
        beta: raw.problem.beta,
        tol: raw.problem.tol,
        max_iterations: raw.problem.max_iterations,
    };
    let rec = reconstruct(&ctx, &spec, &opts)?;
    let mut pc = Csv::new(&["t", "p"]);
    let mut rc = Csv::new(&["t", "measurement_residual"]);
    for (i, &t) in grid.nodes().iter().enumerate() {
        pc.numbers(&[t, rec.p[i]]);
        rc.numbers(&[t, rec.residual[i]]);
    }
    sink.write("p_recovered.csv", &pc)?;
    sink.write("residual.csv", &rc)?;
    let worst = rec.residual.iter().copied().fold(0.0, f64::max);
    sink.certify(
        "measurement_residual",
        worst <= 10.0 * opts.tol,
        format!("max |(u, kappa) - psi| = {worst:e} (<= {:e})", 10.0 * opts.tol),
    );
    sink.note(format!(
        "pairing (g, kappa) = {}; {} iterations",
        rec.pairing, rec.solution.iterations
    ));
    Ok(())
}
