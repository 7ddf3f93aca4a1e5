use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

use rstokes_core::inverse::forward_simulate;
use rstokes_core::kernels::MemoryKernel;
use rstokes_core::mild::{NonlinearitySpec, PicardOptions};
use rstokes_core::resolvent::ResolventContext;
use rstokes_core::spectral::{build_basis, Domain, SpectralField};
use rstokes_core::TimeGrid;

fn rstokes(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rstokes"))
        .args(args)
        .arg("--out")
        .arg(out)
        .arg("--quiet")
        .env_remove("RSTOKES_OUT")
        .output()
        .expect("binary runs")
}

fn table(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn zero_kernel_relaxes_exponentially() {
    let dir = tempfile::tempdir().unwrap();
    let out = rstokes(
        &["relax", "--grid", "400", "--set", "kernel.kind=\"zero\"", "--set", "domain.modes=4"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = table(&dir.path().join("omega.csv"));
    assert_eq!(header, ["t", "omega(lambda_1)", "omega(lambda_2)", "omega(lambda_3)", "omega(lambda_4)"]);
    assert_eq!(rows.len(), 401);
    for row in &rows {
        let exact = (-PI * PI * row[0]).exp();
        assert!((row[1] - exact).abs() < 2e-3 * exact.max(1e-3), "t = {}", row[0]);
    }
    let s = summary(dir.path());
    assert_eq!(s["status"], "ok");
    assert!(s["certificates"].as_array().unwrap().iter().all(|c| c["pass"] == true));
}

#[test]
fn verify_report_has_fixed_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = rstokes(&["verify", "--grid", "128", "--set", "domain.modes=8", "--set", "verify.trials=4"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("verify_report.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,item,worst_margin,status,reason"));
    let mut items = Vec::new();
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 5, "{line}");
        assert!(["pass", "fail", "skip"].contains(&cells[3]), "{line}");
        cells[0].parse::<f64>().unwrap();
        items.push(cells[1].to_string());
    }
    assert!(items.iter().any(|i| i == "omega_bound"));
    assert!(items.iter().any(|i| i == "operator_norm"));
}

#[test]
fn linear_solve_matches_relaxation() {
    let dir = tempfile::tempdir().unwrap();
    let common = ["--grid", "256", "--set", "domain.modes=6", "--set", "kernel.kind=\"exponential\""];
    let relax = dir.path().join("relax");
    let solve = dir.path().join("solve");
    assert!(rstokes(&[&["relax"], &common[..]].concat(), &relax).status.success());
    let out = rstokes(&[&["solve", "--set", "initial.preset=\"two_modes\""], &common[..]].concat(), &solve);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (_, omega) = table(&relax.join("omega.csv"));
    let (header, states) = table(&solve.join("states.csv"));
    assert_eq!(&header[..4], ["t", "norm_L2", "norm_H1", "coeff_1"]);
    for (w, s) in omega.iter().zip(&states) {
        assert_eq!(w[0], s[0]);
        assert!((s[3] - w[1]).abs() < 1e-14);
        assert!((s[4] - 0.5 * w[2]).abs() < 1e-14);
        assert!(s[5].abs() < 1e-14);
    }
    for name in ["iterations.csv", "holder.csv"] {
        assert!(solve.join(name).exists(), "{name}");
    }
}

#[test]
fn validation_reports_every_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = rstokes(
        &["solve", "--set", "kernel.alpha=1.5", "--set", "grid.steps=0", "--set", "problem.delta=2.0"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    for key in ["kernel", "grid.steps", "problem.delta"] {
        assert!(err.contains(key), "missing {key} in {err}");
    }
    assert!(!dir.path().join("summary.json").exists());
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[kernel]\nkind = \"zero\"\nalpah = 0.3\n").unwrap();
    let out = rstokes(&["relax", "--config", cfg.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpah"));
}

#[test]
fn runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["verify", "--grid", "64", "--set", "domain.modes=6", "--set", "verify.trials=3", "--set", "seed=7"];
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(rstokes(&args, &a).status.success());
    assert!(rstokes(&args, &b).status.success());
    let read = |d: &Path| std::fs::read(d.join("verify_report.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_eq!(summary(&a)["config_sha256"], summary(&b)["config_sha256"]);
    assert_eq!(summary(&a)["seed"], 7);
}

#[test]
fn output_directory_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_rstokes"))
        .args(["certify", "--grid", "64", "--quiet"])
        .env("RSTOKES_OUT", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("certificates.csv").exists());
}

#[test]
fn source_is_recovered_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let modes = 16;
    let basis = build_basis(Domain::interval(1.0).unwrap(), modes).unwrap();
    let grid = TimeGrid::uniform(1.0, 512).unwrap();
    let ctx = ResolventContext::new(basis.clone(), MemoryKernel::exponential(1.0, 1.0).unwrap(), &grid).unwrap();
    let mut g = SpectralField::zeros(basis.clone());
    g.coeffs_mut()[0] = 1.0;
    g.coeffs_mut()[1] = 0.5;
    let kappa = SpectralField::mode(basis.clone(), 0).unwrap();
    let xi = SpectralField::zeros(basis.clone());
    let f1 = NonlinearitySpec::zero(1.0, 0.5).unwrap();
    let p: Vec<f64> = grid.nodes().iter().map(|t| 1.0 + (2.0 * PI * t).sin()).collect();
    let fwd = forward_simulate(&ctx, &g, &kappa, &f1, &xi, &p, &PicardOptions::default()).unwrap();

    let mut psi = String::from("t,psi\n");
    for (t, v) in grid.nodes().iter().zip(&fwd.psi) {
        psi.push_str(&format!("{t:e},{v:e}\n"));
    }
    std::fs::write(dir.path().join("psi.csv"), psi).unwrap();
    std::fs::write(dir.path().join("g.csv"), "coefficient\n1\n0.5\n").unwrap();
    std::fs::write(dir.path().join("kappa.csv"), "1\n").unwrap();
    let cfg = dir.path().join("inverse.toml");
    std::fs::write(
        &cfg,
        format!(
            "[domain]\nmodes = {modes}\n[kernel]\nkind = \"exponential\"\n[initial]\ncoeffs = [0.0]\n\
             [inverse]\npsi_path = \"psi.csv\"\ng_path = \"g.csv\"\nkappa_path = \"kappa.csv\"\n"
        ),
    )
    .unwrap();
    let out = rstokes(&["inverse", "--config", cfg.to_str().unwrap()], &dir.path().join("out"));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = table(&dir.path().join("out").join("p_recovered.csv"));
    assert_eq!(header, ["t", "p"]);
    assert_eq!(rows.len(), p.len());
    let worst = rows.iter().zip(&p).map(|(r, e)| (r[1] - e).abs()).fold(0.0, f64::max);
    let p_scale = p.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    assert!(worst < 0.05 * p_scale, "worst {worst}");
    let s = summary(&dir.path().join("out"));
    let residual = s["certificates"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "measurement_residual")
        .unwrap();
    assert_eq!(residual["pass"], true);
}

#[test]
fn nonconvergence_keeps_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = rstokes(
        &[
            "solve",
            "--grid",
            "64",
            "--set",
            "domain.modes=8",
            "--set",
            "nonlinearity.kind=\"power\"",
            "--set",
            "nonlinearity.coefficient=50.0",
            "--set",
            "initial.norm=5.0",
            "--set",
            "problem.max_iterations=3",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("states.csv").exists());
    let s = summary(dir.path());
    assert_eq!(s["status"], "nonconvergence");
}
