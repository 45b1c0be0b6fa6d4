use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BENCH: &str = "command = sweep-eps
resolution = 8
active = 1, 3
phi0_expr = 0.5*cos(2*x1)
phi1_expr = 0.5*sin(2*x3) + 0.3*cos(x1 + x3)
nt = 16
epsilon_values = 0.1, 0.05, 0.02
";

fn volform(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_volform"));
    cmd.args(args);
    for key in ["VOLFORM_CONFIG", "VOLFORM_OUT", "VOLFORM_SEED", "VOLFORM_TOL", "VOLFORM_THREADS"] {
        cmd.env_remove(key);
    }
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn run_with(dir: &Path, cmd: &str, config: &str, out: &str) -> Output {
    let cfg = write(dir, &format!("{out}.conf"), config);
    let out = dir.join(out);
    volform(&[cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", "1"], &[])
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn benchmark_sweep_writes_one_row_per_epsilon_and_verifies() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_with(tmp.path(), "sweep-eps", BENCH, "bench");
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("bench/eps_sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert!(rows[0].starts_with("eps,sup_phi_tt,ratio_ddbar"));
    assert_eq!(rows.len(), 4);
    let r = report(&tmp.path().join("bench"));
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["status"], "ok");
    assert_eq!(r["config"]["epsilon_values"], serde_json::json!([0.1, 0.05, 0.02]));
    assert!(r["config_text"].as_str().unwrap().contains("seed = 0"));
    for k in 0..3 {
        assert!(tmp.path().join(format!("bench/phi_{k:03}.kfld")).exists());
    }

    let input = tmp.path().join("bench");
    let v = run_with(
        tmp.path(),
        "verify",
        &format!("input = {}\nlemma_samples = 200, 200, 50\nenergy_probes = 1\n", input.display()),
        "verified",
    );
    assert_eq!(v.status.code(), Some(0), "{}", stderr(&v));
    let ratios = fs::read_to_string(tmp.path().join("verified/eps_ratios.csv")).unwrap();
    assert_eq!(ratios.lines().count(), 4);
    let vr = report(&tmp.path().join("verified"));
    assert!(vr["result"]["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
    assert_eq!(vr["result"]["lemmas"].as_array().unwrap().len(), 3);
}

#[test]
fn nonsense_epsilon_exits_with_solver_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "command = solve-geodesic\nresolution = 8\nphi0_expr = 0\nphi1_expr = 0.1*cos(x1)\nepsilon = 1e3\n";
    let o = run_with(tmp.path(), "solve-geodesic", cfg, "big");
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("ConeExit"), "{}", stderr(&o));
    let r = report(&tmp.path().join("big"));
    assert_eq!(r["status"], "solver_failure");
    assert!(!tmp.path().join("big/phi.kfld").exists());
}

#[test]
fn corrupted_field_file_fails_verification_with_a_location() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "command = solve-geodesic\nresolution = 8\nphi0_expr = 0.2*cos(x1)\nphi1_expr = 0.1*sin(x3)\nnt = 16\n";
    let o = run_with(tmp.path(), "solve-geodesic", cfg, "run");
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let field = tmp.path().join("run/phi.kfld");
    let mut bytes = fs::read(&field).unwrap();
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    // level 7, point 20
    let off = 12 + header_len + 8 * (7 * 64 + 20);
    bytes[off..off + 8].copy_from_slice(&3.0f64.to_le_bytes());
    fs::write(&field, &bytes).unwrap();

    let vcfg = format!("input = {}\nlemma_samples = 50, 50, 10\nenergy_probes = 0\n", tmp.path().join("run").display());
    let v = run_with(tmp.path(), "verify", &vcfg, "check");
    assert_eq!(v.status.code(), Some(3), "{}", stderr(&v));
    let r = report(&tmp.path().join("check"));
    assert_eq!(r["status"], "verification_failure");
    let residual = r["result"]["checks"].as_array().unwrap().iter().find(|c| c["name"] == "residual").unwrap().clone();
    assert_eq!(residual["pass"], false);
    let loc = &residual["location"];
    assert_eq!(loc["index"], 20);
    assert!((6..=8).contains(&loc["level"].as_u64().unwrap()), "{loc}");

    fs::write(&field, &bytes[..bytes.len() - 8]).unwrap();
    let v = run_with(tmp.path(), "verify", &vcfg, "check2");
    assert_eq!(v.status.code(), Some(3), "{}", stderr(&v));
    assert!(stderr(&v).contains("load check failed"), "{}", stderr(&v));
}

#[test]
fn misspelled_key_is_rejected_with_its_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = format!("{BENCH}epsilonn = 0.1\n");
    let o = run_with(tmp.path(), "sweep-eps", &cfg, "typo");
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 8: unknown key `epsilonn`"), "{}", stderr(&o));
    assert!(!tmp.path().join("typo").exists());
}

#[test]
fn identical_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = run_with(tmp.path(), "sweep-eps", BENCH, out);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let mut names: Vec<_> = fs::read_dir(tmp.path().join("a")).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 6);
    for name in names {
        let a = fs::read(tmp.path().join("a").join(&name)).unwrap();
        let b = fs::read(tmp.path().join("b").join(&name)).unwrap();
        assert!(a == b, "{name:?} differs");
    }
}

#[test]
fn setup_errors_leave_no_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "command = inspect-metric\nresolution = 8\nmetric = kahler_perturbed(8*cos(x1))\n";
    let o = run_with(tmp.path(), "inspect-metric", cfg, "neg");
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(!tmp.path().join("neg").exists());
    let leftovers: Vec<_> = fs::read_dir(tmp.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with(".volform"))
        .collect();
    assert!(leftovers.is_empty(), "{leftovers:?}");
}

#[test]
fn occupied_output_directory_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    fs::create_dir(tmp.path().join("busy")).unwrap();
    fs::write(tmp.path().join("busy/keep.txt"), "x").unwrap();
    let o = run_with(tmp.path(), "inspect-metric", "resolution = 8\n", "busy");
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(fs::read_to_string(tmp.path().join("busy/keep.txt")).unwrap(), "x");
}

#[test]
fn environment_and_flags_override_the_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "m.conf", "resolution = 8\nseed = 3\n");
    let out = tmp.path().join("m");
    let o = volform(
        &["inspect-metric", "--config", cfg.to_str().unwrap()],
        &[("VOLFORM_OUT", out.to_str().unwrap()), ("VOLFORM_SEED", "11"), ("VOLFORM_TOL", "1e-7")],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(&out);
    assert_eq!(r["seed"], 11);
    assert_eq!(r["config"]["tol"], 1e-7);

    let o = volform(&["inspect-metric", "--config", cfg.to_str().unwrap(), "--seed", "4", "--print-config"], &[("VOLFORM_SEED", "11")]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("seed = 4\n"));
}

#[test]
fn inspect_metric_reports_geometry() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "metric = balanced_root(0.3*cos(x1) + 0.2*sin(x1 + x3))\nresolution = 8\n";
    let o = run_with(tmp.path(), "inspect-metric", cfg, "g");
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(&tmp.path().join("g"));
    assert!(r["result"]["balanced_residual"].as_f64().unwrap() < 1e-10);
    assert!(r["result"]["min_eigenvalue"].as_f64().unwrap() > 0.0);
    assert!(tmp.path().join("g/metric.kfld").exists() && tmp.path().join("g/x.kfld").exists());
}

#[test]
fn solve_cy_reports_solution_and_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "resolution = 8
alpha_spec = conformal(0.2*cos(x3))
omega_spec = balanced_root(0.3*cos(x1) + 0.2*sin(x1 + x3))
psi_expr = 0.1*sin(x1) + 0.05*cos(x1 + x3)
chi = exact
psi_amplitudes = 0.5, 1, 2
";
    let o = run_with(tmp.path(), "solve-cy", cfg, "cy");
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(&tmp.path().join("cy"));
    let res = &r["result"];
    assert!(res["residual"].as_f64().unwrap() <= 1e-9);
    assert!(res["mean_u"].as_f64().unwrap().abs() < 1e-14);
    assert!(res["sup_abs_u"].as_f64().unwrap().is_finite());
    assert!(res["classification"].is_string());
    assert!(res["recovered"]["balanced_residual"].as_f64().unwrap() < 1e-8);
    let sweep = fs::read_to_string(tmp.path().join("cy/psi_sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 4);
    assert!(tmp.path().join("cy/u.kfld").exists());
}

#[test]
fn field_files_round_trip_through_a_run() {
    use volform_core::geometry::io::FieldFile;
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "command = solve-geodesic\nresolution = 8\nphi0_expr = 0.2*cos(x1)\nphi1_expr = 0.1*sin(x3)\nnt = 16\n";
    assert_eq!(run_with(tmp.path(), "solve-geodesic", cfg, "first").status.code(), Some(0));
    let phi = FieldFile::load(&tmp.path().join("first/phi.kfld")).unwrap();
    let d = phi.header.domain().unwrap();
    FieldFile::scalar(&d, &phi.columns[0]).save(&tmp.path().join("phi0.kfld")).unwrap();
    FieldFile::scalar(&d, &phi.columns[16]).save(&tmp.path().join("phi1.kfld")).unwrap();
    let cfg2 = format!(
        "command = solve-geodesic\nresolution = 8\nphi0_file = {}\nphi1_file = {}\nnt = 16\n",
        tmp.path().join("phi0.kfld").display(),
        tmp.path().join("phi1.kfld").display()
    );
    assert_eq!(run_with(tmp.path(), "solve-geodesic", &cfg2, "second").status.code(), Some(0));
    assert_eq!(fs::read(tmp.path().join("first/phi.kfld")).unwrap(), fs::read(tmp.path().join("second/phi.kfld")).unwrap());
}
