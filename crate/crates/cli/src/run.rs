//! Command dispatch and artifact emission.

use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;
use volform_core::cy::{self, c0_sweep, chi_plugin, compute_e, solve_cy, CyError, CyOptions, CyProblem};
use volform_core::expr::Expr;
use volform_core::geodesic::{
    construct_subsolution, continuity_solve, operator_f, sweep_eps, ContinuityOptions, ContinuityProblem,
    GeodesicError, NewtonOptions, OperatorCoefficients, SpaceTimeField, SpaceTimePoint, SubsolutionSearch,
};
use volform_core::geometry::io::{FieldFile, FieldKind};
use volform_core::geometry::HermitianMetricField;
use volform_core::grid::GridDomain;
use volform_core::verify::{energy_minimality_probe, estimate_report, lemma_suites, CheckReport, EstimateReport};

use crate::config::{parse_config, Command, FieldSource, MetricSpec, RunConfig};
use crate::output::{Staging, SCHEMA_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    SolverFailure,
    VerificationFailure,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::SolverFailure => 2,
            Status::VerificationFailure => 3,
        }
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub status: Status,
    pub diagnostic: Option<String>,
    pub out_dir: PathBuf,
}

/// Errors before any solve could run; these map to exit code 1.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Setup(String),
    #[error("io: {0}")]
    Io(#[from] io::Error),
}

fn setup<E: std::fmt::Display>(e: E) -> RunError {
    RunError::Setup(e.to_string())
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    tool_version: &'static str,
    command: &'static str,
    seed: u64,
    status: Status,
    diagnostic: Option<String>,
    config: &'a RunConfig,
    config_text: String,
    result: T,
}

/// Runs one command, writing all artifacts to the configured output directory atomically.
pub fn run(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let out = cfg.out.clone().ok_or_else(|| setup("no output directory; pass --out or set `out`"))?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build().map_err(setup)?;
    let staging = Staging::begin(&out)?;
    let (status, diagnostic, result) = pool.install(|| match cfg.command {
        Command::InspectMetric => inspect_metric(cfg, &staging),
        Command::SolveGeodesic => solve_geodesic(cfg, &staging),
        Command::SweepEps => sweep(cfg, &staging),
        Command::Verify => verify(cfg, &staging),
        Command::SolveCy => solve_cy_cmd(cfg, &staging),
    })?;
    // the output location is not part of the result, so reruns elsewhere stay byte-identical
    let mut embedded = cfg.clone();
    embedded.out = None;
    let envelope = Envelope {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION"),
        command: cfg.command.name(),
        seed: cfg.seed,
        status,
        diagnostic: diagnostic.clone(),
        config: &embedded,
        config_text: embedded.emit(),
        result,
    };
    staging.json("report.json", &envelope)?;
    staging.text("config.txt", &embedded.emit())?;
    let out_dir = staging.commit()?;
    Ok(Outcome { status, diagnostic, out_dir })
}

type CmdResult = Result<(Status, Option<String>, serde_json::Value), RunError>;

fn domain(cfg: &RunConfig) -> Result<GridDomain, RunError> {
    let active = cfg.active.iter().map(|a| a - 1).collect();
    GridDomain::new(cfg.n, vec![cfg.period; 2 * cfg.n], cfg.resolution, active, cfg.scheme).map_err(setup)
}

fn sample(d: &GridDomain, src: &str) -> Result<Vec<f64>, RunError> {
    let e = Expr::parse(src).map_err(setup)?;
    Ok(d.sample(|x| e.eval(x, 0.0)))
}

fn load_checked(path: &Path, d: &GridDomain) -> Result<FieldFile, String> {
    let f = FieldFile::load(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let h = &f.header;
    if h.n != d.n()
        || h.periods != d.periods()
        || h.active_coords != d.active()
        || h.resolution != d.resolution()
        || h.scheme != d.scheme()
    {
        return Err(format!("{}: grid does not match the configured domain", path.display()));
    }
    Ok(f)
}

fn build_metric(spec: &MetricSpec, d: &GridDomain) -> Result<HermitianMetricField, RunError> {
    match spec {
        MetricSpec::Flat => Ok(HermitianMetricField::flat(d)),
        MetricSpec::Conformal(e) => Ok(HermitianMetricField::conformal(d, &sample(d, e)?)),
        MetricSpec::KahlerPerturbed(e) => HermitianMetricField::kahler_perturbed(d, &sample(d, e)?).map_err(setup),
        MetricSpec::BalancedRoot(e) => HermitianMetricField::balanced_root(d, &sample(d, e)?).map_err(setup),
        MetricSpec::File(p) => load_checked(p, d).map_err(setup)?.to_metric().map_err(setup),
    }
}

fn build_field(src: &FieldSource, d: &GridDomain) -> Result<Vec<f64>, RunError> {
    match src {
        FieldSource::Expr(e) => sample(d, e),
        FieldSource::File(p) => {
            let f = load_checked(p, d).map_err(setup)?;
            if f.header.kind != FieldKind::Scalar {
                return Err(setup(format!("{}: expected a scalar field", p.display())));
            }
            Ok(f.columns.into_iter().next().unwrap_or_default())
        }
    }
}

// ---------------------------------------------------------------- inspect-metric

fn inspect_metric(cfg: &RunConfig, st: &Staging) -> CmdResult {
    let d = domain(cfg)?;
    let g = build_metric(&cfg.metric, &d)?;
    let p = cfg.p.clamp(2, cfg.n);
    let x = g.compute_x(p).map_err(setup)?;
    let e = compute_e(&g, cfg.x_tol).map_err(setup)?;
    st.field("metric.kfld", &FieldFile::metric(&g))?;
    st.field("x.kfld", &FieldFile::scalar(&d, &x.direct))?;
    let result = json!({
        "min_eigenvalue": g.min_eigenvalue(),
        "balanced_residual": g.balanced_residual(),
        "torsion_sup": g.chern_torsion().sup_norm(),
        "torsion_antisymmetry": g.chern_torsion().antisymmetry_residual(),
        "x": {
            "p": p,
            "min": x.min(),
            "max": x.max(),
            "route_discrepancy": x.discrepancy,
            "nonpositive": x.max() <= cfg.x_tol,
        },
        "e_classification": e,
    });
    Ok((Status::Ok, None, result))
}

// ---------------------------------------------------------------- geodesic

fn geodesic_problem(cfg: &RunConfig) -> Result<ContinuityProblem, RunError> {
    let d = domain(cfg)?;
    let g = build_metric(&cfg.metric, &d)?;
    let phi0 = build_field(cfg.phi0.as_ref().expect("validated"), &d)?;
    let phi1 = build_field(cfg.phi1.as_ref().expect("validated"), &d)?;
    ContinuityProblem::new(g, cfg.p, cfg.epsilon, phi0, phi1).map_err(setup)
}

fn continuity_options(cfg: &RunConfig) -> ContinuityOptions {
    ContinuityOptions {
        newton: NewtonOptions { tol: cfg.tol, max_iter: cfg.max_iter, ..Default::default() },
        nt: cfg.nt,
        initial_step: cfg.s_step,
        min_step: cfg.min_step,
        x_tol: cfg.x_tol,
    }
}

fn search(cfg: &RunConfig) -> SubsolutionSearch {
    SubsolutionSearch { a_values: cfg.sub_a_values.clone(), b_values: cfg.sub_b_values.clone(), ..Default::default() }
}

/// Configuration errors exit with 1; everything raised by the iteration itself is a solver failure.
fn is_setup_error(e: &GeodesicError) -> bool {
    match e {
        GeodesicError::Config(_) | GeodesicError::XPositive { .. } | GeodesicError::Geometry(_) => true,
        GeodesicError::AtParameter { source, .. } => is_setup_error(source),
        _ => false,
    }
}

fn failure_point(e: &GeodesicError) -> Option<&SpaceTimePoint> {
    match e {
        GeodesicError::ConeExit { point, .. } | GeodesicError::Positivity { point, .. } => Some(point),
        GeodesicError::AtParameter { source, .. } => failure_point(source),
        GeodesicError::PathStuck { last, .. } => failure_point(last),
        _ => None,
    }
}

fn failure_iterate(e: &GeodesicError) -> Option<&SpaceTimeField> {
    match e {
        GeodesicError::ConeExit { iterate, .. }
        | GeodesicError::LineSearchFail { iterate, .. }
        | GeodesicError::MaxIterations { iterate, .. } => Some(iterate),
        GeodesicError::AtParameter { source, .. } => failure_iterate(source),
        GeodesicError::PathStuck { last, .. } => failure_iterate(last),
        _ => None,
    }
}

fn geodesic_failure(e: GeodesicError, st: &Staging) -> CmdResult {
    if is_setup_error(&e) {
        return Err(setup(e));
    }
    if let Some(it) = failure_iterate(&e) {
        st.field("failed_iterate.kfld", &FieldFile::space_time(it.domain(), it.levels()))?;
    }
    let result = json!({ "error": e.to_string(), "point": failure_point(&e) });
    Ok((Status::SolverFailure, Some(e.to_string()), result))
}

/// Estimates with barriers when a subsolution is found; the barrier failure is recorded otherwise.
fn estimates(phi: &SpaceTimeField, prob: &ContinuityProblem, cfg: &RunConfig) -> Result<(EstimateReport, Option<String>), RunError> {
    let barriers = construct_subsolution(prob, phi.nt(), &search(cfg));
    let note = barriers.as_ref().err().map(|e| e.to_string());
    let rep = estimate_report(phi, prob, barriers.as_ref().ok()).map_err(setup)?;
    Ok((rep, note))
}

/// ε beyond `epsilon_max` is treated as a failed solve rather than run.
fn epsilon_guard(cfg: &RunConfig, values: &[f64]) -> Option<CmdResult> {
    let eps = values.iter().copied().find(|e| *e > cfg.epsilon_max)?;
    let msg = format!(
        "ConeExit guard: epsilon = {eps:e} exceeds epsilon_max = {:e}; the solve was not attempted",
        cfg.epsilon_max
    );
    let result = json!({ "error": msg, "point": null, "epsilon": eps, "epsilon_max": cfg.epsilon_max });
    Some(Ok((Status::SolverFailure, Some(msg), result)))
}

fn solve_geodesic(cfg: &RunConfig, st: &Staging) -> CmdResult {
    if let Some(r) = epsilon_guard(cfg, &[cfg.epsilon]) {
        return r;
    }
    let prob = geodesic_problem(cfg)?;
    let opts = continuity_options(cfg);
    let (phi, trace) = match continuity_solve(&prob, &opts) {
        Ok(r) => r,
        Err(e) => return geodesic_failure(e, st),
    };
    let (est, barrier_note) = estimates(&phi, &prob, cfg)?;
    st.field("phi.kfld", &FieldFile::space_time(phi.domain(), phi.levels()))?;
    st.field("metric.kfld", &FieldFile::metric(prob.metric()))?;
    let result = json!({ "trace": trace, "estimates": est, "barrier_note": barrier_note });
    Ok((Status::Ok, None, result))
}

#[derive(Serialize)]
struct RatioRow {
    eps: f64,
    sup_phi_tt: f64,
    ratio_ddbar: f64,
    lambda1: f64,
    k: f64,
}

#[derive(Serialize)]
struct SweepRow {
    eps: f64,
    sup_phi_tt: f64,
    ratio_ddbar: f64,
    lambda1: f64,
    k: f64,
    sup_grad_sq: f64,
    sandwich_margin: Option<f64>,
    monotone_margin: f64,
    ellipticity_margin: f64,
    iterations: usize,
    final_residual: f64,
    warm_started: bool,
}

fn sweep_row(est: &EstimateReport, iterations: usize, final_residual: f64, warm_started: bool) -> SweepRow {
    SweepRow {
        eps: est.eps,
        sup_phi_tt: est.sup_phi_tt,
        ratio_ddbar: est.ratio_ddbar,
        lambda1: est.lambda1,
        k: est.k,
        sup_grad_sq: est.sup_grad_sq,
        sandwich_margin: est.sandwich.as_ref().map(|s| s.lower_margin.min(s.upper_margin.unwrap_or(f64::INFINITY))),
        monotone_margin: est.monotone_margin,
        ellipticity_margin: est.ellipticity_margin,
        iterations,
        final_residual,
        warm_started,
    }
}

pub fn sweep_field_name(k: usize) -> String {
    format!("phi_{k:03}.kfld")
}

fn sweep(cfg: &RunConfig, st: &Staging) -> CmdResult {
    if let Some(r) = epsilon_guard(cfg, &cfg.epsilon_values) {
        return r;
    }
    let prob = geodesic_problem(cfg)?;
    let opts = continuity_options(cfg);
    let entries = match sweep_eps(&prob, &cfg.epsilon_values, &opts) {
        Ok(r) => r,
        Err(e) => return geodesic_failure(e, st),
    };
    let mut rows = Vec::new();
    let mut details = Vec::new();
    for (k, e) in entries.iter().enumerate() {
        let p = prob.with_eps(e.eps).map_err(setup)?;
        let (est, note) = estimates(&e.field, &p, cfg)?;
        rows.push(sweep_row(&est, e.report.iterations, e.report.final_residual, e.warm_started));
        st.field(&sweep_field_name(k), &FieldFile::space_time(e.field.domain(), e.field.levels()))?;
        details.push(json!({
            "eps": e.eps,
            "field": sweep_field_name(k),
            "solver": e.report,
            "margins": e.margins,
            "warm_started": e.warm_started,
            "estimates": est,
            "barrier_note": note,
        }));
    }
    st.field("metric.kfld", &FieldFile::metric(prob.metric()))?;
    st.csv("eps_sweep.csv", &rows)?;
    let drift = |f: fn(&SweepRow) -> f64| {
        let (lo, hi) = rows.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if hi > 0.0 { (hi - lo) / hi } else { 0.0 }
    };
    let result = json!({
        "entries": details,
        "drift_phi_tt": drift(|r| r.sup_phi_tt),
        "drift_ddbar": drift(|r| r.ratio_ddbar),
    });
    Ok((Status::Ok, None, result))
}

// ---------------------------------------------------------------- verify

#[derive(Debug, Clone, Serialize)]
struct Check {
    name: String,
    field: Option<String>,
    pass: bool,
    value: f64,
    threshold: f64,
    location: Option<SpaceTimePoint>,
    detail: Option<String>,
}

fn failed_load(name: &str, err: String) -> Check {
    Check {
        name: "load".into(),
        field: Some(name.into()),
        pass: false,
        value: f64::NAN,
        threshold: 0.0,
        location: None,
        detail: Some(err),
    }
}

fn worst_point(phi: &SpaceTimeField, values: &[Vec<f64>], level_offset: usize) -> (f64, Option<SpaceTimePoint>) {
    let mut worst = (0.0_f64, None);
    for (m, row) in values.iter().enumerate() {
        for (i, v) in row.iter().enumerate() {
            // NaN counts as the worst value
            if !(v.abs() <= worst.0) {
                worst = (if v.is_nan() { f64::INFINITY } else { v.abs() }, Some((i, m + level_offset)));
            }
        }
    }
    (worst.0, worst.1.map(|(i, m)| phi.point(i, m)))
}

fn verify_solution(
    name: &str,
    phi: &SpaceTimeField,
    prob: &ContinuityProblem,
    solve_cfg: &RunConfig,
    cfg: &RunConfig,
) -> Result<(Vec<Check>, Option<EstimateReport>), RunError> {
    let mut checks = Vec::new();
    let mut push = |c: &str, pass: bool, value: f64, threshold: f64, location: Option<SpaceTimePoint>, detail: Option<String>| {
        checks.push(Check { name: c.into(), field: Some(name.into()), pass, value, threshold, location, detail })
    };
    let nt = phi.nt();
    let bdry: Vec<Vec<f64>> = vec![
        phi.phi0().iter().zip(prob.phi0()).map(|(a, b)| a - b).collect(),
        phi.phi1().iter().zip(prob.phi1()).map(|(a, b)| a - b).collect(),
    ];
    let (b0, l0) = worst_point(phi, &bdry[..1], 0);
    let (b1, l1) = worst_point(phi, &bdry[1..], nt);
    let (bw, bl) = if b1 > b0 { (b1, l1) } else { (b0, l0) };
    push("boundary", bw == 0.0, bw, 0.0, bl, None);

    let residual_tol = 10.0 * solve_cfg.tol;
    let res = operator_f(phi, prob).map_err(setup);
    match res {
        Ok(r) => {
            let (rw, rl) = worst_point(phi, &r, 1);
            push("residual", rw <= residual_tol, rw, residual_tol, rl, None);
        }
        Err(e) => push("residual", false, f64::NAN, residual_tol, None, Some(e.to_string())),
    }

    let coef = OperatorCoefficients::compute(phi, prob);
    let m = coef.margins(1.0);
    let cone = m.min_a.min(m.min_phi_tt).min(m.min_g);
    let loc = coef.first_cone_violation(1.0).map(|(i, m)| phi.point(i, m));
    push("cone", cone > 0.0, cone, 0.0, loc, Some(serde_json::to_string(&m).unwrap()));

    let est = match cone > 0.0 {
        true => {
            let barriers = construct_subsolution(prob, nt, &search(solve_cfg)).ok();
            let est = estimate_report(phi, prob, barriers.as_ref()).map_err(setup)?;
            if let Some(s) = &est.sandwich {
                let upper = s.upper_margin.unwrap_or(f64::INFINITY);
                let (v, at) = if upper < s.lower_margin {
                    (upper, s.upper_point.clone())
                } else {
                    (s.lower_margin, Some(s.lower_point.clone()))
                };
                push("sandwich", v >= -cfg.tol, v, -cfg.tol, at, None);
            }
            push("time_monotone", est.monotone_margin >= -cfg.tol, est.monotone_margin, -cfg.tol, None, None);
            push("ellipticity", est.ellipticity_margin > 0.0, est.ellipticity_margin, 0.0, None, None);
            Some(est)
        }
        false => None,
    };
    Ok((checks, est))
}

fn verify(cfg: &RunConfig, st: &Staging) -> CmdResult {
    let input = cfg.input.clone().expect("validated");
    let report_path = input.join("report.json");
    let text = std::fs::read_to_string(&report_path).map_err(|e| setup(format!("{}: {e}", report_path.display())))?;
    let report: serde_json::Value = serde_json::from_str(&text).map_err(|e| setup(format!("{}: {e}", report_path.display())))?;
    if report["schema_version"] != json!(SCHEMA_VERSION) {
        return Err(setup(format!("{}: unsupported schema version {}", report_path.display(), report["schema_version"])));
    }
    let solve_cfg = parse_config(report["config_text"].as_str().ok_or_else(|| setup("report lacks config_text"))?)
        .map_err(|e| setup(format!("embedded config: {e}")))?;
    if !matches!(solve_cfg.command, Command::SolveGeodesic | Command::SweepEps) {
        return Err(setup(format!("verify needs a geodesic run, found {}", solve_cfg.command.name())));
    }
    if report["status"] != json!(Status::Ok) {
        return Err(setup("the input run did not succeed; nothing to verify"));
    }
    let base = geodesic_problem(&solve_cfg)?;
    let targets: Vec<(String, f64)> = match solve_cfg.command {
        Command::SolveGeodesic => vec![("phi.kfld".into(), solve_cfg.epsilon)],
        _ => solve_cfg.epsilon_values.iter().enumerate().map(|(k, &e)| (sweep_field_name(k), e)).collect(),
    };
    let d = base.metric().domain().clone();
    let mut checks = Vec::new();
    let mut ratios = Vec::new();
    let mut energy = Vec::new();
    for (k, (name, eps)) in targets.iter().enumerate() {
        let prob = base.with_eps(*eps).map_err(setup)?;
        let file = match load_checked(&input.join(name), &d) {
            Ok(f) => f,
            Err(e) => {
                checks.push(failed_load(name, e));
                continue;
            }
        };
        let levels = match file.header.kind {
            FieldKind::SpaceTime { time_levels } if time_levels == solve_cfg.nt + 1 => file.columns,
            ref k => {
                checks.push(failed_load(name, format!("expected {} time levels, found {k:?}", solve_cfg.nt + 1)));
                continue;
            }
        };
        let phi = SpaceTimeField::from_levels(&d, levels);
        let (mut c, est) = verify_solution(name, &phi, &prob, &solve_cfg, cfg)?;
        let ok = c.iter().all(|c| c.pass);
        checks.append(&mut c);
        if let Some(est) = est {
            ratios.push(RatioRow {
                eps: est.eps,
                sup_phi_tt: est.sup_phi_tt,
                ratio_ddbar: est.ratio_ddbar,
                lambda1: est.lambda1,
                k: est.k,
            });
        }
        if ok && cfg.energy_probes > 0 {
            match energy_minimality_probe(&phi, &prob, cfg.energy_probes, &[1e-2, 5e-3], cfg.seed.wrapping_add(k as u64)) {
                Ok(p) => energy.push(json!({ "field": name, "probe": p })),
                Err(e) => energy.push(json!({ "field": name, "error": e.to_string() })),
            }
        }
    }
    let lemmas: Vec<CheckReport> = lemma_suites(
        [cfg.lemma_samples[0], cfg.lemma_samples[1], cfg.lemma_samples[2]],
        cfg.lemma_dim,
        cfg.seed,
    );
    st.csv("eps_ratios.csv", &ratios)?;
    let failed: Vec<&Check> = checks.iter().filter(|c| !c.pass).collect();
    let failed_lemmas: Vec<&CheckReport> = lemmas.iter().filter(|r| !r.pass).collect();
    let (status, diagnostic) = if failed.is_empty() && failed_lemmas.is_empty() {
        (Status::Ok, None)
    } else {
        let mut msg: Vec<String> = failed
            .iter()
            .map(|c| {
                let at = c.location.as_ref().map(|p| format!(" at level {} point {} coords {:?}", p.level, p.index, p.coords));
                format!(
                    "{} check failed on {}: value {:.3e} (threshold {:.1e}){}{}",
                    c.name,
                    c.field.as_deref().unwrap_or("-"),
                    c.value,
                    c.threshold,
                    at.unwrap_or_default(),
                    c.detail.as_ref().map(|d| format!(": {d}")).unwrap_or_default()
                )
            })
            .collect();
        msg.extend(failed_lemmas.iter().map(|r| format!("{}: {} of {} samples failed", r.name, r.failures, r.samples)));
        (Status::VerificationFailure, Some(msg.join("; ")))
    };
    let result = json!({
        "input": input,
        "checks": checks,
        "lemmas": lemmas,
        "energy": energy,
    });
    st.json("verify_report.json", &result)?;
    Ok((status, diagnostic, result))
}

// ---------------------------------------------------------------- solve-cy

fn is_cy_setup_error(e: &CyError) -> bool {
    matches!(
        e,
        CyError::Config(_) | CyError::DimensionTooSmall { .. } | CyError::NotBalanced { .. } | CyError::UnknownChi(_) | CyError::Geometry(_)
    )
}

fn solve_cy_cmd(cfg: &RunConfig, st: &Staging) -> CmdResult {
    let d = domain(cfg)?;
    let alpha = build_metric(&cfg.alpha_spec, &d)?;
    let omega = build_metric(&cfg.omega_spec, &d)?;
    let chi = chi_plugin(&cfg.chi).map_err(setup)?;
    let prob = match (&cfg.psi, &cfg.rho_expr) {
        (Some(src), _) => CyProblem::new(alpha, omega, build_field(src, &d)?, Arc::clone(&chi), cfg.balanced_tol),
        (None, Some(rho)) => CyProblem::from_rho(alpha, omega, &sample(&d, rho)?, Arc::clone(&chi), cfg.balanced_tol),
        (None, None) => unreachable!("validated"),
    }
    .map_err(setup)?;
    let opts = CyOptions { tol: cfg.tol, max_iter: cfg.max_iter, mean: cfg.mean, ..Default::default() };
    let astheno = prob.astheno().clone();
    let sweep_rows = if cfg.psi_amplitudes.is_empty() {
        None
    } else {
        Some(c0_sweep(&prob, prob.psi(), &cfg.psi_amplitudes, &opts))
    };
    if let Some(rows) = &sweep_rows {
        st.csv("psi_sweep.csv", rows)?;
    }
    let sol = match solve_cy(&prob, None, &opts) {
        Ok(s) => s,
        Err(e) if is_cy_setup_error(&e) => return Err(setup(e)),
        Err(e) => {
            let point = match &e {
                CyError::ConeExit { coords, margin, .. } => json!({ "coords": coords, "margin": margin }),
                _ => serde_json::Value::Null,
            };
            let result = json!({ "error": e.to_string(), "point": point, "astheno": astheno, "psi_sweep": sweep_rows });
            return Ok((Status::SolverFailure, Some(e.to_string()), result));
        }
    };
    let c0 = cy::c0_report(&sol.u, &prob);
    st.field("u.kfld", &FieldFile::scalar(&d, &sol.u))?;
    st.field("omega_tilde.kfld", &FieldFile::metric(&sol.tilde))?;
    st.field("omega_u.kfld", &FieldFile::metric(&sol.recovered.omega_u))?;
    let result = json!({
        "b": sol.b,
        "sup_abs_u": c0.sup_abs_u,
        "mean_u": c0.mean_u,
        "residual": sol.report.final_residual,
        "classification": sol.report.class,
        "solver": sol.report,
        "c0": c0,
        "recovered": {
            "balanced_residual": sol.recovered.balanced_residual,
            "cohomology_residual": sol.recovered.cohomology_residual,
            "ricci_error": sol.recovered.ricci_error,
            "min_eigenvalue": sol.recovered.omega_u.min_eigenvalue(),
        },
        "astheno": astheno,
        "chi": chi.name(),
        "psi_sweep": sweep_rows,
    });
    Ok((Status::Ok, None, result))
}
