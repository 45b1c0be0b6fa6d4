use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use volform_cli::{parse_config_for, run, Command, RunConfig};

#[derive(Clone, Copy, ValueEnum)]
enum Cmd {
    InspectMetric,
    SolveGeodesic,
    SweepEps,
    Verify,
    SolveCy,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::InspectMetric => Command::InspectMetric,
            Cmd::SolveGeodesic => Command::SolveGeodesic,
            Cmd::SweepEps => Command::SweepEps,
            Cmd::Verify => Command::Verify,
            Cmd::SolveCy => Command::SolveCy,
        }
    }
}

/// Solvers and checks for degenerate geodesic and balanced Calabi-Yau problems on tori.
///
/// Exit codes: 0 success, 1 configuration or I/O error, 2 solver failure, 3 verification failure.
/// Every flag can also be set through the matching `VOLFORM_*` environment variable; flags win over
/// the environment, which wins over the config file.
#[derive(Parser)]
#[command(name = "volform", version)]
struct Cli {
    command: Cmd,
    /// Problem file (`key = value` lines).
    #[arg(long, env = "VOLFORM_CONFIG")]
    config: Option<PathBuf>,
    /// Output directory; must not exist or be empty.
    #[arg(long, env = "VOLFORM_OUT")]
    out: Option<PathBuf>,
    #[arg(long, env = "VOLFORM_SEED")]
    seed: Option<u64>,
    /// Solver residual tolerance (margin tolerance for `verify`).
    #[arg(long, env = "VOLFORM_TOL")]
    tol: Option<f64>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, env = "VOLFORM_THREADS")]
    threads: Option<usize>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    print_config: bool,
}

fn resolve(cli: &Cli) -> Result<RunConfig, String> {
    let command = Command::from(cli.command);
    let text = match &cli.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?,
        None => String::new(),
    };
    let source = cli.config.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "<defaults>".into());
    let mut cfg = parse_config_for(&text, Some(command)).map_err(|e| format!("{source}: {e}"))?;
    if cfg.command != command {
        return Err(format!("{source}: config is for `{}`, not `{}`", cfg.command.name(), command.name()));
    }
    if let Some(o) = &cli.out {
        cfg.out = Some(o.clone());
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(format!("--tol must be positive, got {t}"));
        }
        cfg.tol = t;
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cfg = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if cli.print_config {
        print!("{}", cfg.emit());
        return ExitCode::SUCCESS;
    }
    match run(&cfg) {
        Ok(out) => {
            let code = out.status.exit_code();
            match &out.diagnostic {
                Some(d) => eprintln!("{}: {d}", cfg.command.name()),
                None => eprintln!("{}: ok", cfg.command.name()),
            }
            eprintln!("artifacts in {}", out.out_dir.display());
            ExitCode::from(code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
