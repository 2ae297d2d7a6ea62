mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::commands::{RunContext, Status};
use crate::config::{ConfigError, EnsembleKind, MeanfieldMode, RunConfig, Species};
use crate::output::Outputs;

const EXIT_OPERATIONAL: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_NON_CONVERGED: u8 = 4;
const EXIT_OBSTRUCTED: u8 = 5;
const EXIT_NO_CROSSING: u8 = 6;

#[derive(Parser, Debug)]
#[command(name = "curvgas", version, about = "Logarithmic gases and prescribed curvature")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; overrides CURVGAS_THREADS and the config.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Suppress progress messages.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Option<Cmd>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Metropolis sampling of the N-body ensemble.
    Sample(SampleArgs),
    /// Wang–Landau density of states.
    Dos(DosArgs),
    /// Single mean-field solve.
    Meanfield(MeanfieldArgs),
    /// Mean-field caloric curve.
    Caloric(EnergyArgs),
    /// Neutral two-species mean-field solves on the disk.
    TwoSpecies(TwoSpeciesArgs),
    /// Prescribed curvature via the critical-temperature scan.
    Nirenberg(EnergyArgs),
    /// Radial Liouville equation in the plane.
    Radial(RadialArgs),
    /// Law of large numbers check against the mean-field maximizer.
    LlnVerify(LlnArgs),
    /// Integral curvature against inverse temperature.
    KappaBeta(KappaBetaArgs),
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[arg(long, value_enum)]
    ensemble: Option<EnsembleKind>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    chains: Option<usize>,
}

#[derive(Args, Debug)]
struct DosArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long, value_enum)]
    species: Option<Species>,
}

#[derive(Args, Debug)]
struct MeanfieldArgs {
    #[arg(long, value_enum)]
    mode: Option<MeanfieldMode>,
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    eps: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Args, Debug)]
struct EnergyArgs {
    #[arg(long, allow_hyphen_values = true)]
    eps_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    eps_max: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
}

#[derive(Args, Debug)]
struct TwoSpeciesArgs {
    #[arg(long, num_args = 1.., allow_hyphen_values = true)]
    eps: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
}

#[derive(Args, Debug)]
struct RadialArgs {
    #[arg(long, allow_hyphen_values = true)]
    u0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    kappa: Option<f64>,
    #[arg(long)]
    r_max: Option<f64>,
}

#[derive(Args, Debug)]
struct LlnArgs {
    #[arg(long, num_args = 1..)]
    n: Option<Vec<usize>>,
    #[arg(long, allow_hyphen_values = true)]
    eps: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Args, Debug)]
struct KappaBetaArgs {
    #[arg(long, num_args = 1.., allow_hyphen_values = true)]
    beta: Option<Vec<f64>>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn apply_overrides(cfg: &mut RunConfig, cli: Cli) -> bool {
    set(&mut cfg.seed, cli.seed);
    set(&mut cfg.out, cli.out);
    let Some(cmd) = cli.command else {
        return cli.quiet;
    };
    use config::Command as C;
    cfg.command = Some(match cmd {
        Cmd::Sample(a) => {
            let e = &mut cfg.ensemble;
            set(&mut e.kind, a.ensemble);
            set(&mut e.beta, a.beta);
            set(&mut e.eps, a.eps);
            set(&mut e.sigma, a.sigma);
            set(&mut e.n, a.n);
            set(&mut e.steps, a.steps);
            set(&mut e.thin, a.thin);
            set(&mut e.chains, a.chains);
            C::Sample
        }
        Cmd::Dos(a) => {
            set(&mut cfg.dos.n, a.n);
            set(&mut cfg.dos.bins, a.bins);
            set(&mut cfg.dos.species, a.species);
            C::Dos
        }
        Cmd::Meanfield(a) => {
            let m = &mut cfg.meanfield;
            set(&mut m.mode, a.mode);
            set(&mut m.beta, a.beta);
            set(&mut m.eps, a.eps);
            set(&mut m.sigma, a.sigma);
            C::Meanfield
        }
        Cmd::Caloric(a) => {
            energy_overrides(&mut cfg.caloric, a);
            C::Caloric
        }
        Cmd::Nirenberg(a) => {
            energy_overrides(&mut cfg.nirenberg, a);
            C::Nirenberg
        }
        Cmd::TwoSpecies(a) => {
            set(&mut cfg.two_species.eps, a.eps);
            if a.beta.is_some() {
                cfg.two_species.beta = a.beta;
            }
            C::TwoSpecies
        }
        Cmd::Radial(a) => {
            if a.u0.is_some() {
                cfg.radial.u0 = a.u0;
                cfg.radial.kappa = None;
            }
            if a.kappa.is_some() {
                cfg.radial.kappa = a.kappa;
            }
            set(&mut cfg.radial.r_max, a.r_max);
            C::Radial
        }
        Cmd::LlnVerify(a) => {
            set(&mut cfg.lln.n_values, a.n);
            set(&mut cfg.lln.eps, a.eps);
            set(&mut cfg.lln.sigma, a.sigma);
            set(&mut cfg.lln.steps, a.steps);
            C::LlnVerify
        }
        Cmd::KappaBeta(a) => {
            set(&mut cfg.kappa_beta.betas, a.beta);
            C::KappaBeta
        }
    });
    cli.quiet
}

fn energy_overrides(g: &mut config::EnergyGrid, a: EnergyArgs) {
    if a.eps_min.is_some() || a.eps_max.is_some() || a.points.is_some() {
        g.eps = None;
    }
    if a.eps_min.is_some() {
        g.eps_min = a.eps_min;
    }
    if a.eps_max.is_some() {
        g.eps_max = a.eps_max;
    }
    if a.points.is_some() {
        g.points = a.points;
    }
}

/// Thread count: `--threads`, then `CURVGAS_THREADS`, then the config.
fn thread_count(flag: Option<usize>, cfg: Option<usize>) -> Result<Option<usize>, ConfigError> {
    if flag.is_some() {
        return Ok(flag);
    }
    if let Ok(v) = std::env::var("CURVGAS_THREADS") {
        if !v.trim().is_empty() {
            return match v.trim().parse::<usize>() {
                Ok(n) if n > 0 => Ok(Some(n)),
                _ => Err(ConfigError {
                    key: "CURVGAS_THREADS".into(),
                    reason: format!("expected a positive integer, got `{v}`"),
                }),
            };
        }
    }
    Ok(cfg)
}

/// Error kind and exit code for a failed run.
fn classify(err: &anyhow::Error) -> (&'static str, u8) {
    use curvgas::Error as E;
    match err.chain().find_map(|e| e.downcast_ref::<curvgas::Error>()) {
        Some(E::Infeasible { .. }) => ("infeasible_energy", EXIT_INFEASIBLE),
        Some(E::NonConvergence { .. }) => ("non_converged", EXIT_NON_CONVERGED),
        Some(E::Concentration { .. }) => ("concentration", EXIT_NON_CONVERGED),
        Some(E::LineSearch) => ("non_converged", EXIT_NON_CONVERGED),
        Some(E::WindowNotVisited { .. }) => ("window_not_visited", EXIT_NON_CONVERGED),
        Some(E::KappaOutOfRange { .. }) => ("kappa_out_of_range", EXIT_CONFIG),
        Some(E::InvalidArgument { .. }) => ("invalid_argument", EXIT_CONFIG),
        Some(E::Unsupported(_)) => ("unsupported", EXIT_CONFIG),
        Some(E::NotBracketed { .. }) => ("non_converged", EXIT_NON_CONVERGED),
        _ => ("operational", EXIT_OPERATIONAL),
    }
}

fn status_code(s: Status) -> (&'static str, u8) {
    match s {
        Status::Ok => ("ok", 0),
        Status::NonConverged => ("non_converged", EXIT_NON_CONVERGED),
        Status::Obstructed => ("obstructed", EXIT_OBSTRUCTED),
        Status::NoCrossing => ("no_crossing", EXIT_NO_CROSSING),
    }
}

fn config_failure(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("{}", json!({ "error": "invalid_config", "message": msg.to_string() }));
    ExitCode::from(EXIT_CONFIG)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(p) => match RunConfig::load(p) {
            Ok(c) => c,
            Err(e) => return config_failure(format!("{e:#}")),
        },
        None => RunConfig::default(),
    };
    let threads_flag = cli.threads;
    let quiet = apply_overrides(&mut cfg, cli);
    cfg.resolve();
    if let Err(e) = cfg.validate() {
        return config_failure(e);
    }
    let threads = match thread_count(threads_flag, cfg.threads) {
        Ok(t) => t,
        Err(e) => return config_failure(e),
    };
    if let Some(t) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("{}", json!({ "error": "operational", "message": e.to_string() }));
            return ExitCode::from(EXIT_OPERATIONAL);
        }
    }
    let threads_used = rayon::current_num_threads();

    let mut out = match Outputs::create(&cfg.out) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("{}", json!({ "error": "operational", "message": format!("{e:#}") }));
            return ExitCode::from(EXIT_OPERATIONAL);
        }
    };
    let command = cfg.command.expect("validated");
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let clock = Instant::now();
    out.event("start", json!({ "command": command.name(), "seed": cfg.seed, "threads": threads_used }));

    let result = commands::run(&mut RunContext {
        cfg: &cfg,
        out: &mut out,
        quiet,
    });
    let (status, code, error) = match &result {
        Ok(s) => {
            let (name, code) = status_code(*s);
            (name, code, None)
        }
        Err(e) => {
            let (kind, code) = classify(e);
            let record = json!({ "error": kind, "message": format!("{e:#}") });
            eprintln!("{record}");
            (kind, code, Some(record))
        }
    };
    let wall = clock.elapsed().as_secs_f64();
    out.event("finish", json!({ "status": status, "exit_code": code, "wall_clock_seconds": wall }));
    let finalize = (|| -> anyhow::Result<()> {
        if let Some(rec) = &error {
            out.json("error.json", rec)?;
        }
        out.flush_events()?;
        out.write_manifest(&json!({
            "tool": "curvgas",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command.name(),
            "config": cfg,
            "config_hash": cfg.content_hash(),
            "seed": cfg.seed,
            "threads": threads_used,
            "started_unix": started,
            "wall_clock_seconds": wall,
            "status": if code == 0 { "ok" } else { "error" },
            "outcome": status,
            "exit_code": code,
            "error": error,
            "outputs": out.files(),
        }))
    })();
    if let Err(e) = finalize {
        eprintln!("{}", json!({ "error": "operational", "message": format!("{e:#}") }));
        return ExitCode::from(EXIT_OPERATIONAL);
    }
    if !quiet && code == 0 {
        eprintln!("curvgas: wrote {} files to {}", out.files().len(), out.dir().display());
    }
    ExitCode::from(code)
}
