//! `potts-magic`: ground states, mana scans, toy model, MERA predictions and
//! mean-field tables from one configuration document.
//!
//! Precedence, highest first: command-line flags, the `--config` document,
//! built-in defaults. The cache directory additionally honours
//! `POTTS_MAGIC_CACHE` (between the flag and the document).

mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Context;
use config::{uniform_thetas, RunConfig};
use error::CliError;
use potts_magic::experiments::Symmetrization;
use potts_magic::mps::CACHE_ENV;

#[derive(Parser, Debug)]
#[command(name = "potts-magic", version, about = "Mana of qutrit Potts ground states, MERA counting and mean-field tables")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Ground-state cache directory.
    #[arg(long, global = true, env = CACHE_ENV)]
    cache_dir: Option<PathBuf>,
    /// Directory for CSV/JSON outputs and the manifest.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Fail instead of running DMRG when a ground state is not cached.
    #[arg(long, global = true)]
    no_compute: bool,
    #[arg(long, global = true)]
    svd_cutoff: Option<f64>,
    #[arg(long, global = true)]
    max_bond: Option<usize>,
    #[arg(long, global = true)]
    energy_tol: Option<f64>,
    #[arg(long, short, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute (or load) a symmetry-broken ground state and cache it.
    Groundstate(GroundStateArgs),
    /// Mana density of centered blocks over a θ grid.
    ScanSubsystem(ScanArgs),
    /// Connected mana of two blocks against their separation.
    ScanTwopoint(ScanArgs),
    /// Two-qutrit toy model: mana against the magic weight α.
    Toy(ToyArgs),
    /// MERA gate counts and finite-size mana predictions.
    MeraPredict(MeraArgs),
    /// Mean-field tables and transition points per q.
    Meanfield(MeanFieldArgs),
    /// Fast invariant suite.
    Selftest(SelfTestArgs),
}

#[derive(Args, Debug)]
struct GroundStateArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Comma-separated longitudinal fields for a response sweep.
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
}

#[derive(Args, Debug, Clone)]
struct ScanArgs {
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated θ values.
    #[arg(long, value_delimiter = ',', conflicts_with = "theta_points")]
    thetas: Option<Vec<f64>>,
    /// Evenly spaced θ grid on [0, π/2] with this many points.
    #[arg(long)]
    theta_points: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    ells: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    dxs: Option<Vec<usize>>,
    #[arg(long)]
    base_site: Option<usize>,
    #[arg(long)]
    block: Option<usize>,
    #[arg(long, value_parser = parse_symmetrization)]
    symmetrization: Option<Symmetrization>,
}

#[derive(Args, Debug)]
struct ToyArgs {
    /// Evenly spaced α grid on [0, 1] with this many points.
    #[arg(long)]
    alpha_points: Option<usize>,
    /// Diagonal of ρ₁ in the clock basis, e.g. `0.5,0.25,0.25`.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    rho1_diag: Option<Vec<f64>>,
    #[arg(long)]
    width: Option<f64>,
}

#[derive(Args, Debug)]
struct MeraArgs {
    #[arg(long)]
    m_sq: Option<f64>,
    #[arg(long)]
    m_tri: Option<f64>,
    #[arg(long)]
    m_max: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    ells: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct MeanFieldArgs {
    #[arg(long, value_delimiter = ',')]
    qs: Option<Vec<usize>>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    theta_points: Option<usize>,
    #[arg(long)]
    alpha_resolution: Option<f64>,
}

#[derive(Args, Debug)]
struct SelfTestArgs {
    #[arg(long)]
    random_states: Option<usize>,
    /// Corrupt one phase-point operator before the algebra checks.
    #[arg(long)]
    inject_fault: bool,
}

fn parse_symmetrization(s: &str) -> Result<Symmetrization, String> {
    match s {
        "cat" => Ok(Symmetrization::Cat),
        "mixture" => Ok(Symmetrization::Mixture),
        _ => Err(format!("expected `cat` or `mixture`, got `{s}`")),
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn apply_scan(s: &mut config::ScanSection, a: ScanArgs) {
    set(&mut s.n, a.n);
    set(&mut s.thetas, a.thetas);
    set(&mut s.thetas, a.theta_points.map(uniform_thetas));
    set(&mut s.ells, a.ells);
    set(&mut s.dxs, a.dxs);
    if a.base_site.is_some() {
        s.base_site = a.base_site;
    }
    set(&mut s.block, a.block);
    set(&mut s.symmetrization, a.symmetrization);
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Groundstate(_) => "groundstate",
        Command::ScanSubsystem(_) => "scan-subsystem",
        Command::ScanTwopoint(_) => "scan-twopoint",
        Command::Toy(_) => "toy",
        Command::MeraPredict(_) => "mera-predict",
        Command::Meanfield(_) => "meanfield",
        Command::Selftest(_) => "selftest",
    }
}

/// Merge flags over the config document; also returns the selftest fault flag.
fn build_context(cli: Cli) -> Result<(Context, Command, bool), CliError> {
    let g = cli.global;
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let name = command_name(&cli.command);
    cfg.check_command(name)?;
    if g.out_dir.is_some() {
        cfg.out_dir = g.out_dir;
    }
    set(&mut cfg.seed, g.seed);
    if g.threads.is_some() {
        cfg.threads = g.threads;
    }
    if g.no_compute {
        cfg.allow_compute = Some(false);
    }
    set(&mut cfg.dmrg.svd_cutoff, g.svd_cutoff);
    set(&mut cfg.dmrg.max_bond, g.max_bond);
    set(&mut cfg.dmrg.energy_tol, g.energy_tol);
    if g.cache_dir.is_some() {
        cfg.cache_dir = g.cache_dir;
    }
    let cache_dir = cfg.cache_dir.clone().unwrap_or_else(|| PathBuf::from("cache"));

    let mut fault = false;
    match cli.command {
        Command::Groundstate(ref a) => {
            let gs = &mut cfg.groundstate;
            set(&mut gs.n, a.n);
            set(&mut gs.theta, a.theta);
            set(&mut gs.lambda, a.lambda);
            set(&mut gs.lambdas, a.lambdas.clone());
        }
        Command::ScanSubsystem(ref a) => apply_scan(&mut cfg.subsystem, a.clone()),
        Command::ScanTwopoint(ref a) => apply_scan(&mut cfg.twopoint, a.clone()),
        Command::Toy(ref a) => {
            let t = &mut cfg.toy;
            if let Some(k) = a.alpha_points {
                if k < 2 {
                    return Err(CliError::Validation("alpha_points must be at least 2".into()));
                }
                t.alphas = (0..k).map(|i| i as f64 / (k - 1) as f64).collect();
            }
            if let Some(d) = &a.rho1_diag {
                t.rho1_diag = [d[0], d[1], d[2]];
            }
            set(&mut t.width, a.width);
        }
        Command::MeraPredict(ref a) => {
            let m = &mut cfg.mera;
            set(&mut m.params.m_sq, a.m_sq);
            set(&mut m.params.m_tri, a.m_tri);
            set(&mut m.params.m_max, a.m_max);
            if a.nu.is_some() {
                m.params.nu = a.nu;
            }
            set(&mut m.k_max, a.k_max);
            set(&mut m.ells, a.ells.clone());
        }
        Command::Meanfield(ref a) => {
            let mf = &mut cfg.meanfield;
            set(&mut mf.qs, a.qs.clone());
            set(&mut mf.k, a.k);
            set(&mut mf.thetas, a.theta_points.map(uniform_thetas));
            set(&mut mf.alpha_resolution, a.alpha_resolution);
        }
        Command::Selftest(ref a) => {
            set(&mut cfg.selftest.random_states, a.random_states);
            fault = a.inject_fault;
        }
    }
    let quiet = g.quiet;
    Ok((Context { config: cfg, cache_dir, quiet }, cli.command, fault))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (ctx, command, fault) = build_context(cli)?;
    if let Some(t) = ctx.config.threads {
        if t == 0 {
            return Err(CliError::Validation("threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Numerical(format!("thread pool: {e}")))?;
    }
    match command {
        Command::Groundstate(_) => commands::cmd_groundstate(&ctx),
        Command::ScanSubsystem(_) => commands::cmd_subsystem_scan(&ctx),
        Command::ScanTwopoint(_) => commands::cmd_twopoint(&ctx),
        Command::Toy(_) => commands::cmd_toy(&ctx),
        Command::MeraPredict(_) => commands::cmd_mera_predict(&ctx),
        Command::Meanfield(_) => commands::cmd_meanfield(&ctx),
        Command::Selftest(_) => commands::cmd_selftest(&ctx, fault).map(|_| ()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { error::EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("potts-magic: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
