use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use varcond::cli::{self, RunConfig};
use varcond::Result;

/// Conditioning and CG convergence experiments for 1D-Var with correlated observation errors.
#[derive(Parser)]
#[command(name = "varcond", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues of S, κ(S), κ(S_u), χ and the bounds.
    Spectrum(Common),
    /// χ over (M_o, D_o) with predicted and exact minima.
    ChiMap(Common),
    /// Monte-Carlo convergence curves per assimilation R.
    Convergence(Common),
    /// Optimal variance-inflation factor search.
    Inflation(Common),
    /// Condition number against its upper bounds over L̃_o/L̃_b.
    Bounds(Common),
    /// Matched length-scale table.
    Lengthscales(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; defaults describe the paper geometry and scenario 1.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out_dir`; default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all logical cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Override the ensemble size.
    #[arg(long)]
    realizations: Option<usize>,
}

fn load(c: &Common) -> Result<(RunConfig, PathBuf)> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::from_path(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(w) = c.workers {
        cfg.workers = Some(w);
    }
    if let Some(r) = c.realizations {
        cfg.ensemble.realizations = r;
    }
    let out = c.out.clone().or_else(|| cfg.out_dir.as_ref().map(PathBuf::from)).unwrap_or_else(|| "out".into());
    cfg.out_dir = Some(out.display().to_string());
    cfg.validate()?;
    Ok((cfg, out))
}

fn run(cmd: Command) -> Result<()> {
    let (common, f): (_, fn(&RunConfig) -> Result<cli::Outputs>) = match &cmd {
        Command::Spectrum(c) => (c, cli::cmd_spectrum),
        Command::ChiMap(c) => (c, cli::cmd_chi_map),
        Command::Convergence(c) => (c, cli::cmd_convergence),
        Command::Inflation(c) => (c, cli::cmd_inflation),
        Command::Bounds(c) => (c, cli::cmd_bounds),
        Command::Lengthscales(c) => (c, cli::cmd_lengthscales),
    };
    let (cfg, out) = load(common)?;
    let outputs = varcond::experiment::with_workers(cfg.workers, || f(&cfg))??;
    for p in cli::write_outputs(&out, &cfg, outputs)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Cli::parse();
    match run(args.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", cli::error_line(&e));
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}

