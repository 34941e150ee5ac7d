use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use pshflat::run::{run, Command, RunConfig};
use pshflat::scalar::Precision;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Cmd {
    Flatten,
    Order,
    SolveRadial,
    CheckPsc,
    CheckTr,
    MapCheck,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Flatten => Command::Flatten,
            Cmd::Order => Command::Order,
            Cmd::SolveRadial => Command::SolveRadial,
            Cmd::CheckPsc => Command::CheckPsc,
            Cmd::CheckTr => Command::CheckTr,
            Cmd::MapCheck => Command::MapCheck,
        }
    }
}

/// Plurisubharmonic defining functions, radial Monge-Ampere solutions and
/// holomorphic-map checks. Writes report.json (and CSV tables) to --out.
///
/// Exit status: 0 all certificates pass, 2 a certificate fails, 1 error.
#[derive(Debug, Parser)]
#[command(name = "pshflat", version)]
struct Cli {
    /// Pipeline to run; may also come from the config file.
    command: Option<Cmd>,
    /// Domain: ball, levi-flat, ellipsoid:a,b, perturbed-ball:eps:expr, or an expression.
    #[arg(long)]
    domain: Option<String>,
    /// Map: identity:n, unitary:n:seed, ball-auto:..., mobius:..., linear:...
    #[arg(long)]
    map: Option<String>,
    /// Radial profile: const:c, poly:c0,c1,..., expr:f(t).
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    /// Target vanishing order.
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    jet_order: Option<usize>,
    #[arg(long)]
    collar: Option<f64>,
    #[arg(long)]
    ladder_t0: Option<f64>,
    #[arg(long)]
    ladder_rungs: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    /// double or dd; by default chosen per level.
    #[arg(long)]
    precision: Option<Precision>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: current directory).
    #[arg(long)]
    out: Option<PathBuf>,
    /// TOML file with the same keys; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let flags = RunConfig {
        command: cli.command.map(Into::into),
        domain: cli.domain,
        map: cli.map,
        profile: cli.profile,
        n: cli.n,
        q: cli.q,
        jet_order: cli.jet_order,
        collar: cli.collar,
        ladder_t0: cli.ladder_t0,
        ladder_rungs: cli.ladder_rungs,
        samples: cli.samples,
        precision: cli.precision,
        seed: cli.seed,
        out: cli.out,
    };
    let config = match cli.config {
        Some(path) => match RunConfig::load(&path) {
            Ok(file) => file.merged(flags),
            Err(e) => {
                eprintln!("error: {}: {e}", path.display());
                return ExitCode::from(1);
            }
        },
        None => flags,
    };
    let outcome = run(&config);
    let dir = config.out.clone().unwrap_or_else(|| PathBuf::from("."));
    if let Err(e) = outcome.write(&dir) {
        eprintln!("error: cannot write to {}: {e}", dir.display());
        return ExitCode::from(1);
    }
    let report = &outcome.report;
    if let Some(e) = &report.error {
        eprintln!("error: {e}");
    }
    for c in &report.certificates {
        println!(
            "{} {} = {:e} ({})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.criterion
        );
    }
    ExitCode::from(outcome.exit_code() as u8)
}
