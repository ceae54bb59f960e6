use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fsp_cli::commands::{self, CliError, CliResult};
use fsp_cli::config::{parse_config, ConfigError, RunConfig};
use fsp_cli::verify;

/// Normalized solutions of the fractional Schrodinger-Poisson problem on a
/// periodic box.
#[derive(Debug, Parser)]
#[command(name = "fsp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// key=value config file.
    config: PathBuf,
    /// Output directory; overrides the `out` key.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Derived constants and which hypotheses hold.
    Regime(Common),
    /// Regime-appropriate solver; exits 1 unless every solution converged.
    Solve(Common),
    /// Fiber energy along the dilation family of the initial field.
    FiberScan(Common),
    /// Sobolev estimate, bubble threshold margins and exponent fits.
    BubbleCheck(Common),
    /// Cartesian grid over sweep_mu, sweep_lambda and sweep_a.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Worker count; FSP_THREADS takes precedence.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Property suite; exits 1 on any failed check.
    Verify(Common),
}

fn load(common: &Common) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(&common.config).map_err(|e| ConfigError {
        key: "<file>".to_string(),
        message: format!("{}: {e}", common.config.display()),
    })?;
    let mut cfg = parse_config(&text)?;
    if let Some(out) = &common.out {
        cfg.out = out.clone();
    }
    Ok(cfg)
}

fn threads(flag: Option<usize>) -> CliResult<usize> {
    if let Ok(v) = std::env::var("FSP_THREADS") {
        return v.trim().parse::<usize>().ok().filter(|&n| n > 0).ok_or_else(|| {
            ConfigError { key: "FSP_THREADS".to_string(), message: format!("not a positive integer: {v:?}") }.into()
        });
    }
    Ok(flag.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())))
}

fn print_and_keep(out: &Path, name: &str, text: &str) -> CliResult<()> {
    print!("{text}");
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join(name), text)?;
    Ok(())
}

/// Exit status 0 on success, 1 on a failed invariant.
fn run(cli: Cli) -> CliResult<u8> {
    match cli.command {
        Command::Regime(c) => {
            let cfg = load(&c)?;
            print_and_keep(&cfg.out, "regime.txt", &commands::regime(&cfg)?)?;
            Ok(0)
        }
        Command::Solve(c) => {
            let cfg = load(&c)?;
            let (summary, ok) = commands::solve(&cfg, &cfg.out)?;
            print!("{summary}");
            Ok(u8::from(!ok))
        }
        Command::FiberScan(c) => {
            let cfg = load(&c)?;
            print!("{}", commands::fiber_scan_cmd(&cfg, &cfg.out)?);
            Ok(0)
        }
        Command::BubbleCheck(c) => {
            let cfg = load(&c)?;
            print!("{}", commands::bubble_check(&cfg, &cfg.out)?);
            Ok(0)
        }
        Command::Sweep { common, threads: t } => {
            let cfg = load(&common)?;
            let (summary, ok) = commands::sweep(&cfg, &cfg.out, threads(t)?)?;
            print!("{summary}");
            Ok(u8::from(!ok))
        }
        Command::Verify(c) => {
            let cfg = load(&c)?;
            let checks = verify::run(&cfg)?;
            let text: String = checks.iter().map(|k| k.line() + "\n").collect();
            print_and_keep(&cfg.out, "verify.txt", &text)?;
            Ok(u8::from(!checks.iter().all(verify::Check::pass)))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("fsp: {e}");
            let code: i32 = CliError::exit_code(&e);
            ExitCode::from(code as u8)
        }
    }
}
