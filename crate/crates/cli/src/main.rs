use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use btlab_cli::acceptance::run_with_threads;
use btlab_cli::{CliError, CliResult, ExperimentConfig, Kind, RawConfig};

#[derive(Parser)]
#[command(name = "btlab", version, about = "Brownian-time process experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo estimate checked against quadrature.
    Estimate(Common),
    /// Monte Carlo, quadrature and (for cosine data) the mode solve.
    Compare(Common),
    /// PDE residual of the quadrature field at the check times.
    Residual(Common),
    /// Pairwise KS tests of the variants' one-dimensional laws.
    MarginalTest(Common),
    /// The full acceptance suite.
    Acceptance(Common),
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Report path; the report goes to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = ["csv", "json"])]
    format: Option<String>,
    /// Worker threads for replicate execution.
    #[arg(long, env = "BTLAB_THREADS")]
    threads: Option<usize>,
    /// Configuration overrides, `key=value`.
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn build_config(kind: Kind, common: &Common) -> CliResult<ExperimentConfig> {
    let mut raw = match &common.config {
        Some(path) => RawConfig::from_file(path)?,
        None => RawConfig::default(),
    };
    let mut cli = RawConfig::default();
    cli.set("kind", kind.label());
    for pair in &common.overrides {
        cli.set_pair(pair)?;
    }
    if let Some(seed) = common.seed {
        cli.set("seed", &seed.to_string());
    }
    if let Some(out) = &common.out {
        cli.set("out", &out.to_string_lossy());
    }
    if let Some(format) = &common.format {
        cli.set("format", format);
    }
    raw.merge(cli);
    ExperimentConfig::from_raw(&raw)
}

fn run(cli: Cli) -> CliResult<bool> {
    let (kind, common) = match &cli.command {
        Command::Estimate(c) => (Kind::Estimate, c),
        Command::Compare(c) => (Kind::Compare, c),
        Command::Residual(c) => (Kind::Residual, c),
        Command::MarginalTest(c) => (Kind::MarginalTest, c),
        Command::Acceptance(c) => (Kind::Acceptance, c),
    };
    let cfg = build_config(kind, common)?;
    let threads = match common.threads {
        Some(0) => return Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => n,
        None => rayon::current_num_threads(),
    };
    let record = run_with_threads(&cfg, threads)?;
    match &cfg.out {
        Some(path) => {
            record.emit(cfg.format, path)?;
            eprintln!(
                "{}: {} rows written to {}",
                if record.passed() { "pass" } else { "FAIL" },
                record.rows.len(),
                path.display()
            );
        }
        None => {
            let text = record.render(cfg.format)?;
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|source| CliError::ReportWrite {
                    path: PathBuf::from("<stdout>"),
                    source,
                })?;
        }
    }
    Ok(record.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(true) => CliError::EXIT_PASS,
        Ok(false) => CliError::EXIT_VERDICT,
        Err(e) => {
            eprintln!("btlab: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
