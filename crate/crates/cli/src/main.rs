use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nvcavity_cli::{parse_config, run, CliError, Format, Mode, RunOptions};

#[derive(Debug, Parser)]
#[command(
    name = "nvcavity",
    version,
    about = "Cavity-coupled NV ensemble magnetometer simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory; overrides [output].dir.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (1 runs sequentially). Defaults to all cores.
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
    jobs: Option<u64>,
    /// Exit nonzero if any grid point failed.
    #[arg(long)]
    strict: bool,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run whatever `mode` the configuration names.
    Run(Common),
    Odmr(Common),
    Spectrum(Common),
    Homodyne(Common),
    Eigenscan(Common),
    Sensitivity(Common),
    Sweep(Common),
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (mode, common) = match cli.command {
        Command::Run(c) => (None, c),
        Command::Odmr(c) => (Some(Mode::Odmr), c),
        Command::Spectrum(c) => (Some(Mode::Spectrum), c),
        Command::Homodyne(c) => (Some(Mode::Homodyne), c),
        Command::Eigenscan(c) => (Some(Mode::Eigenscan), c),
        Command::Sensitivity(c) => (Some(Mode::Sensitivity), c),
        Command::Sweep(c) => (Some(Mode::Sweep), c),
    };
    let mut cfg = parse_config(&common.config)?;
    if let Some(m) = mode {
        cfg.mode = m;
        cfg.validate()?;
    }
    let opts = RunOptions {
        out: common.out,
        jobs: common.jobs.map(|n| n as usize),
        strict: common.strict,
        format: common.format,
        base_dir: common.config.parent().map(|p| p.to_path_buf()),
    };
    let summary = run(&cfg, &opts)?;
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    if summary.failures > 0 {
        eprintln!("{} grid point(s) failed", summary.failures);
    }
    for f in &summary.files {
        println!("{}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
