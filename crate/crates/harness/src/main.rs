use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use harness::{ExperimentConfig, Kind};

/// Runs one configured experiment and writes its CSV tables and manifest.
#[derive(Parser)]
#[command(name = "mk", version)]
struct Cli {
    /// Experiment kind; must match `kind` in the config when both are given.
    #[arg(required_unless_present = "list_kinds")]
    kind: Option<Kind>,
    #[arg(long, required_unless_present = "list_kinds")]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    list_kinds: bool,
}

fn run(cli: Cli) -> harness::Result<bool> {
    let path = cli.config.expect("clap enforces --config");
    let mut cfg = ExperimentConfig::load(&path)?;
    let kind = cli.kind.expect("clap enforces kind");
    match cfg.kind {
        Some(k) if k != kind => {
            return Err(harness::HarnessError::Config(format!("config is for {k}, not {kind}")));
        }
        _ => cfg.kind = Some(kind),
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let report = harness::run_experiment(&cfg)?;
    report.write(&cfg, &cli.out)?;
    for a in &report.assertions {
        println!("{} {:<52} {:>12.4e}  {}", if a.passed { "ok  " } else { "FAIL" }, a.name, a.value, a.bound);
    }
    let passed = report.passed();
    println!("{kind}: {} ({} assertions) -> {}", if passed { "passed" } else { "FAILED" }, report.assertions.len(), cli.out.display());
    Ok(passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.list_kinds {
        for k in Kind::ALL {
            println!("{:<16} {}", k.name(), k.summary());
        }
        return ExitCode::SUCCESS;
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("mk: {e}");
            ExitCode::from(2)
        }
    }
}
