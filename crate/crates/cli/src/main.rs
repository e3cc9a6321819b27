use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use roughflow::harness::{self, Scenario, MANIFEST_NAME};

/// Run a rough-path experiment described by a TOML configuration.
///
/// Exit codes: 0 success, 2 configuration error, 3 numerical abort, 4 I/O failure.
#[derive(Debug, Parser)]
#[command(name = "roughflow", version)]
struct Cli {
    /// One of lift, rde, burgers, camassa_holm, euler2d, wong_zakai, audit.
    #[arg(value_parser = parse_scenario)]
    scenario: Scenario,

    #[arg(long)]
    config: PathBuf,

    /// Output directory; overrides ROUGHFLOW_OUT and the configuration.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Driver seed; overrides the configuration.
    #[arg(long)]
    seed: Option<u64>,

    /// Mollification levels for wong_zakai, refinement levels otherwise.
    #[arg(long)]
    levels: Option<usize>,
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    s.parse().map_err(|e: roughflow::Error| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = harness::load_config(&cli.config)
        .and_then(|cfg| cfg.with_overrides(Some(cli.scenario), cli.seed, cli.levels))
        .and_then(|cfg| {
            let dir = harness::output_dir(cli.out.as_deref(), &cfg);
            harness::run(&cfg, &dir).map(|m| (m, dir))
        });
    match result {
        Ok((manifest, dir)) => {
            println!("{} finished in {:.2} s", manifest.scenario, manifest.wall_clock_seconds);
            for (name, value) in &manifest.residuals {
                println!("  {name} = {value}");
            }
            println!("{} files, manifest {}", manifest.files.len(), dir.join(MANIFEST_NAME).display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
