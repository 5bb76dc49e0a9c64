mod args;
mod commands;
mod error;
mod layout;

use std::process::ExitCode;

use clap::Parser;
use log::{error, LevelFilter};

use args::{Cli, Command, ManifestCommand, ShiftCommand};
use error::CliError;
use layout::Layout;

fn run(cli: Cli) -> Result<(), CliError> {
    let g = &cli.global;
    if let Some(n) = g.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let layout = Layout::new(&g.root);
    let override_cfg = g.config.as_deref().map(|p| commands::load_config(Some(p))).transpose()?;
    let out = match &cli.command {
        Command::Generate(a) => {
            let cfg = override_cfg.unwrap_or_default();
            log::info!("config {} ({})", cfg.hash(), cfg.canonical_json());
            commands::generate(&layout, &cfg, a)?
        }
        Command::Shift(ShiftCommand::Domain { level }) => {
            commands::shift_domain(&layout, override_cfg.as_ref(), *level)?
        }
        Command::Shift(ShiftCommand::SelectionBias { p }) => {
            commands::shift_selection_bias(&layout, override_cfg.as_ref(), *p)?
        }
        Command::Verify(a) => {
            let outcome = commands::verify(&layout, a)?;
            commands::write_report(a.report.as_deref(), &outcome.report)?;
            if !outcome.failures.is_empty() {
                return Err(CliError::VerificationFailed(format!(
                    "verification failed:\n  {}",
                    outcome.failures.join("\n  ")
                )));
            }
            String::new()
        }
        Command::Manifest(ManifestCommand::Inspect { path, rows }) => commands::inspect(path, *rows)?,
    };
    print!("{out}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match (cli.global.quiet, cli.global.verbose) {
        (true, _) => LevelFilter::Error,
        (false, 0) => LevelFilter::Info,
        (false, 1) => LevelFilter::Debug,
        _ => LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::from(error::exit::OK),
        Err(e) => {
            error!("{e}");
            e.exit_code()
        }
    }
}
