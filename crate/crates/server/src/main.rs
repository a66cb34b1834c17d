//! `saathi` command line: run the service, build analytics reports, lint
//! cultural profiles.

use std::path::PathBuf;
use std::process::ExitCode;

use chrono_tz::Tz;
use clap::{Parser, Subcommand};
use saathi_core::cultural::ActionPlan;
use saathi_core::logstore::read_logs;
use saathi_core::stack::{build_engine, load_profile, StackConfig};
use saathi_server::config::DEFAULT_ZONE;
use saathi_server::report::analytics_bundle;
use saathi_server::{router, AppState, ServerConfig};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "saathi", version, about = "Culturally configurable health chat service")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        /// Use the offline mock language model.
        #[arg(long)]
        mock: bool,
    },
    /// Write topic, type, hourly and length reports for a log file.
    Analytics {
        #[arg(long)]
        logs: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ZONE)]
        zone: Tz,
    },
    /// Cultural profile tools.
    Profile {
        #[command(subcommand)]
        command: ProfileCommand,
    },
}

#[derive(Subcommand)]
enum ProfileCommand {
    /// Validate a profile and print the compiled action plan.
    Lint { path: PathBuf },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let result = match Cli::parse().command {
        Command::Serve { mock } => serve(mock),
        Command::Analytics { logs, report, zone } => analytics(&logs, &report, zone),
        Command::Profile { command: ProfileCommand::Lint { path } } => lint(&path),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

type AnyError = Box<dyn std::error::Error>;

fn serve(mock: bool) -> Result<(), AnyError> {
    let cfg = ServerConfig::from_env()?;
    let engine = build_engine(&StackConfig::from_env(mock))?;
    let state = AppState::new(engine, &cfg)?;
    let app = router(state, &cfg);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&cfg.bind_addr).await?;
        tracing::info!(addr = %listener.local_addr()?, mock, data_dir = %cfg.data_dir.display(), "listening");
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}

fn analytics(logs: &PathBuf, report: &PathBuf, zone: Tz) -> Result<(), AnyError> {
    let files = analytics_bundle(read_logs(logs)?, zone)?;
    std::fs::create_dir_all(report)?;
    for (name, body) in files {
        let path = report.join(name);
        std::fs::write(&path, body)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn lint(path: &PathBuf) -> Result<(), AnyError> {
    let profile = load_profile(Some(path))?;
    let plan = ActionPlan::compile(&profile);
    println!("{}: {} setting(s), {} action(s)", path.display(), profile.settings().count(), plan.actions.len());
    print!("{}", plan.render());
    Ok(())
}
