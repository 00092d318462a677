use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use storychat_core::engine::EngineConfig;
use storychat_server::hub::Timing;
use storychat_server::{Options, Replay, Service};
use tracing_subscriber::EnvFilter;

/// Live chat negativity engine with narrative overlay updates.
#[derive(Parser, Debug)]
#[command(name = "storychat", version)]
struct Args {
    /// Engine config JSON. Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replay a logged session instead of reading a live source.
    #[arg(long)]
    replay: Option<PathBuf>,
    /// Replay speed multiplier.
    #[arg(long, default_value_t = 1.0, requires = "replay")]
    speed: f64,
    /// Listen address, overriding the config file.
    #[arg(long)]
    listen: Option<String>,
    /// Directory for session logs.
    #[arg(long, default_value = "sessions")]
    log_dir: PathBuf,
}

async fn run(args: Args) -> Result<(), Box<dyn std::error::Error>> {
    let config = match &args.config {
        Some(path) => EngineConfig::load(path)?,
        None => EngineConfig::default(),
    };
    let options = Options {
        config,
        listen: args.listen,
        log_dir: Some(args.log_dir),
        replay: args.replay.map(|path| Replay {
            path,
            speed: args.speed,
        }),
    };
    let mut service = Service::start(options).await?;
    if let Some(path) = &service.log_path {
        tracing::info!("session log: {}", path.display());
    }
    let replaying = service.hub.timing() == Timing::Logical;
    tokio::select! {
        done = service.replay_finished(), if replaying => {
            if let Some(Ok(n)) = done {
                tracing::info!("replay finished after {n} items; still serving, ctrl-c to stop");
            }
            tokio::signal::ctrl_c().await?;
        }
        r = tokio::signal::ctrl_c() => r?,
    }
    tracing::info!("shutting down");
    service.shutdown().await;
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")),
        )
        .init();
    let args = Args::parse();
    let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
    match runtime.block_on(run(args)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("storychat: {e}");
            ExitCode::FAILURE
        }
    }
}
