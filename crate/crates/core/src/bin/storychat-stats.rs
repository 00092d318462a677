use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use serde::Serialize;
use storychat_core::analytics::{
    post_event_surge, session_stats, transition_timeline, SessionStats, StateInterval, SurgeReport,
    DEFAULT_SURGE_HORIZON_MS,
};
use storychat_core::engine::Mode;
use storychat_core::narrative::PlotState;
use storychat_core::session_log::{self, LabelOverlay};

/// Compute comment statistics, plot timeline and post-event surge from a session log.
#[derive(Parser, Debug)]
#[command(name = "storychat-stats", version)]
struct Args {
    /// Session log (`<session_id>.jsonl`).
    session: PathBuf,
    /// Manual label sidecar (`<session_id>.labels.jsonl`).
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Plot state whose entries anchor the surge metric, e.g. `ghost_present`.
    #[arg(long)]
    surge: Option<PlotState>,
    #[arg(long, default_value_t = DEFAULT_SURGE_HORIZON_MS)]
    horizon_ms: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct Output {
    session_id: String,
    mode: Mode,
    end_ms: u64,
    stats: SessionStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    timeline: Option<Vec<StateInterval>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    surge: Option<SurgeReport>,
}

fn run(args: Args) -> Result<(), Box<dyn std::error::Error>> {
    let session = session_log::load(&args.session)?;
    let overlay = args.labels.as_ref().map(LabelOverlay::load).transpose()?;
    let stats = session_stats(&session.records, overlay.as_ref())?;
    let timeline = match session.manifest.mode {
        Mode::WithStory => Some(transition_timeline(&session)?),
        Mode::WithoutStory => None,
    };
    let surge = args
        .surge
        .map(|state| post_event_surge(&session.records, overlay.as_ref(), state, args.horizon_ms))
        .transpose()?;
    let output = Output {
        session_id: session.manifest.session_id.clone(),
        mode: session.manifest.mode,
        end_ms: session.end_ms(),
        stats,
        timeline,
        surge,
    };
    std::fs::write(&args.out, serde_json::to_string_pretty(&output)? + "\n")?;
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("storychat-stats: {e}");
            ExitCode::FAILURE
        }
    }
}
