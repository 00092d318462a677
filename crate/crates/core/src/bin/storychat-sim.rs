use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use storychat_core::engine::EngineConfig;
use storychat_core::session_log::{SessionManifest, SessionWriter, StreamMeta};
use storychat_core::sim::{simulate_session, ScenarioReport, TrafficProfile};

/// Run a synthetic chat scenario through the engine on logical time.
#[derive(Parser, Debug)]
#[command(name = "storychat-sim", version)]
struct Args {
    /// Traffic profile JSON.
    #[arg(long)]
    profile: PathBuf,
    /// Engine config JSON. Defaults apply when omitted.
    #[arg(long)]
    engine_config: Option<PathBuf>,
    /// Where to write the scenario report.
    #[arg(long)]
    out: PathBuf,
    /// Session length; falls back to the profile's `duration_ms`, then 15 minutes.
    #[arg(long)]
    duration_ms: Option<u64>,
    /// Also write the full session log into this directory.
    #[arg(long)]
    log_dir: Option<PathBuf>,
}

fn run(args: Args) -> Result<(), Box<dyn std::error::Error>> {
    let profile: TrafficProfile = serde_json::from_str(&std::fs::read_to_string(&args.profile)?)?;
    let config = match &args.engine_config {
        Some(path) => EngineConfig::load(path)?,
        None => EngineConfig::default(),
    };
    let duration_ms = args
        .duration_ms
        .or(profile.duration_ms)
        .unwrap_or(15 * 60 * 1000);

    let (_, records) = simulate_session(&profile, &config, duration_ms)?;
    let report = ScenarioReport::from_records(profile.seed, duration_ms, config.mode, &records);
    std::fs::write(&args.out, report.to_json() + "\n")?;

    if let Some(dir) = &args.log_dir {
        let manifest = SessionManifest {
            session_id: format!("sim-{}", profile.seed),
            started_at: chrono::Utc::now().to_rfc3339(),
            mode: config.mode,
            configs: config.snapshot(),
            stream_meta: StreamMeta {
                channel: "#sim".into(),
                nominal_viewers: config.nominal_viewers,
            },
        };
        let mut writer = SessionWriter::create(dir, &manifest)?;
        for r in &records {
            writer.append(r)?;
        }
        writer.flush()?;
        if let Some(path) = writer.path() {
            eprintln!("session log: {}", path.display());
        }
    }

    let timeline: Vec<_> = report.timeline.iter().map(|s| s.token()).collect();
    eprintln!(
        "{} messages, {} negative, {} windows ({} exceeded); timeline: {}",
        report.counts.messages,
        report.counts.negative,
        report.counts.windows,
        report.counts.windows_exceeded,
        timeline.join(" -> ")
    );
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("storychat-sim: {e}");
            ExitCode::FAILURE
        }
    }
}
