//! Live engine service.
//!
//! One [`hub::Hub`] task owns the pipeline. Feeds (IRC, the participant
//! room, replay, synthetic traffic) and the HTTP admin API send it commands;
//! it logs every record and broadcasts client updates to `/ws` subscribers.

pub mod feeds;
pub mod http;
pub mod hub;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use storychat_core::engine::{EngineConfig, EngineConfigError, Pipeline};
use storychat_core::ingest::{IngestError, SessionClock, SourceMode};
use storychat_core::session_log::{
    LogError, LogRecord, SessionManifest, SessionWriter, StreamMeta,
};
use storychat_core::sim::TrafficProfile;
use tokio::net::TcpListener;
use tokio::task::JoinHandle;

use crate::http::Access;
use crate::hub::{Hub, Timing};

/// Default length of a live synthetic feed.
pub const SYNTHETIC_DURATION_MS: u64 = 15 * 60 * 1000;

#[derive(Debug, thiserror::Error)]
pub enum StartError {
    #[error(transparent)]
    Config(#[from] EngineConfigError),
    #[error(transparent)]
    Source(#[from] IngestError),
    #[error("binding {addr}: {source}")]
    Bind {
        addr: String,
        source: std::io::Error,
    },
    #[error("session log: {0}")]
    Log(#[from] LogError),
    #[error("synthetic profile: {0}")]
    Profile(String),
}

#[derive(Debug, Clone)]
pub struct Replay {
    pub path: PathBuf,
    pub speed: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Options {
    pub config: EngineConfig,
    /// Overrides `config.listen_address`.
    pub listen: Option<String>,
    /// No session log is written when absent.
    pub log_dir: Option<PathBuf>,
    /// Overrides a `ReplayFile` source.
    pub replay: Option<Replay>,
}

/// A running service.
pub struct Service {
    pub addr: SocketAddr,
    pub room_addr: Option<SocketAddr>,
    pub hub: Hub,
    pub log_path: Option<PathBuf>,
    replay: Option<JoinHandle<Result<usize, LogError>>>,
    tasks: Vec<JoinHandle<()>>,
}

fn new_session_id() -> String {
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
    let tag = uuid::Uuid::new_v4().simple().to_string();
    format!("{stamp}-{}", &tag[..8])
}

async fn bind(addr: &str) -> Result<TcpListener, StartError> {
    TcpListener::bind(addr)
        .await
        .map_err(|source| StartError::Bind {
            addr: addr.to_owned(),
            source,
        })
}

impl Service {
    pub async fn start(options: Options) -> Result<Service, StartError> {
        let config = options.config;
        config.validate()?;

        let replay = match (&options.replay, config.source.mode) {
            (Some(r), _) => Some(r.clone()),
            (None, SourceMode::ReplayFile) => Some(Replay {
                path: config.source.endpoint.clone().into(),
                speed: 1.0,
            }),
            _ => None,
        };
        // a replay reproduces the logged session, so it runs under the logged configs
        let (records, pipeline, manifest_base): (Vec<LogRecord>, Pipeline, _) = match &replay {
            Some(r) => {
                storychat_core::session_log::check_speed(r.speed)?;
                let session = feeds::load_for_replay(&r.path)?;
                let m = &session.manifest;
                let pipeline =
                    Pipeline::new(m.configs.clone(), m.mode, m.stream_meta.nominal_viewers);
                let base = (m.mode, m.configs.clone(), m.stream_meta.clone());
                (session.records, pipeline, base)
            }
            None => {
                let meta = StreamMeta {
                    channel: config.source.channel.clone(),
                    nominal_viewers: config.nominal_viewers,
                };
                (
                    Vec::new(),
                    Pipeline::from_config(&config),
                    (config.mode, config.snapshot(), meta),
                )
            }
        };

        let writer = match &options.log_dir {
            Some(dir) => {
                let (mode, configs, stream_meta) = manifest_base;
                let manifest = SessionManifest {
                    session_id: new_session_id(),
                    started_at: chrono::Utc::now().to_rfc3339(),
                    mode,
                    configs,
                    stream_meta,
                };
                Some(SessionWriter::create(dir, &manifest)?)
            }
            None => None,
        };
        let log_path = writer.as_ref().and_then(|w| w.path().map(PathBuf::from));

        let listen = options
            .listen
            .unwrap_or_else(|| config.listen_address.clone());
        let listener = bind(&listen).await?;
        let addr = listener.local_addr().map_err(|source| StartError::Bind {
            addr: listen,
            source,
        })?;
        let room_listener = match &config.room_address {
            Some(a) => Some(bind(a).await?),
            None => None,
        };
        let room_addr = room_listener.as_ref().and_then(|l| l.local_addr().ok());

        let timing = if replay.is_some() {
            Timing::Logical
        } else {
            Timing::Live
        };
        let clock = Arc::new(SessionClock::wall());
        let (hub, hub_task) = Hub::spawn(pipeline, writer, clock, timing);
        let mut tasks = vec![hub_task];

        let access = Access {
            admin_token: config.admin_token.clone(),
            participant_tokens: config.participant_tokens.clone(),
        };
        if access.admin_token.is_none() {
            tracing::warn!("no admin_token configured; admin endpoints are open");
        }
        let channel = config.source.channel.clone();
        let app = http::router(hub.clone(), access.clone(), &channel);
        tasks.push(tokio::spawn(async move {
            if let Err(e) = axum::serve(listener, app).await {
                tracing::error!("http server stopped: {e}");
            }
        }));
        if let Some(l) = room_listener {
            tasks.push(tokio::spawn(feeds::room(
                hub.clone(),
                l,
                Arc::new(access),
                channel,
            )));
        }

        let mut replay_task = None;
        if let Some(r) = replay {
            replay_task = Some(tokio::spawn(feeds::replay(hub.clone(), records, r.speed)));
        } else {
            match config.source.mode {
                SourceMode::IrcLive => {
                    tasks.push(tokio::spawn(feeds::irc(hub.clone(), config.source.clone())))
                }
                SourceMode::Synthetic => {
                    let profile = synthetic_profile(&config.source.endpoint)?;
                    let duration = profile.duration_ms.unwrap_or(SYNTHETIC_DURATION_MS);
                    profile
                        .validate(duration)
                        .map_err(|e| StartError::Profile(e.to_string()))?;
                    let hub = hub.clone();
                    tasks.push(tokio::spawn(async move {
                        if let Err(e) = feeds::synthetic(hub, profile, duration).await {
                            tracing::error!("synthetic feed: {e}");
                        }
                    }));
                }
                SourceMode::LocalRoom | SourceMode::ReplayFile => {}
            }
        }

        tracing::info!("listening on http://{addr}");
        Ok(Service {
            addr,
            room_addr,
            hub,
            log_path,
            replay: replay_task,
            tasks,
        })
    }

    /// Waits for a replay to finish feeding. `None` when not replaying.
    pub async fn replay_finished(&mut self) -> Option<Result<usize, LogError>> {
        let task = self.replay.take()?;
        Some(task.await.unwrap_or(Ok(0)))
    }

    /// Closes open windows, flushes the log and stops every task.
    pub async fn shutdown(self) {
        if let Some(task) = &self.replay {
            task.abort();
        }
        let end = match self.hub.timing() {
            Timing::Live => Some(self.hub.clock().now_ms()),
            Timing::Logical => None,
        };
        let _ = self.hub.finish(end).await;
        for task in &self.tasks {
            task.abort();
        }
    }
}

fn synthetic_profile(endpoint: &str) -> Result<TrafficProfile, StartError> {
    if endpoint.trim().is_empty() {
        return Ok(TrafficProfile::default());
    }
    let text = std::fs::read_to_string(endpoint)
        .map_err(|e| StartError::Profile(format!("{endpoint}: {e}")))?;
    serde_json::from_str(&text).map_err(|e| StartError::Profile(format!("{endpoint}: {e}")))
}
