//! Message sources that feed the hub: live IRC, the participant room socket,
//! log replay and a real-time synthetic stream.

use std::path::Path;
use std::sync::Arc;

use storychat_core::ingest::{
    frame_to_message, keepalive_response, login_lines, parse_irc_line, parse_room_line, Backoff,
    ChatMessage, Source, SourceConfig,
};
use storychat_core::session_log::{self, replay_items, replay_offset, LogError, LogRecord};
use storychat_core::sim::{generate, SimError, TrafficProfile};
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};
use tokio::time::Instant;

use crate::http::{participant_message, Access};
use crate::hub::Hub;

/// Connects to the IRC endpoint and forwards PRIVMSGs until the hub stops,
/// reconnecting with backoff when the connection drops.
pub async fn irc(hub: Hub, source: SourceConfig) {
    let mut backoff = Backoff::default();
    loop {
        match irc_session(&hub, &source, &mut backoff).await {
            Ok(()) => return,
            Err(e) => tracing::warn!("irc connection to {} lost: {e}", source.endpoint),
        }
        if !source.reconnects() {
            return;
        }
        let delay = backoff.next_delay();
        tracing::info!("reconnecting in {delay:?}");
        tokio::time::sleep(delay).await;
    }
}

fn anonymous_nick() -> String {
    format!(
        "justinfan{}",
        10_000 + uuid::Uuid::new_v4().as_u128() % 90_000
    )
}

/// Returns `Ok` only when the hub has gone away.
async fn irc_session(
    hub: &Hub,
    source: &SourceConfig,
    backoff: &mut Backoff,
) -> std::io::Result<()> {
    let stream = TcpStream::connect(&source.endpoint).await?;
    let (read, mut write) = stream.into_split();
    let nick = match (&source.credentials, &source.nick) {
        (Some(_), Some(nick)) => nick.clone(),
        (Some(_), None) => "storychat".to_owned(),
        (None, _) => anonymous_nick(),
    };
    for line in login_lines(source.credentials.as_deref(), &nick, &source.channel) {
        write.write_all(format!("{line}\r\n").as_bytes()).await?;
    }
    tracing::info!(
        "joined #{} on {}",
        source.channel.trim_start_matches('#'),
        source.endpoint
    );
    backoff.reset();

    let mut lines = BufReader::new(read).lines();
    while let Some(line) = lines.next_line().await? {
        let frame = match parse_irc_line(&line) {
            Ok(f) => f,
            Err(e) => {
                tracing::warn!("skipping frame: {e}");
                continue;
            }
        };
        if let Some(pong) = keepalive_response(&frame) {
            write.write_all(format!("{pong}\r\n").as_bytes()).await?;
            continue;
        }
        if frame.is_command("RECONNECT") {
            return Err(std::io::Error::other("server asked for a reconnect"));
        }
        if let Some(message) = frame_to_message(&frame, Source::External, hub.clock()) {
            if hub.submit(message).await.is_err() {
                return Ok(());
            }
        }
    }
    Err(std::io::ErrorKind::UnexpectedEof.into())
}

/// Accepts newline-delimited JSON posts, `{"author","body","token"?}`, from
/// local participant clients. Problems are answered with an `{"error"}` line.
pub async fn room(hub: Hub, listener: TcpListener, access: Arc<Access>, channel: String) {
    loop {
        let (stream, peer) = match listener.accept().await {
            Ok(conn) => conn,
            Err(e) => {
                tracing::warn!("room accept failed: {e}");
                continue;
            }
        };
        let (hub, access, channel) = (hub.clone(), access.clone(), channel.clone());
        tokio::spawn(async move {
            if let Err(e) = room_client(hub, stream, &access, &channel).await {
                tracing::debug!("room client {peer} closed: {e}");
            }
        });
    }
}

async fn room_client(
    hub: Hub,
    stream: TcpStream,
    access: &Access,
    channel: &str,
) -> std::io::Result<()> {
    let _ = stream.set_nodelay(true);
    let (read, mut write) = stream.into_split();
    let mut lines = BufReader::new(read).lines();
    while let Some(line) = lines.next_line().await? {
        if line.trim().is_empty() {
            continue;
        }
        let problem = match parse_room_line(&line) {
            Err(e) => Some(e.to_string()),
            Ok(post) if !access.participant_ok(post.token.as_deref()) => {
                Some("Unauthenticated".into())
            }
            Ok(post) => match participant_message(&hub, channel, &post.author, &post.body) {
                None => Some("EmptyBody".into()),
                Some(message) => {
                    if hub.submit(message).await.is_err() {
                        return Ok(());
                    }
                    None
                }
            },
        };
        if let Some(reason) = problem {
            let reply = serde_json::json!({ "error": reason });
            write.write_all(format!("{reply}\n").as_bytes()).await?;
        }
    }
    Ok(())
}

/// Feeds a logged session back at `speed`× and closes the remaining windows
/// at the last logged timestamp. Returns the records that were replayed.
pub async fn replay(hub: Hub, records: Vec<LogRecord>, speed: f64) -> Result<usize, LogError> {
    session_log::check_speed(speed)?;
    let end = records.last().map_or(0, |r| r.timestamp_ms);
    let items = replay_items(&records);
    let count = items.len();
    let start = Instant::now();
    for item in items {
        tokio::time::sleep_until(start + replay_offset(item.at_ms(), speed)).await;
        if hub.replay(item).await.is_err() {
            return Ok(count);
        }
    }
    let _ = hub.finish(Some(end)).await;
    Ok(count)
}

/// Loads a session for replay, keeping whatever precedes a damaged tail.
pub fn load_for_replay(path: &Path) -> Result<session_log::LoadedSession, LogError> {
    let (session, corruption) = session_log::recover(path)?;
    if let Some(c) = corruption {
        tracing::warn!(
            "{}: replaying up to line {} ({})",
            path.display(),
            c.line,
            c.reason
        );
    }
    Ok(session)
}

/// Plays generated traffic in real time against the hub's clock.
pub async fn synthetic(
    hub: Hub,
    profile: TrafficProfile,
    duration_ms: u64,
) -> Result<(), SimError> {
    let messages: Vec<ChatMessage> = generate(&profile, duration_ms)?;
    let origin = Instant::now() - std::time::Duration::from_millis(hub.clock().now_ms());
    for mut message in messages {
        tokio::time::sleep_until(origin + std::time::Duration::from_millis(message.timestamp_ms))
            .await;
        message.timestamp_ms = hub.clock().now_ms();
        if hub.submit(message).await.is_err() {
            break;
        }
    }
    Ok(())
}
