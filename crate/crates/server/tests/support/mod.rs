#![allow(dead_code)]

use std::time::Duration;

use futures_util::StreamExt;
use serde_json::Value;
use storychat_core::engine::EngineConfig;
use storychat_server::{Options, Service};
use tokio::net::TcpStream;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};

pub type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

/// One-second windows keep live tests short.
pub fn fast_config() -> EngineConfig {
    let mut config = EngineConfig::default();
    config.detector.window_ms = 1_000;
    config.listen_address = "127.0.0.1:0".into();
    config
}

pub async fn start(config: EngineConfig, log_dir: Option<&std::path::Path>) -> Service {
    Service::start(Options {
        config,
        log_dir: log_dir.map(Into::into),
        ..Default::default()
    })
    .await
    .expect("service starts")
}

pub async fn connect(service: &Service) -> Ws {
    let (ws, _) = tokio_tungstenite::connect_async(format!("ws://{}/ws", service.addr))
        .await
        .unwrap();
    ws
}

pub fn url(service: &Service, path: &str) -> String {
    format!("http://{}{}", service.addr, path)
}

/// Next text frame as JSON, or `None` after `wait`.
pub async fn next_update(ws: &mut Ws, wait: Duration) -> Option<Value> {
    loop {
        let frame = tokio::time::timeout(wait, ws.next()).await.ok()??.ok()?;
        if let tokio_tungstenite::tungstenite::Message::Text(text) = frame {
            return Some(serde_json::from_str(&text).unwrap());
        }
    }
}

/// Skips ahead to the first update matching `pred`, collecting what was passed over.
pub async fn wait_for(
    ws: &mut Ws,
    wait: Duration,
    pred: impl Fn(&Value) -> bool,
) -> (Option<Value>, Vec<Value>) {
    let deadline = tokio::time::Instant::now() + wait;
    let mut skipped = Vec::new();
    loop {
        let left = deadline.saturating_duration_since(tokio::time::Instant::now());
        match next_update(ws, left).await {
            Some(v) if pred(&v) => return (Some(v), skipped),
            Some(v) => skipped.push(v),
            None => return (None, skipped),
        }
    }
}

pub fn is_type(v: &Value, kind: &str) -> bool {
    v["type"] == kind
}
