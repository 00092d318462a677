//! HTTP surface: admin endpoints, participant comments, state and `/ws`.

use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use storychat_core::classifier::FilterUpdate;
use storychat_core::engine::{AdminChange, AdminError, ClientUpdate, Mode};
use storychat_core::ingest::{ChatMessage, Source};
use tokio::sync::broadcast::error::RecvError;

use crate::hub::{AdminRequest, EngineGone, Hub};

pub const ADMIN_TOKEN_HEADER: &str = "x-admin-token";
pub const PARTICIPANT_TOKEN_HEADER: &str = "x-participant-token";

/// Who may do what. `None` / empty leaves that surface open.
#[derive(Debug, Clone, Default)]
pub struct Access {
    pub admin_token: Option<String>,
    pub participant_tokens: Vec<String>,
}

impl Access {
    pub fn admin_ok(&self, presented: Option<&str>) -> bool {
        match &self.admin_token {
            None => true,
            Some(t) => presented == Some(t.as_str()),
        }
    }

    pub fn participant_ok(&self, presented: Option<&str>) -> bool {
        self.participant_tokens.is_empty()
            || presented.is_some_and(|p| self.participant_tokens.iter().any(|t| t == p))
    }
}

#[derive(Clone)]
struct AppState {
    hub: Hub,
    access: Arc<Access>,
    channel: Arc<str>,
}

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("unauthenticated")]
    Unauthenticated,
    #[error("comment body is empty")]
    EmptyBody,
    #[error(transparent)]
    Admin(#[from] AdminError),
    #[error(transparent)]
    Gone(#[from] EngineGone),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, kind) = match &self {
            ApiError::Unauthenticated => (StatusCode::UNAUTHORIZED, "Unauthenticated"),
            ApiError::EmptyBody => (StatusCode::BAD_REQUEST, "EmptyBody"),
            ApiError::Admin(AdminError::InvalidValue(_)) => {
                (StatusCode::BAD_REQUEST, "InvalidValue")
            }
            ApiError::Admin(AdminError::EmptyNotice) => (StatusCode::BAD_REQUEST, "EmptyNotice"),
            ApiError::Admin(AdminError::NoticeTooLong { .. }) => {
                (StatusCode::BAD_REQUEST, "EmptyNotice")
            }
            ApiError::Gone(_) => (StatusCode::SERVICE_UNAVAILABLE, "Unavailable"),
        };
        (
            status,
            Json(json!({ "error": kind, "detail": self.to_string() })),
        )
            .into_response()
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Ack {
    pub seq: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Accepted {
    pub id: String,
}

#[derive(Deserialize)]
struct ThresholdBody {
    value: f64,
}

#[derive(Deserialize)]
struct ModeBody {
    mode: Mode,
}

#[derive(Deserialize)]
struct NoticeBody {
    text: String,
}

#[derive(Deserialize)]
struct ViewersBody {
    count: u64,
}

#[derive(Deserialize)]
struct CommentBody {
    author: String,
    body: String,
}

pub fn router(hub: Hub, access: Access, channel: &str) -> Router {
    let state = AppState {
        hub,
        access: Arc::new(access),
        channel: channel.into(),
    };
    Router::new()
        .route("/state", get(get_state))
        .route("/admin/threshold", post(set_threshold))
        .route("/admin/filter", post(set_filter))
        .route("/admin/mode", post(set_mode))
        .route("/admin/notice", post(notice))
        .route("/admin/viewers", post(set_viewers))
        .route("/room/comment", post(comment))
        .route("/ws", get(ws))
        .with_state(state)
}

fn header<'a>(headers: &'a HeaderMap, name: &str) -> Option<&'a str> {
    headers.get(name).and_then(|v| v.to_str().ok())
}

async fn admin(
    state: &AppState,
    headers: &HeaderMap,
    request: AdminRequest,
) -> Result<Json<Ack>, ApiError> {
    if !state.access.admin_ok(header(headers, ADMIN_TOKEN_HEADER)) {
        return Err(ApiError::Unauthenticated);
    }
    let seq = state.hub.admin(request).await??;
    Ok(Json(Ack { seq }))
}

async fn get_state(State(state): State<AppState>) -> Result<Response, ApiError> {
    Ok(Json(state.hub.snapshot().await?).into_response())
}

async fn set_threshold(
    State(state): State<AppState>,
    headers: HeaderMap,
    Json(body): Json<ThresholdBody>,
) -> Result<Json<Ack>, ApiError> {
    admin(
        &state,
        &headers,
        AdminRequest::Change(AdminChange::Threshold { value: body.value }),
    )
    .await
}

async fn set_filter(
    State(state): State<AppState>,
    headers: HeaderMap,
    Json(update): Json<FilterUpdate>,
) -> Result<Json<Ack>, ApiError> {
    admin(
        &state,
        &headers,
        AdminRequest::Change(AdminChange::Filter { update }),
    )
    .await
}

async fn set_mode(
    State(state): State<AppState>,
    headers: HeaderMap,
    Json(body): Json<ModeBody>,
) -> Result<Json<Ack>, ApiError> {
    admin(
        &state,
        &headers,
        AdminRequest::Change(AdminChange::Mode { mode: body.mode }),
    )
    .await
}

async fn set_viewers(
    State(state): State<AppState>,
    headers: HeaderMap,
    Json(body): Json<ViewersBody>,
) -> Result<Json<Ack>, ApiError> {
    admin(
        &state,
        &headers,
        AdminRequest::Change(AdminChange::Viewers { count: body.count }),
    )
    .await
}

async fn notice(
    State(state): State<AppState>,
    headers: HeaderMap,
    Json(body): Json<NoticeBody>,
) -> Result<Json<Ack>, ApiError> {
    admin(&state, &headers, AdminRequest::Notice(body.text)).await
}

/// Turns a participant post into a message stamped at receipt.
pub fn participant_message(
    hub: &Hub,
    channel: &str,
    author: &str,
    body: &str,
) -> Option<ChatMessage> {
    let clock = hub.clock();
    ChatMessage::new(
        clock.next_message_id(Source::Participant),
        channel,
        author,
        body,
        clock.now_ms(),
        Source::Participant,
    )
}

async fn comment(
    State(state): State<AppState>,
    headers: HeaderMap,
    Json(body): Json<CommentBody>,
) -> Result<(StatusCode, Json<Accepted>), ApiError> {
    if !state
        .access
        .participant_ok(header(&headers, PARTICIPANT_TOKEN_HEADER))
    {
        return Err(ApiError::Unauthenticated);
    }
    let message = participant_message(&state.hub, &state.channel, &body.author, &body.body)
        .ok_or(ApiError::EmptyBody)?;
    let id = message.id.clone();
    state.hub.submit(message).await?;
    Ok((StatusCode::ACCEPTED, Json(Accepted { id })))
}

async fn ws(State(state): State<AppState>, upgrade: WebSocketUpgrade) -> Response {
    let updates = state.hub.subscribe();
    upgrade.on_upgrade(move |socket| fan_out(socket, updates))
}

/// Streams updates to one client with its own seq numbering. A client that
/// falls a full buffer behind is disconnected rather than slowing anyone else.
async fn fan_out(
    mut socket: WebSocket,
    mut updates: tokio::sync::broadcast::Receiver<Arc<storychat_core::engine::UpdatePayload>>,
) {
    let mut seq = 0u64;
    loop {
        tokio::select! {
            update = updates.recv() => match update {
                Ok(payload) => {
                    seq += 1;
                    let frame = ClientUpdate { seq, payload: (*payload).clone() };
                    let text = serde_json::to_string(&frame).expect("update serializes");
                    if socket.send(Message::Text(text.into())).await.is_err() {
                        return;
                    }
                }
                Err(RecvError::Lagged(missed)) => {
                    tracing::warn!("dropping slow client after {missed} missed updates");
                    let _ = socket.send(Message::Close(None)).await;
                    return;
                }
                Err(RecvError::Closed) => {
                    let _ = socket.send(Message::Close(None)).await;
                    return;
                }
            },
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            },
        }
    }
}
