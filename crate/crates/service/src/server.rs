//! HTTP and WebSocket front end.
//!
//! Both transports carry the same [`ClientMessage`] JSON and answer with the
//! same [`ServerMessage`] JSON; see [`handle_message`].

use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::serve::ListenerExt;
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use jade_core::board::{Board, BoardBox};
use jade_core::engine::events_to_ndjson;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::broadcast::error::RecvError;

use crate::manager::SessionManager;
use crate::protocol::*;

pub type AppState = Arc<SessionManager>;

pub fn router(manager: Arc<SessionManager>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/protocol", get(protocol))
        .route("/catalog", get(catalog))
        .route("/boards", get(boards))
        .route("/boards/{id}", get(board))
        .route("/software", get(software))
        .route("/software/{id}", get(software_board))
        .route("/sessions", post(create).get(list))
        .route("/sessions/{id}/join", post(join))
        .route("/sessions/{id}/messages", post(message))
        .route("/sessions/{id}/ws", get(ws))
        .route("/sessions/{id}/envelopes", get(envelopes))
        .route("/sessions/{id}/snapshot", get(snapshot))
        .route("/sessions/{id}/log", get(log))
        .route("/sessions/{id}/sheets", get(sheets))
        .route("/sessions/{id}/export", get(export))
        .with_state(manager)
}

/// Binds and serves until the task is cancelled.
pub async fn serve(manager: Arc<SessionManager>, addr: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    serve_on(manager, listener).await
}

pub async fn serve_on(manager: Arc<SessionManager>, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    tracing::info!("listening on {}", listener.local_addr()?);
    let listener = listener.tap_io(|tcp| {
        let _ = tcp.set_nodelay(true);
    });
    axum::serve(listener, router(manager)).await
}

struct ApiError(Rejection);

impl From<Rejection> for ApiError {
    fn from(r: Rejection) -> Self {
        ApiError(r)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.0.code.http_status()).unwrap_or(StatusCode::BAD_REQUEST);
        (status, Json(self.0)).into_response()
    }
}

fn not_found(what: &str, id: &str) -> ApiError {
    ApiError(Rejection::new(ErrorCode::NotFound, format!("no {what} `{id}`")))
}

type ApiResult<T> = Result<T, ApiError>;

async fn health() -> Json<Value> {
    Json(json!({"status": "ok"}))
}

async fn protocol() -> Json<Value> {
    Json(json!({
        "protocol_version": PROTOCOL_VERSION,
        "client_messages": CLIENT_TYPES,
        "actions": ACTION_OPS,
        "server_messages": ["welcome", "envelope", "ack", "rejected", "snapshot", "resync"],
        "envelope_kinds": ["joined", "started", "event", "vote", "questionnaire", "debrief"],
    }))
}

async fn catalog(State(m): State<AppState>) -> Json<Value> {
    let c = &m.data().catalog;
    Json(json!({
        "families": c.families(),
        "concepts": c.concepts(),
        "key_points": c.key_points(),
    }))
}

#[derive(Serialize)]
struct BoardView<'a> {
    id: &'a str,
    title: Option<&'a str>,
    variant: jade_core::board::Variant,
    boxes: &'a [BoardBox],
    edges: Vec<[u16; 2]>,
}

fn board_view(b: &Board) -> BoardView<'_> {
    BoardView {
        id: b.id(),
        title: b.title(),
        variant: b.variant(),
        boxes: b.boxes(),
        edges: b.edges().map(|(a, c)| [a.0, c.0]).collect(),
    }
}

async fn boards(State(m): State<AppState>) -> Json<Value> {
    let list: Vec<Value> = m
        .data()
        .boards
        .iter()
        .map(|b| json!({"id": b.id(), "title": b.title(), "variant": b.variant(), "boxes": b.len()}))
        .collect();
    Json(Value::Array(list))
}

async fn board(State(m): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let b = m.data().board(&id).ok_or_else(|| not_found("board", &id))?;
    Ok(Json(serde_json::to_value(board_view(b)).expect("serializes")))
}

async fn software(State(m): State<AppState>) -> Json<Value> {
    let list: Vec<Value> = m
        .data()
        .software
        .iter()
        .map(|s| json!({"id": s.id, "title": s.title, "kind": s.kind, "compatible_variants": s.compatible_variants}))
        .collect();
    Json(Value::Array(list))
}

async fn software_board(State(m): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let s = m.data().software_board(&id).ok_or_else(|| not_found("software board", &id))?;
    Ok(Json(serde_json::to_value(s).expect("serializes")))
}

async fn create(State(m): State<AppState>, Json(req): Json<CreateSession>) -> ApiResult<impl IntoResponse> {
    let created = m.create(req)?;
    Ok((StatusCode::CREATED, Json(created)))
}

async fn list(State(m): State<AppState>) -> Json<Vec<String>> {
    Json(m.session_ids())
}

#[derive(Debug, Deserialize)]
pub struct JoinRequest {
    pub token: String,
    #[serde(default)]
    pub display_name: String,
    #[serde(default)]
    pub resume: bool,
}

async fn join(
    State(m): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<JoinRequest>,
) -> ApiResult<Json<ServerMessage>> {
    let (role, _) = m.join(&id, &req.token, &req.display_name, req.resume)?;
    Ok(Json(ServerMessage::Welcome {
        protocol_version: PROTOCOL_VERSION,
        session_id: id.clone(),
        actor: role.actor(),
        role,
        snapshot: Box::new(m.snapshot(&id)?),
    }))
}

#[derive(Debug, Deserialize)]
pub struct MessageRequest {
    pub token: String,
    pub message: Value,
}

/// Applies one client message on behalf of `token`. `hello` is only
/// meaningful on a socket and is refused here.
pub fn handle_message(m: &SessionManager, session: &str, token: &str, msg: ClientMessage) -> ServerMessage {
    let id = msg.id();
    let result = match msg {
        ClientMessage::Hello { .. } => Err(Rejection::new(ErrorCode::Malformed, "already joined")),
        ClientMessage::Snapshot { id } => {
            return match m.snapshot(session) {
                Ok(s) => ServerMessage::Snapshot {
                    id,
                    snapshot: Box::new(s),
                },
                Err(r) => ServerMessage::rejected(id, r),
            }
        }
        ClientMessage::Action { action, .. } => m.act(session, token, action),
        ClientMessage::Questionnaire { response, .. } => m.questionnaire(session, token, response),
        ClientMessage::Debrief { record, .. } => m.debrief(session, token, record),
    };
    match result {
        Ok(envs) => ack(id, &envs, m, session),
        Err(r) => ServerMessage::rejected(id, r),
    }
}

fn ack(id: Option<u64>, envs: &[SessionEnvelope], m: &SessionManager, session: &str) -> ServerMessage {
    match (envs.first(), envs.last()) {
        (Some(f), Some(l)) => ServerMessage::Ack {
            id,
            first: f.seq,
            last: l.seq,
        },
        _ => {
            let next = m.snapshot(session).map(|s| s.next_seq).unwrap_or(0);
            ServerMessage::Ack {
                id,
                first: next,
                last: next.saturating_sub(1),
            }
        }
    }
}

async fn message(
    State(m): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<MessageRequest>,
) -> ApiResult<Response> {
    m.get(&id)?;
    let msg = ClientMessage::parse(&req.message.to_string())?;
    let reply = handle_message(&m, &id, &req.token, msg);
    let status = match &reply {
        ServerMessage::Rejected { code, .. } => StatusCode::from_u16(code.http_status()).unwrap_or(StatusCode::BAD_REQUEST),
        _ => StatusCode::OK,
    };
    Ok((status, Json(reply)).into_response())
}

#[derive(Debug, Deserialize)]
struct After {
    after: Option<u64>,
}

async fn envelopes(
    State(m): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<After>,
) -> ApiResult<Json<Vec<SessionEnvelope>>> {
    let h = m.get(&id)?;
    let s = h.lock();
    Ok(Json(s.envelopes_after(q.after).to_vec()))
}

async fn snapshot(State(m): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Snapshot>> {
    Ok(Json(m.snapshot(&id)?))
}

async fn log(State(m): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let h = m.get(&id)?;
    let body = events_to_ndjson(h.lock().game().events());
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}

async fn sheets(State(m): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let h = m.get(&id)?;
    let s = h.lock();
    let g = s.game();
    let sheets: Vec<Value> = g
        .teams()
        .iter()
        .map(|t| serde_json::to_value(g.export_score_sheet(&t.id).expect("team exists")).expect("serializes"))
        .collect();
    Ok(Json(json!({"sheets": sheets, "standings": g.standings()})))
}

async fn export(State(m): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let h = m.get(&id)?;
    let s = h.lock();
    let header = s.header();
    Ok(Json(json!({
        "session_id": header.session_id,
        "created_ms": header.created_ms,
        "request": header.request,
        "status": s.status(),
        "standings": s.game().standings(),
        "envelopes": s.envelopes(),
        "questionnaires": s.questionnaires(),
        "debrief": s.debrief(),
    })))
}

async fn ws(State(m): State<AppState>, Path(id): Path<String>, upgrade: WebSocketUpgrade) -> ApiResult<Response> {
    m.get(&id)?;
    Ok(upgrade.on_upgrade(move |socket| connection(m, id, socket)))
}

fn frame(msg: &ServerMessage) -> Message {
    Message::Text(serde_json::to_string(msg).expect("serializes").into())
}

async fn connection(m: AppState, session: String, socket: WebSocket) {
    let (mut tx, mut rx) = socket.split();

    // The first frame must be a hello.
    let token = loop {
        let Some(Ok(incoming)) = rx.next().await else {
            return;
        };
        let text = match incoming {
            Message::Text(t) => t,
            Message::Close(_) => return,
            _ => continue,
        };
        let reply = match ClientMessage::parse(&text) {
            Ok(ClientMessage::Hello {
                protocol_version,
                token,
                display_name,
                resume,
            }) => {
                if protocol_version != PROTOCOL_VERSION {
                    ServerMessage::rejected(
                        None,
                        Rejection::new(
                            ErrorCode::ProtocolVersion,
                            format!("server speaks protocol {PROTOCOL_VERSION}"),
                        ),
                    )
                } else {
                    match m.join(&session, &token, &display_name, resume) {
                        Ok(_) => break token,
                        Err(r) => ServerMessage::rejected(None, r),
                    }
                }
            }
            Ok(other) => ServerMessage::rejected(other.id(), Rejection::new(ErrorCode::NotJoined, "send hello first")),
            Err(r) => ServerMessage::rejected(None, r),
        };
        if tx.send(frame(&reply)).await.is_err() {
            return;
        }
    };

    let Ok(handle) = m.get(&session) else { return };
    let role = match handle.lock().member(&token) {
        Ok(r) => r,
        Err(_) => return,
    };
    let (snap, mut events) = handle.subscribe();
    let welcome = ServerMessage::Welcome {
        protocol_version: PROTOCOL_VERSION,
        session_id: session.clone(),
        actor: role.actor(),
        role,
        snapshot: Box::new(snap),
    };
    if tx.send(frame(&welcome)).await.is_err() {
        return;
    }

    loop {
        tokio::select! {
            incoming = rx.next() => {
                let text = match incoming {
                    Some(Ok(Message::Text(t))) => t,
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                    Some(Ok(_)) => continue,
                };
                let reply = match ClientMessage::parse(&text) {
                    Ok(msg) => handle_message(&m, &session, &token, msg),
                    Err(r) => ServerMessage::rejected(None, r),
                };
                // Forward this request's envelopes before acknowledging it.
                if let ServerMessage::Ack { first, last, .. } = reply {
                    if first <= last {
                        loop {
                            match events.recv().await {
                                Ok(e) => {
                                    let seq = e.seq;
                                    if tx.send(frame(&ServerMessage::Envelope { envelope: e })).await.is_err() {
                                        return;
                                    }
                                    if seq >= last {
                                        break;
                                    }
                                }
                                Err(RecvError::Lagged(_)) => {
                                    let (snap, fresh) = handle.subscribe();
                                    events = fresh;
                                    if tx.send(frame(&ServerMessage::Resync { snapshot: Box::new(snap) })).await.is_err() {
                                        return;
                                    }
                                    break;
                                }
                                Err(RecvError::Closed) => return,
                            }
                        }
                    }
                }
                if tx.send(frame(&reply)).await.is_err() {
                    return;
                }
            }
            received = events.recv() => {
                let msg = match received {
                    Ok(e) => ServerMessage::Envelope { envelope: e },
                    Err(RecvError::Lagged(_)) => {
                        let (snap, fresh) = handle.subscribe();
                        events = fresh;
                        ServerMessage::Resync { snapshot: Box::new(snap) }
                    }
                    Err(RecvError::Closed) => return,
                };
                if tx.send(frame(&msg)).await.is_err() {
                    return;
                }
            }
        }
    }
}
