use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use futures_util::{SinkExt, StreamExt};
use holoforge_core::replication::{
    decode_client_envelope, encode_frame, Backend, ClientEnvelope, ClientId, ClientMessage, Envelope, Mode, SessionState,
    WIRE_VERSION,
};
use serde::{Deserialize, Serialize};
use tokio::sync::{mpsc, oneshot, watch};
use tracing::{info, warn};

use crate::config::GatewayConfig;
use crate::engine::{build_backend, Engine};
use crate::error::{ApiError, GatewayError};
use crate::session_loop::{self, Command, LoopConfig, Summary};

struct SessionHandle {
    token: String,
    tx: mpsc::UnboundedSender<Command>,
    summary: watch::Receiver<Summary>,
    task: tokio::task::JoinHandle<()>,
}

/// Shared state behind every route.
pub struct Gateway {
    pub config: GatewayConfig,
    pub engine: Engine,
    sessions: Mutex<BTreeMap<String, SessionHandle>>,
    next_client: AtomicU32,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionCreated {
    pub id: String,
    pub mode: Mode,
    pub token: String,
}

#[derive(Debug, Deserialize)]
pub struct WsParams {
    pub token: String,
    /// `binary` (default): length-prefixed frames; `text`: bare JSON.
    #[serde(default)]
    pub format: Option<String>,
}

impl Gateway {
    pub fn new(config: GatewayConfig) -> Result<Self, GatewayError> {
        config.validate()?;
        let engine = build_backend(&config)?;
        Ok(Self {
            config,
            engine,
            sessions: Mutex::new(BTreeMap::new()),
            next_client: AtomicU32::new(1),
        })
    }

    fn sessions(&self) -> std::sync::MutexGuard<'_, BTreeMap<String, SessionHandle>> {
        self.sessions.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn create_session(&self, req: CreateSession) -> Result<SessionCreated, ApiError> {
        let mode = req.mode.unwrap_or(self.config.default_mode);
        let seed = req.seed.unwrap_or_else(rand::random);
        let mut sessions = self.sessions();
        sessions.retain(|_, h| !h.task.is_finished());
        if sessions.len() >= self.config.max_sessions {
            return Err(ApiError::capacity(format!("{} sessions are running", sessions.len())));
        }
        let id = uuid::Uuid::new_v4().simple().to_string()[..12].to_owned();
        let token = uuid::Uuid::new_v4().simple().to_string();
        let session = SessionState::new(id.clone(), mode, seed).with_audit_period(self.config.audit_period_ticks);
        let backend: Arc<dyn Backend> = self.engine.backend.clone();
        let (tx, summary, task) = session_loop::spawn(
            session,
            backend,
            LoopConfig {
                loop_hz: self.config.loop_hz,
                trace_path: self.config.traces_dir().join(format!("{id}.jsonl")),
            },
        );
        info!(%id, ?mode, seed, "session created");
        sessions.insert(
            id.clone(),
            SessionHandle {
                token: token.clone(),
                tx,
                summary,
                task,
            },
        );
        Ok(SessionCreated { id, mode, token })
    }

    pub fn list(&self) -> Vec<Summary> {
        self.sessions().values().map(|h| h.summary.borrow().clone()).collect()
    }

    fn sender(&self, id: &str) -> Result<(mpsc::UnboundedSender<Command>, String), ApiError> {
        self.sessions()
            .get(id)
            .map(|h| (h.tx.clone(), h.token.clone()))
            .ok_or_else(|| ApiError::unknown_session(id))
    }

    pub fn close_session(&self, id: &str) -> Result<(), ApiError> {
        let h = self.sessions().remove(id).ok_or_else(|| ApiError::unknown_session(id))?;
        let _ = h.tx.send(Command::Close);
        Ok(())
    }

    /// Stop every session loop and wait for their traces to be flushed.
    pub async fn shutdown(&self) {
        let handles: Vec<SessionHandle> = std::mem::take(&mut *self.sessions()).into_values().collect();
        for h in handles {
            let _ = h.tx.send(Command::Close);
            let _ = h.task.await;
        }
    }
}

pub fn router(gateway: Arc<Gateway>) -> Router {
    Router::new()
        .route("/sessions", get(list_sessions).post(create_session))
        .route("/sessions/{id}", axum::routing::delete(delete_session))
        .route("/sessions/{id}/state", get(session_state))
        .route("/sessions/{id}/ws", get(session_ws))
        .with_state(gateway)
}

async fn create_session(State(gw): State<Arc<Gateway>>, body: Bytes) -> Result<(StatusCode, Json<SessionCreated>), ApiError> {
    let req = if body.iter().all(u8::is_ascii_whitespace) {
        CreateSession::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(e.to_string()))?
    };
    Ok((StatusCode::CREATED, Json(gw.create_session(req)?)))
}

async fn list_sessions(State(gw): State<Arc<Gateway>>) -> Json<Vec<Summary>> {
    Json(gw.list())
}

async fn delete_session(State(gw): State<Arc<Gateway>>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    gw.close_session(&id)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn session_state(State(gw): State<Arc<Gateway>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let (tx, _) = gw.sender(&id)?;
    let (reply, rx) = oneshot::channel();
    tx.send(Command::Snapshot(reply))
        .map_err(|_| ApiError::unknown_session(&id))?;
    let snap = rx.await.map_err(|_| ApiError::unknown_session(&id))?;
    Ok(Json(snap).into_response())
}

async fn session_ws(
    State(gw): State<Arc<Gateway>>,
    Path(id): Path<String>,
    Query(params): Query<WsParams>,
    ws: WebSocketUpgrade,
) -> Result<Response, ApiError> {
    let (tx, token) = gw.sender(&id)?;
    if params.token != token {
        return Err(ApiError::unauthorized());
    }
    let text = match params.format.as_deref() {
        None | Some("binary") => false,
        Some("text") => true,
        Some(other) => return Err(ApiError::bad_request(format!("unknown format `{other}`"))),
    };
    let client = ClientId(gw.next_client.fetch_add(1, Ordering::Relaxed));
    Ok(ws.on_upgrade(move |socket| client_socket(socket, id, client, tx, text)))
}

fn encode(env: &Envelope, text: bool) -> Message {
    if text {
        Message::Text(serde_json::to_string(env).expect("envelopes serialize").into())
    } else {
        Message::Binary(encode_frame(env).into())
    }
}

/// Accepts a bare client message, a client envelope as JSON text, or a
/// length-prefixed client envelope.
fn decode(msg: &Message) -> Result<Option<ClientEnvelope>, String> {
    match msg {
        Message::Text(t) => {
            if let Ok(env) = serde_json::from_str::<ClientEnvelope>(t) {
                return Ok(Some(env));
            }
            let message: ClientMessage = serde_json::from_str(t).map_err(|e| e.to_string())?;
            Ok(Some(ClientEnvelope {
                version: WIRE_VERSION,
                session: String::new(),
                client: ClientId(0),
                message,
            }))
        }
        Message::Binary(b) => decode_client_envelope(b).map(Some).map_err(|e| e.to_string()),
        _ => Ok(None),
    }
}

async fn client_socket(socket: WebSocket, session: String, client: ClientId, tx: mpsc::UnboundedSender<Command>, text: bool) {
    let (reply, rx) = oneshot::channel();
    if tx.send(Command::Join { client, reply }).is_err() {
        return;
    }
    let (mut sink, mut stream) = socket.split();
    let mut joined = match rx.await {
        Ok(Ok(j)) => j,
        Ok(Err(e)) => {
            let frame = axum::extract::ws::CloseFrame {
                code: 1013,
                reason: e.code().into(),
            };
            let _ = sink.send(Message::Close(Some(frame))).await;
            return;
        }
        Err(_) => return,
    };
    info!(%session, %client, "client joined");
    let writer = tokio::spawn(async move {
        while let Some(env) = joined.frames.recv().await {
            if sink.send(encode(&env, text)).await.is_err() {
                break;
            }
        }
        let _ = sink.close().await;
    });
    while let Some(Ok(msg)) = stream.next().await {
        if matches!(msg, Message::Close(_)) {
            break;
        }
        match decode(&msg) {
            Ok(Some(env)) => {
                let stamped = !env.session.is_empty() || env.client != ClientId(0);
                if env.version != WIRE_VERSION || (stamped && (env.session != session || env.client != client)) {
                    warn!(%client, "client envelope for another session, client or version");
                    continue;
                }
                if tx.send(Command::Inbound(client, env.message)).is_err() {
                    break;
                }
            }
            Ok(None) => {}
            Err(e) => warn!(%client, error = %e, "unreadable client message"),
        }
    }
    let _ = tx.send(Command::Leave(client));
    writer.abort();
    info!(%session, %client, "client left");
}

/// A gateway listening on a socket.
pub struct Running {
    pub addr: SocketAddr,
    pub gateway: Arc<Gateway>,
    stop: oneshot::Sender<()>,
    server: tokio::task::JoinHandle<std::io::Result<()>>,
}

impl Running {
    pub async fn stop(self) -> std::io::Result<()> {
        let _ = self.stop.send(());
        // closing the loops ends their sockets, which lets the server drain
        self.gateway.shutdown().await;
        self.server.await.unwrap_or(Ok(()))
    }
}

pub async fn start(config: GatewayConfig) -> Result<Running, GatewayError> {
    let gateway = Arc::new(Gateway::new(config)?);
    let listener = tokio::net::TcpListener::bind(gateway.config.bind_addr()?).await?;
    let addr = listener.local_addr()?;
    let (stop, stopped) = oneshot::channel::<()>();
    let app = router(gateway.clone());
    let server = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = stopped.await;
            })
            .await
    });
    info!(%addr, "listening");
    Ok(Running {
        addr,
        gateway,
        stop,
        server,
    })
}
