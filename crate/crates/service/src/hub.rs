//! One serialized event loop per session, fanned out over a broadcast channel.

use std::io::Write as _;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::ws::{CloseFrame, Message, Utf8Bytes, WebSocket, WebSocketUpgrade};
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::Response;
use futures::{SinkExt, StreamExt};
use serde::{Deserialize, Serialize};
use timbre::session::{
    Event, LogRecord, ParamLookup, Session, SessionError, SessionState, PROTOCOL_VERSION,
};
use tokio::sync::broadcast;

use crate::{error_response, AppState};

pub const CLOSE_PROTOCOL: u16 = 4000;
pub const CLOSE_FULL: u16 = 4001;
pub const CLOSE_DUPLICATE: u16 = 4002;
pub const CLOSE_LAGGED: u16 = 4003;
pub const CLOSE_BAD_VERSION: u16 = 4004;
const CHANNEL_CAPACITY: usize = 4096;

pub fn close_code(e: &SessionError) -> u16 {
    match e {
        SessionError::Full => CLOSE_FULL,
        SessionError::Duplicate { .. } => CLOSE_DUPLICATE,
        _ => CLOSE_PROTOCOL,
    }
}

#[derive(Serialize)]
struct Snapshot<'a> {
    v: u32,
    kind: &'static str,
    seq: u64,
    hash: String,
    state: &'a SessionState,
}

#[derive(Serialize)]
struct Delta<'a> {
    v: u32,
    kind: &'static str,
    seq: u64,
    hash: String,
    user: &'a str,
    #[serde(flatten)]
    event: &'a Event,
}

#[derive(Serialize)]
struct Rejection<'a> {
    v: u32,
    kind: &'static str,
    code: &'a str,
    message: String,
}

#[derive(Deserialize)]
struct ClientMessage {
    v: u32,
    #[serde(flatten)]
    event: Event,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

pub struct Hub {
    session: Mutex<Session>,
    tx: broadcast::Sender<Arc<str>>,
    log_path: Option<PathBuf>,
}

impl Hub {
    pub fn new(log_path: Option<PathBuf>) -> Self {
        Hub {
            session: Mutex::new(Session::new()),
            tx: broadcast::channel(CHANNEL_CAPACITY).0,
            log_path,
        }
    }

    pub fn state(&self) -> SessionState {
        self.session.lock().expect("session").state.clone()
    }

    fn publish(&self, session: &Session, rec: &LogRecord) {
        let msg = serde_json::to_string(&Delta {
            v: PROTOCOL_VERSION,
            kind: "event",
            seq: rec.seq,
            hash: session.state.hash(),
            user: &rec.user,
            event: &rec.event,
        })
        .expect("serializable");
        let _ = self.tx.send(msg.into());
        if let Some(path) = &self.log_path {
            let line = serde_json::to_string(rec).expect("serializable");
            let res = std::fs::create_dir_all(path.parent().unwrap_or(std::path::Path::new(".")))
                .and_then(|_| {
                    std::fs::OpenOptions::new()
                        .create(true)
                        .append(true)
                        .open(path)
                })
                .and_then(|mut f| writeln!(f, "{line}"));
            if let Err(e) = res {
                log::warn!("appending to {}: {e}", path.display());
            }
        }
    }

    /// Applies an event and broadcasts it while the session lock is held, so
    /// broadcast order equals sequence order.
    pub fn submit(
        &self,
        user: &str,
        event: Event,
        lookup: &dyn ParamLookup,
    ) -> Result<LogRecord, SessionError> {
        let mut s = self.session.lock().expect("session");
        let rec = s.submit(user, event, now_ms(), lookup)?;
        self.publish(&s, &rec);
        Ok(rec)
    }

    /// Joins `user` and returns the snapshot message with a receiver that
    /// yields exactly the events after it.
    pub fn join(
        &self,
        user: &str,
        lookup: &dyn ParamLookup,
    ) -> Result<(String, broadcast::Receiver<Arc<str>>), SessionError> {
        let mut s = self.session.lock().expect("session");
        let rec = s.submit(user, Event::Join, now_ms(), lookup)?;
        self.publish(&s, &rec);
        let rx = self.tx.subscribe();
        let snapshot = serde_json::to_string(&Snapshot {
            v: PROTOCOL_VERSION,
            kind: "snapshot",
            seq: s.state.seq,
            hash: s.state.hash(),
            state: &s.state,
        })
        .expect("serializable");
        Ok((snapshot, rx))
    }
}

#[derive(Debug, Deserialize)]
pub(crate) struct SessionQuery {
    session: Option<String>,
    user: Option<String>,
}

fn valid_name(s: &str) -> bool {
    !s.is_empty()
        && s.len() <= 64
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

pub(crate) async fn ws_handler(
    ws: WebSocketUpgrade,
    Query(q): Query<SessionQuery>,
    State(app): State<Arc<AppState>>,
) -> Response {
    let (Some(session), Some(user)) = (q.session, q.user) else {
        return error_response(
            StatusCode::BAD_REQUEST,
            "bad_request",
            "session and user are required",
        );
    };
    if !valid_name(&session) || !valid_name(&user) {
        return error_response(
            StatusCode::BAD_REQUEST,
            "bad_id",
            "session and user must match [A-Za-z0-9_-]{1,64}",
        );
    }
    ws.on_upgrade(move |socket| client(app, session, user, socket))
}

fn close(code: u16, reason: &str) -> Message {
    Message::Close(Some(CloseFrame {
        code,
        reason: Utf8Bytes::from(reason.to_string()),
    }))
}

fn rejection(code: &str, message: impl ToString) -> Message {
    let body = serde_json::to_string(&Rejection {
        v: PROTOCOL_VERSION,
        kind: "error",
        code,
        message: message.to_string(),
    })
    .expect("serializable");
    Message::Text(body.into())
}

async fn client(app: Arc<AppState>, session: String, user: String, mut socket: WebSocket) {
    let hub = app.hub(&session);
    let (snapshot, mut rx) = match hub.join(&user, app.lookup()) {
        Ok(j) => j,
        Err(e) => {
            let _ = socket.send(close(close_code(&e), e.code())).await;
            return;
        }
    };
    log::info!("{user} joined session {session}");
    let (mut sink, mut stream) = socket.split();
    let mut closing: Option<Message> = None;
    if sink.send(Message::Text(snapshot.into())).await.is_ok() {
        loop {
            tokio::select! {
                incoming = stream.next() => {
                    let text = match incoming {
                        Some(Ok(Message::Text(t))) => t,
                        Some(Ok(Message::Ping(_) | Message::Pong(_))) => continue,
                        Some(Ok(Message::Binary(_))) => {
                            closing = Some(close(CLOSE_PROTOCOL, "binary frames are not supported"));
                            break;
                        }
                        Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                    };
                    let msg: ClientMessage = match serde_json::from_str(text.as_str()) {
                        Ok(m) => m,
                        Err(e) => {
                            closing = Some(close(CLOSE_PROTOCOL, &format!("malformed message: {e}")));
                            break;
                        }
                    };
                    if msg.v != PROTOCOL_VERSION {
                        closing = Some(close(CLOSE_BAD_VERSION, "unsupported protocol version"));
                        break;
                    }
                    if matches!(msg.event, Event::Join | Event::Leave) {
                        if sink.send(rejection("invalid", "join and leave follow the connection")).await.is_err() {
                            break;
                        }
                        continue;
                    }
                    if let Err(e) = hub.submit(&user, msg.event, app.lookup()) {
                        if sink.send(rejection(e.code(), &e)).await.is_err() {
                            break;
                        }
                    }
                }
                out = rx.recv() => match out {
                    Ok(m) => {
                        if sink.send(Message::Text(m.as_ref().into())).await.is_err() {
                            break;
                        }
                    }
                    Err(broadcast::error::RecvError::Lagged(_)) => {
                        closing = Some(close(CLOSE_LAGGED, "fell behind; reconnect for a fresh snapshot"));
                        break;
                    }
                    Err(broadcast::error::RecvError::Closed) => break,
                },
            }
        }
    }
    if let Some(c) = closing {
        let _ = sink.send(c).await;
    }
    if let Err(e) = hub.submit(&user, Event::Leave, app.lookup()) {
        log::warn!("{user} leaving {session}: {e}");
    }
    log::info!("{user} left session {session}");
}
