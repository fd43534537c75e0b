//! Async front end: one owner task serializes session mutations and decides
//! when to render; each websocket client gets a writer channel and a credit
//! counter.

use std::collections::HashMap;
use std::path::{Component, Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::{header, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use futures_util::{SinkExt, StreamExt};
use tokio::net::TcpListener;
use tokio::sync::{mpsc, oneshot};

use crate::protocol::{parse_client, ClientMessage, ServerMessage, PROTOCOL_VERSION};
use crate::session::{render_snapshot, AvatarAsset, Handled, RenderedFrame, SessionCore, Snapshot};

pub const DEFAULT_CREDIT_WINDOW: u32 = 3;

#[derive(Clone, Debug)]
pub struct ServeConfig {
    pub width: u32,
    pub height: u32,
    /// Fixed frame rate; `None` renders only when parameters change.
    pub fps: Option<f64>,
    pub credit_window: u32,
    pub static_dir: Option<PathBuf>,
    pub stats_interval: Duration,
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig {
            width: 256,
            height: 256,
            fps: None,
            credit_window: DEFAULT_CREDIT_WINDOW,
            static_dir: None,
            stats_interval: Duration::from_secs(1),
        }
    }
}

/// Messages queued for one client's socket.
#[derive(Debug)]
pub enum Outgoing {
    Text(String),
    Frame(Arc<Vec<u8>>),
}

enum Command {
    Join {
        out: mpsc::UnboundedSender<Outgoing>,
        reply: oneshot::Sender<u64>,
    },
    Leave(u64),
    Message {
        client: u64,
        msg: ClientMessage,
    },
    Invalid {
        client: u64,
        error: String,
    },
    Rendered {
        snapshot: Snapshot,
        result: headsplat::Result<RenderedFrame>,
    },
}

struct Client {
    out: mpsc::UnboundedSender<Outgoing>,
    credits: u32,
}

struct Owner {
    core: SessionCore,
    cfg: ServeConfig,
    clients: HashMap<u64, Client>,
    next_client: u64,
    /// The latest parameters have not been sent as a frame yet.
    dirty: bool,
    rendering: bool,
    frame_seq: u32,
    cache: Option<(Snapshot, Arc<RenderedFrame>)>,
    tx: mpsc::UnboundedSender<Command>,
    window_frames: u64,
    window_ms: f64,
    window_start: Instant,
    total_frames: u64,
}

impl Owner {
    fn broadcast_text(&self, msg: &ServerMessage) {
        let text = serde_json::to_string(msg).expect("server messages serialize");
        for c in self.clients.values() {
            let _ = c.out.send(Outgoing::Text(text.clone()));
        }
    }

    fn send_text(&self, client: u64, msg: &ServerMessage) {
        if let Some(c) = self.clients.get(&client) {
            let _ = c.out.send(Outgoing::Text(
                serde_json::to_string(msg).expect("server messages serialize"),
            ));
        }
    }

    fn on_command(&mut self, cmd: Command) {
        match cmd {
            Command::Join { out, reply } => {
                let id = self.next_client;
                self.next_client += 1;
                self.clients.insert(
                    id,
                    Client {
                        out,
                        credits: self.cfg.credit_window,
                    },
                );
                let _ = reply.send(id);
                self.send_text(id, &self.core.state_message());
                // A joining client gets the current frame straight from the
                // cache when it is still valid.
                match &self.cache {
                    Some((snap, frame)) if *snap == self.core.snapshot() => {
                        let frame = frame.clone();
                        self.frame_seq = self.frame_seq.wrapping_add(1);
                        let msg = Arc::new(frame.message(self.frame_seq));
                        let c = self.clients.get_mut(&id).expect("just inserted");
                        c.credits -= 1;
                        let _ = c.out.send(Outgoing::Frame(msg));
                    }
                    _ => self.dirty = true,
                }
            }
            Command::Leave(id) => {
                self.clients.remove(&id);
            }
            Command::Message { client, msg } => match msg {
                ClientMessage::Credit { n } => {
                    if let Some(c) = self.clients.get_mut(&client) {
                        c.credits = c.credits.saturating_add(n).min(self.cfg.credit_window);
                    }
                }
                other => {
                    let Handled { reply, changed } = self.core.handle(&other);
                    self.send_text(client, &reply);
                    self.dirty |= changed;
                }
            },
            Command::Invalid { client, error } => {
                let reply = self.core.reject(error).reply;
                self.send_text(client, &reply);
            }
            Command::Rendered { snapshot, result } => {
                self.rendering = false;
                match result {
                    Ok(frame) => self.deliver(snapshot, frame),
                    Err(e) => {
                        log::error!("render failed: {e}");
                        self.broadcast_text(&ServerMessage::Ack {
                            v: PROTOCOL_VERSION,
                            ok: false,
                            seq: snapshot.seq,
                            error: Some(format!("render failed: {e}")),
                        });
                    }
                }
            }
        }
        self.maybe_render();
    }

    fn deliver(&mut self, snapshot: Snapshot, frame: RenderedFrame) {
        self.window_frames += 1;
        self.total_frames += 1;
        self.window_ms += frame.render_ms;
        self.frame_seq = self.frame_seq.wrapping_add(1);
        let msg = Arc::new(frame.message(self.frame_seq));
        for c in self.clients.values_mut() {
            if c.credits > 0 {
                c.credits -= 1;
                let _ = c.out.send(Outgoing::Frame(msg.clone()));
            }
        }
        self.cache = Some((snapshot, Arc::new(frame)));
    }

    fn maybe_render(&mut self) {
        if !self.dirty || self.rendering || self.clients.is_empty() {
            return;
        }
        // The slowest client gates production.
        if self.clients.values().any(|c| c.credits == 0) {
            return;
        }
        self.dirty = false;
        self.rendering = true;
        let snapshot = self.core.snapshot();
        let asset = self.core.asset().clone();
        let tx = self.tx.clone();
        tokio::task::spawn_blocking(move || {
            let result = render_snapshot(&asset, &snapshot);
            let _ = tx.send(Command::Rendered { snapshot, result });
        });
    }

    fn tick_stats(&mut self) {
        let elapsed = self.window_start.elapsed().as_secs_f64();
        let msg = ServerMessage::Stats {
            v: PROTOCOL_VERSION,
            fps: if elapsed > 0.0 {
                self.window_frames as f64 / elapsed
            } else {
                0.0
            },
            frames: self.total_frames,
            render_ms: if self.window_frames > 0 {
                self.window_ms / self.window_frames as f64
            } else {
                0.0
            },
        };
        self.broadcast_text(&msg);
        self.window_frames = 0;
        self.window_ms = 0.0;
        self.window_start = Instant::now();
    }
}

async fn run_owner(mut owner: Owner, mut rx: mpsc::UnboundedReceiver<Command>) {
    let mut stats = tokio::time::interval(owner.cfg.stats_interval);
    let period = owner.cfg.fps.map(|f| Duration::from_secs_f64(1.0 / f));
    let mut fixed = tokio::time::interval(period.unwrap_or(Duration::from_secs(3600)));
    fixed.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Skip);
    loop {
        tokio::select! {
            cmd = rx.recv() => match cmd {
                Some(cmd) => owner.on_command(cmd),
                None => break,
            },
            _ = stats.tick() => owner.tick_stats(),
            _ = fixed.tick(), if period.is_some() => {
                owner.dirty = true;
                owner.maybe_render();
            }
        }
    }
}

/// Handle to a running session owner; cheap to clone.
#[derive(Clone)]
pub struct SessionHandle {
    tx: mpsc::UnboundedSender<Command>,
    static_dir: Option<Arc<PathBuf>>,
}

impl SessionHandle {
    /// Starts the owner task on the current runtime.
    pub fn spawn(asset: Arc<AvatarAsset>, cfg: ServeConfig) -> Self {
        let (tx, rx) = mpsc::unbounded_channel();
        let static_dir = cfg.static_dir.clone().map(Arc::new);
        let owner = Owner {
            core: SessionCore::new(asset, cfg.width, cfg.height),
            cfg,
            clients: HashMap::new(),
            next_client: 0,
            dirty: true,
            rendering: false,
            frame_seq: 0,
            cache: None,
            tx: tx.clone(),
            window_frames: 0,
            window_ms: 0.0,
            window_start: Instant::now(),
            total_frames: 0,
        };
        tokio::spawn(run_owner(owner, rx));
        SessionHandle { tx, static_dir }
    }

    pub fn router(self) -> Router {
        Router::new()
            .route("/session", get(ws_upgrade))
            .route("/healthz", get(|| async { "ok" }))
            .fallback(get(static_file))
            .with_state(self)
    }
}

/// Serves until the listener fails.
pub async fn serve(listener: TcpListener, asset: Arc<AvatarAsset>, cfg: ServeConfig) -> std::io::Result<()> {
    let app = SessionHandle::spawn(asset, cfg).router();
    axum::serve(listener, app).await
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(handle): State<SessionHandle>) -> Response {
    ws.on_upgrade(move |socket| client_loop(socket, handle))
}

async fn client_loop(socket: WebSocket, handle: SessionHandle) {
    let (out_tx, mut out_rx) = mpsc::unbounded_channel();
    let (reply_tx, reply_rx) = oneshot::channel();
    if handle
        .tx
        .send(Command::Join {
            out: out_tx,
            reply: reply_tx,
        })
        .is_err()
    {
        return;
    }
    let Ok(id) = reply_rx.await else { return };
    let (mut sink, mut stream) = socket.split();

    let writer = tokio::spawn(async move {
        while let Some(out) = out_rx.recv().await {
            let msg = match out {
                Outgoing::Text(t) => Message::Text(t.into()),
                Outgoing::Frame(f) => Message::Binary(f.as_ref().clone().into()),
            };
            if sink.send(msg).await.is_err() {
                break;
            }
        }
    });

    while let Some(Ok(msg)) = stream.next().await {
        match msg {
            Message::Text(text) => {
                // Parse failures are answered by the owner so the ack carries
                // the current sequence number.
                let cmd = match parse_client(text.as_str()) {
                    Ok(msg) => Command::Message { client: id, msg },
                    Err(error) => Command::Invalid { client: id, error },
                };
                if handle.tx.send(cmd).is_err() {
                    break;
                }
            }
            Message::Close(_) => break,
            _ => {}
        }
    }
    let _ = handle.tx.send(Command::Leave(id));
    writer.abort();
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js" | "mjs") => "text/javascript; charset=utf-8",
        Some("css") => "text/css; charset=utf-8",
        Some("json") => "application/json",
        Some("png") => "image/png",
        Some("svg") => "image/svg+xml",
        Some("wasm") => "application/wasm",
        Some("ico") => "image/x-icon",
        _ => "application/octet-stream",
    }
}

/// Maps a request path below `root`, refusing anything that could escape it.
pub fn resolve_static(root: &Path, uri_path: &str) -> Option<PathBuf> {
    let mut out = root.to_path_buf();
    let mut any = false;
    for part in uri_path.split('/').filter(|p| !p.is_empty()) {
        let mut comps = Path::new(part).components();
        match (comps.next(), comps.next()) {
            (Some(Component::Normal(c)), None) => out.push(c),
            _ => return None,
        }
        any = true;
    }
    if !any || uri_path.ends_with('/') {
        out.push("index.html");
    }
    Some(out)
}

async fn static_file(State(handle): State<SessionHandle>, uri: Uri) -> Response {
    let Some(root) = handle.static_dir.as_deref() else {
        return StatusCode::NOT_FOUND.into_response();
    };
    let Some(path) = resolve_static(root, uri.path()) else {
        return StatusCode::BAD_REQUEST.into_response();
    };
    match tokio::fs::read(&path).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response(),
        Err(_) => StatusCode::NOT_FOUND.into_response(),
    }
}
