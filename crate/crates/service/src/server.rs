use std::convert::Infallible;
use std::future::Future;
use std::net::SocketAddr;
use std::path::{Component, Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::extract::State;
use axum::http::{header, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use bytes::Bytes;
use futures_util::Stream;
use nextmon_core::harness::RunConfig;
use tokio::net::TcpListener;
use tokio::sync::{broadcast, mpsc, oneshot, watch};
use tokio::task::JoinHandle;
use tokio::time::{sleep_until, Instant};

use crate::error::{CommandError, ServiceError};
use crate::protocol::{CommandAck, CommandRejection, ControlCommand, StateView, TelemetryFrame, PROTOCOL_VERSION};
use crate::session::Session;

const INDEX_HTML: &str = include_str!("../assets/index.html");
const INBOX_CAPACITY: usize = 64;

type Reply = oneshot::Sender<Result<CommandAck, CommandError>>;

/// Cheap-to-clone access to a running simulation loop.
#[derive(Debug, Clone)]
pub struct ServiceHandle {
    inbox: mpsc::Sender<(ControlCommand, Reply)>,
    frames: broadcast::Sender<Arc<TelemetryFrame>>,
    view: watch::Receiver<Arc<StateView>>,
}

impl ServiceHandle {
    /// Queues a command for the next step boundary and waits until it
    /// has been applied or rejected.
    pub async fn command(&self, cmd: ControlCommand) -> Result<CommandAck, CommandError> {
        let (tx, rx) = oneshot::channel();
        self.inbox.send((cmd, tx)).await.map_err(|_| CommandError::Stopped)?;
        rx.await.map_err(|_| CommandError::Stopped)?
    }

    /// Raw broadcast receiver; see [`frames`] for gap flagging.
    pub fn subscribe(&self) -> broadcast::Receiver<Arc<TelemetryFrame>> {
        self.frames.subscribe()
    }

    pub fn state(&self) -> StateView {
        StateView::clone(&self.view.borrow())
    }
}

/// Frames from a subscription in order. When the bounded queue overflowed
/// and older frames were dropped, the next delivered frame has `gap` set.
pub fn frames(rx: broadcast::Receiver<Arc<TelemetryFrame>>) -> impl Stream<Item = TelemetryFrame> + Send {
    futures_util::stream::unfold(rx, |mut rx| async move {
        let mut gap = false;
        loop {
            match rx.recv().await {
                Ok(f) => {
                    let mut frame = TelemetryFrame::clone(&f);
                    frame.gap = gap;
                    return Some((frame, rx));
                }
                Err(broadcast::error::RecvError::Lagged(_)) => gap = true,
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    })
}

/// Starts the simulation loop on the current runtime. `queue` bounds the
/// frames buffered per subscriber.
pub fn spawn(session: Session, queue: usize) -> (ServiceHandle, JoinHandle<Result<(), ServiceError>>) {
    let (inbox, rx) = mpsc::channel(INBOX_CAPACITY);
    let (frames, _) = broadcast::channel(queue.max(1));
    let (view_tx, view) = watch::channel(Arc::new(StateView {
        schema_version: PROTOCOL_VERSION,
        status: session.status(),
        frame: None,
    }));
    let task = tokio::spawn(run_loop(session, rx, frames.clone(), view_tx));
    (ServiceHandle { inbox, frames, view }, task)
}

fn period(session: &Session) -> Duration {
    Duration::from_secs_f64(session.dt() / session.speed() as f64)
}

fn publish_status(session: &Session, view: &watch::Sender<Arc<StateView>>, frame: Option<Arc<TelemetryFrame>>) {
    view.send_modify(|v| {
        let frame = frame.map(|f| TelemetryFrame::clone(&f)).or_else(|| v.frame.clone());
        *v = Arc::new(StateView {
            schema_version: PROTOCOL_VERSION,
            status: session.status(),
            frame,
        });
    });
}

fn handle_command(session: &mut Session, view: &watch::Sender<Arc<StateView>>, cmd: ControlCommand, reply: Reply) {
    let result = session.apply(&cmd).map(|()| CommandAck {
        accepted: true,
        effective_step: session.next_step(),
        status: session.status(),
    });
    match &result {
        Ok(_) => tracing::info!(?cmd, step = session.next_step(), "command applied"),
        Err(e) => tracing::warn!(?cmd, error = %e, "command rejected"),
    }
    publish_status(session, view, None);
    let _ = reply.send(result);
}

/// The only writer of plant and learner state. Commands are applied in
/// arrival order between steps; steps are paced at dt / speed.
async fn run_loop(
    mut session: Session,
    mut inbox: mpsc::Receiver<(ControlCommand, Reply)>,
    frames: broadcast::Sender<Arc<TelemetryFrame>>,
    view: watch::Sender<Arc<StateView>>,
) -> Result<(), ServiceError> {
    let mut last = Instant::now();
    loop {
        if session.is_paused() {
            let Some((cmd, reply)) = inbox.recv().await else {
                return Ok(());
            };
            handle_command(&mut session, &view, cmd, reply);
            last = Instant::now();
            continue;
        }
        let deadline = last + period(&session);
        tokio::select! {
            biased;
            msg = inbox.recv() => {
                let Some((cmd, reply)) = msg else { return Ok(()) };
                handle_command(&mut session, &view, cmd, reply);
            }
            _ = sleep_until(deadline) => {
                let frame = match session.advance() {
                    Ok(f) => f.map(Arc::new),
                    Err(e) => {
                        tracing::error!(error = %e, "simulation stopped");
                        return Err(e);
                    }
                };
                publish_status(&session, &view, frame.clone());
                if let Some(f) = frame {
                    // No subscribers is fine.
                    let _ = frames.send(f);
                }
                let now = Instant::now();
                // Skip ahead rather than burst after a stall.
                last = if now > deadline + period(&session) { now } else { deadline };
            }
        }
    }
}

#[derive(Clone)]
struct AppState {
    handle: ServiceHandle,
    assets: Option<PathBuf>,
}

/// HTTP routes for a running loop.
pub fn router(handle: ServiceHandle, assets: Option<PathBuf>) -> Router {
    Router::new()
        .route("/stream", get(stream))
        .route("/command", post(command))
        .route("/state", get(state))
        .route("/healthz", get(healthz))
        .fallback(get(asset))
        .with_state(AppState { handle, assets })
}

async fn stream(State(app): State<AppState>) -> Response {
    use futures_util::StreamExt;
    let lines = frames(app.handle.subscribe()).map(|f| {
        let mut line = serde_json::to_vec(&f).expect("frame serializes");
        line.push(b'\n');
        Ok::<_, Infallible>(Bytes::from(line))
    });
    (
        [
            (header::CONTENT_TYPE, "application/x-ndjson"),
            (header::CACHE_CONTROL, "no-cache"),
        ],
        Body::from_stream(lines),
    )
        .into_response()
}

fn rejection(status: StatusCode, e: &CommandError) -> Response {
    let body = CommandRejection {
        accepted: false,
        error: e.to_string(),
    };
    (status, Json(body)).into_response()
}

async fn command(State(app): State<AppState>, body: Bytes) -> Response {
    let cmd: ControlCommand = match serde_json::from_slice(&body) {
        Ok(c) => c,
        Err(e) => return rejection(StatusCode::BAD_REQUEST, &CommandError::Malformed(e.to_string())),
    };
    match app.handle.command(cmd).await {
        Ok(ack) => Json(ack).into_response(),
        Err(e @ CommandError::Stopped) => rejection(StatusCode::SERVICE_UNAVAILABLE, &e),
        Err(e) => rejection(StatusCode::UNPROCESSABLE_ENTITY, &e),
    }
}

async fn state(State(app): State<AppState>) -> Json<StateView> {
    Json(app.handle.state())
}

async fn healthz() -> &'static str {
    "ok\n"
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js" | "mjs") => "text/javascript; charset=utf-8",
        Some("css") => "text/css; charset=utf-8",
        Some("json" | "map") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        Some("ico") => "image/x-icon",
        Some("woff2") => "font/woff2",
        _ => "application/octet-stream",
    }
}

/// Dashboard files from the assets directory, or a built-in page at `/`
/// when none is configured.
async fn asset(State(app): State<AppState>, uri: Uri) -> Response {
    let rel = Path::new(uri.path().trim_start_matches('/'));
    let Some(dir) = app.assets else {
        if rel.as_os_str().is_empty() || rel == Path::new("index.html") {
            return ([(header::CONTENT_TYPE, "text/html; charset=utf-8")], INDEX_HTML).into_response();
        }
        return StatusCode::NOT_FOUND.into_response();
    };
    if !rel.components().all(|c| matches!(c, Component::Normal(_))) {
        return StatusCode::NOT_FOUND.into_response();
    }
    let path = if rel.as_os_str().is_empty() {
        dir.join("index.html")
    } else {
        dir.join(rel)
    };
    match tokio::fs::read(&path).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response(),
        Err(_) => StatusCode::NOT_FOUND.into_response(),
    }
}

/// A bound listener with its simulation loop already running.
pub struct Service {
    listener: TcpListener,
    addr: SocketAddr,
    handle: ServiceHandle,
    task: JoinHandle<Result<(), ServiceError>>,
    assets: Option<PathBuf>,
}

impl Service {
    /// Validates the config, binds `addr` and starts stepping. When
    /// `log_dir` is given every step is appended there as CSV.
    pub async fn bind(config: &RunConfig, addr: &str, log_dir: Option<&Path>) -> Result<Self, ServiceError> {
        let mut session = Session::new(config)?;
        if let Some(dir) = log_dir {
            session = session.with_log(dir)?;
        }
        let listener = TcpListener::bind(addr).await.map_err(|source| ServiceError::Bind {
            addr: addr.to_string(),
            source,
        })?;
        let local = listener.local_addr().map_err(|source| ServiceError::Bind {
            addr: addr.to_string(),
            source,
        })?;
        let (handle, task) = spawn(session, config.service.subscriber_queue);
        Ok(Service {
            listener,
            addr: local,
            handle,
            task,
            assets: config.service.assets_dir.clone(),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn handle(&self) -> ServiceHandle {
        self.handle.clone()
    }

    /// Serves until the simulation faults or the server fails.
    pub async fn run(self) -> Result<(), ServiceError> {
        self.run_until(std::future::pending()).await
    }

    /// Serves until `shutdown` resolves, the simulation faults or the
    /// server fails.
    pub async fn run_until(self, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<(), ServiceError> {
        let addr = self.addr;
        tracing::info!(%addr, "serving");
        let app = router(self.handle, self.assets);
        let server = axum::serve(self.listener, app).with_graceful_shutdown(shutdown);
        let mut task = self.task;
        tokio::select! {
            r = server => r.map_err(|source| ServiceError::Serve { addr, source }),
            r = &mut task => match r {
                Ok(r) => r,
                Err(e) => panic!("simulation loop panicked: {e}"),
            },
        }
    }
}

/// Binds and serves until the simulation faults or the server fails.
pub async fn serve(config: &RunConfig, addr: &str, log_dir: Option<&Path>) -> Result<(), ServiceError> {
    Service::bind(config, addr, log_dir).await?.run().await
}
