//! Network front ends: the length-prefixed TCP channel and the browser
//! WebSocket bridge, plus the static UI files.

use crate::fleet::FleetConfig;
use crate::frame_codec;
use crate::hub::{Hub, HubConfig, SessionId};
use axum::extract::ws::{Message as WsMessage, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use cage_core::wire::Envelope;
use futures::{SinkExt, StreamExt};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::watch;
use tokio::task::JoinHandle;
use tokio_util::codec::Framed;
use tower_http::services::ServeDir;

pub const DEFAULT_UI_DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/ui");
const SWEEP_PERIOD: Duration = Duration::from_millis(200);

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    /// WebSocket bridge and static UI; disabled when `None`.
    pub http: Option<SocketAddr>,
    pub fleet: FleetConfig,
    pub hub: HubConfig,
    /// Control-rights audit trail as NDJSON.
    pub audit_log: Option<PathBuf>,
    pub ui_dir: PathBuf,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen: SocketAddr::from(([127, 0, 0, 1], 7400)),
            http: Some(SocketAddr::from(([127, 0, 0, 1], 7401))),
            fleet: FleetConfig::default(),
            hub: HubConfig::default(),
            audit_log: None,
            ui_dir: PathBuf::from(DEFAULT_UI_DIR),
        }
    }
}

pub struct RunningService {
    pub hub: Arc<Hub>,
    pub tcp_addr: SocketAddr,
    pub http_addr: Option<SocketAddr>,
    shutdown: watch::Sender<bool>,
    tasks: Vec<JoinHandle<()>>,
}

impl RunningService {
    pub async fn shutdown(self) {
        let _ = self.shutdown.send(true);
        for t in self.tasks {
            let _ = t.await;
        }
    }
}

pub async fn start(cfg: ServiceConfig) -> std::io::Result<RunningService> {
    let hub = Arc::new(Hub::new(cfg.hub.clone(), &cfg.fleet));
    if let Some(path) = &cfg.audit_log {
        let file = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
        hub.set_audit_sink(Box::new(file));
    }
    let (shutdown, stop) = watch::channel(false);
    let mut tasks = Vec::new();

    let listener = TcpListener::bind(cfg.listen).await?;
    let tcp_addr = listener.local_addr()?;
    tasks.push(tokio::spawn(accept_loop(listener, hub.clone(), stop.clone())));

    let http_addr = match cfg.http {
        Some(addr) => {
            let listener = TcpListener::bind(addr).await?;
            let local = listener.local_addr()?;
            let app = router(hub.clone(), cfg.ui_dir.clone());
            let mut stop = stop.clone();
            tasks.push(tokio::spawn(async move {
                let served = axum::serve(listener, app).with_graceful_shutdown(async move {
                    let _ = stop.wait_for(|s| *s).await;
                });
                if let Err(e) = served.await {
                    tracing::error!(error = %e, "http server failed");
                }
            }));
            Some(local)
        }
        None => None,
    };

    let sweeper = hub.clone();
    let mut stop_sweep = stop.clone();
    tasks.push(tokio::spawn(async move {
        let mut every = tokio::time::interval(SWEEP_PERIOD);
        loop {
            tokio::select! {
                _ = every.tick() => sweeper.sweep(Instant::now()),
                _ = stop_sweep.changed() => break,
            }
        }
    }));

    tracing::info!(%tcp_addr, ?http_addr, "ccc service listening");
    Ok(RunningService { hub, tcp_addr, http_addr, shutdown, tasks })
}

/// Run until interrupted.
pub async fn run_service(cfg: ServiceConfig) -> std::io::Result<()> {
    let service = start(cfg).await?;
    tokio::signal::ctrl_c().await?;
    tracing::info!("shutting down");
    service.shutdown().await;
    Ok(())
}

async fn accept_loop(listener: TcpListener, hub: Arc<Hub>, mut stop: watch::Receiver<bool>) {
    loop {
        tokio::select! {
            accepted = listener.accept() => match accepted {
                Ok((stream, peer)) => {
                    let _ = stream.set_nodelay(true);
                    tokio::spawn(serve_tcp(stream, peer, hub.clone(), stop.clone()));
                }
                Err(e) => tracing::warn!(error = %e, "accept failed"),
            },
            _ = stop.changed() => break,
        }
    }
}

async fn serve_tcp(stream: TcpStream, peer: SocketAddr, hub: Arc<Hub>, mut stop: watch::Receiver<bool>) {
    let (session, mut outbound) = hub.connect();
    tracing::debug!(%peer, session, "tcp session opened");
    let mut framed = Framed::new(stream, frame_codec());
    loop {
        tokio::select! {
            frame = framed.next() => match frame {
                Some(Ok(bytes)) => dispatch(&hub, session, &bytes),
                Some(Err(e)) => {
                    tracing::warn!(%peer, error = %e, "bad frame, closing");
                    break;
                }
                None => break,
            },
            env = outbound.recv() => match env {
                Some(env) => {
                    if framed.send(bytes::Bytes::from(env.to_bytes())).await.is_err() {
                        break;
                    }
                }
                // the hub dropped this session
                None => break,
            },
            _ = stop.changed() => break,
        }
    }
    hub.disconnect(session);
    tracing::debug!(%peer, session, "tcp session closed");
}

fn dispatch(hub: &Hub, session: SessionId, bytes: &[u8]) {
    match Envelope::from_bytes(bytes) {
        Ok(env) => hub.handle(session, env),
        Err(e) => tracing::warn!(session, error = %e, "dropping undecodable envelope"),
    }
}

pub fn router(hub: Arc<Hub>, ui_dir: PathBuf) -> Router {
    Router::new().route("/ws", get(ws_upgrade)).fallback_service(ServeDir::new(ui_dir)).with_state(hub)
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(hub): State<Arc<Hub>>) -> Response {
    ws.max_message_size(cage_core::wire::MAX_FRAME_LEN).on_upgrade(move |socket| serve_ws(socket, hub))
}

async fn serve_ws(mut socket: WebSocket, hub: Arc<Hub>) {
    let (session, mut outbound) = hub.connect();
    loop {
        tokio::select! {
            msg = socket.recv() => match msg {
                Some(Ok(WsMessage::Text(text))) => dispatch(&hub, session, text.as_bytes()),
                Some(Ok(WsMessage::Binary(bytes))) => dispatch(&hub, session, &bytes),
                Some(Ok(WsMessage::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            },
            env = outbound.recv() => match env {
                Some(env) => {
                    let text = serde_json::to_string(&env).expect("envelope serializes infallibly");
                    if socket.send(WsMessage::Text(text.into())).await.is_err() {
                        break;
                    }
                }
                None => break,
            },
        }
    }
    hub.disconnect(session);
}
