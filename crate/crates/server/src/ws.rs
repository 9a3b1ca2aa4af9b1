//! Websocket transport: one JSON frame per text message on `/ws`.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use notebridge_core::{ErrorCode, Frame};
use tokio::net::TcpListener;
use tokio::sync::mpsc;

use crate::sync::{Effects, ServerFault, SessionId, SyncServer};

/// How long a fresh connection may take to send its hello.
const HELLO_TIMEOUT: Duration = Duration::from_secs(10);

enum Outgoing {
    Frame(Frame),
    Ping,
    Close,
}

#[derive(Clone)]
pub struct Transport {
    hub: Arc<SyncServer>,
    peers: Arc<Mutex<HashMap<SessionId, mpsc::UnboundedSender<Outgoing>>>>,
}

pub fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

impl Transport {
    pub fn new(hub: Arc<SyncServer>) -> Self {
        Transport { hub, peers: Arc::default() }
    }

    pub fn router(&self) -> Router {
        Router::new().route("/ws", get(upgrade)).with_state(self.clone())
    }

    fn dispatch(&self, fx: Effects) {
        let mut peers = self.peers.lock().expect("peer table");
        for out in fx.outbound {
            if let Some(tx) = peers.get(&out.to) {
                let _ = tx.send(Outgoing::Frame(out.frame));
            }
        }
        for session in fx.closed {
            if let Some(tx) = peers.remove(&session) {
                let _ = tx.send(Outgoing::Close);
            }
        }
    }

    fn ping_all(&self) {
        for tx in self.peers.lock().expect("peer table").values() {
            let _ = tx.send(Outgoing::Ping);
        }
    }

    async fn call<T: Send + 'static>(&self, f: impl FnOnce(&SyncServer) -> T + Send + 'static) -> T {
        let hub = self.hub.clone();
        tokio::task::spawn_blocking(move || f(&hub)).await.expect("sync task panicked")
    }

    /// Heartbeats every `heartbeat` and closes sessions the hub considers idle.
    pub fn spawn_heartbeat(&self, heartbeat: Duration) -> tokio::task::JoinHandle<()> {
        let this = self.clone();
        tokio::spawn(async move {
            let mut interval = tokio::time::interval(heartbeat);
            loop {
                interval.tick().await;
                this.ping_all();
                let fx = this.call(|hub| hub.tick(now_ms())).await;
                this.dispatch(fx);
            }
        })
    }

    async fn run_socket(self, socket: WebSocket) {
        let (mut sink, mut stream) = socket.split();
        let hello = match tokio::time::timeout(HELLO_TIMEOUT, next_frame(&mut stream)).await {
            Ok(Some(Ok(frame))) => frame,
            Ok(Some(Err(msg))) => {
                let _ = sink.send(text(&Frame::error(ErrorCode::MalformedFrame, msg))).await;
                return;
            }
            _ => return,
        };
        let opened = self.call(move |hub| hub.open_session(&hello, now_ms())).await;
        let (session, fx) = match opened {
            Ok(Ok(pair)) => pair,
            Ok(Err(frame)) => {
                let _ = sink.send(text(&frame)).await;
                let _ = sink.close().await;
                return;
            }
            Err(fault) => {
                tracing::error!(%fault, "cannot open session");
                let _ = sink.send(text(&Frame::error(ErrorCode::Internal, fault.to_string()))).await;
                return;
            }
        };
        let (tx, mut rx) = mpsc::unbounded_channel();
        self.peers.lock().expect("peer table").insert(session, tx);
        self.dispatch(fx);

        let writer = tokio::spawn(async move {
            while let Some(out) = rx.recv().await {
                let sent = match out {
                    Outgoing::Frame(frame) => sink.send(text(&frame)).await,
                    Outgoing::Ping => sink.send(Message::Ping(Vec::new().into())).await,
                    Outgoing::Close => {
                        let _ = sink.close().await;
                        break;
                    }
                };
                if sent.is_err() {
                    break;
                }
            }
        });

        while let Some(msg) = stream.next().await {
            let frame = match msg {
                Ok(Message::Text(t)) => Frame::from_json(t.as_str()),
                Ok(Message::Pong(_)) | Ok(Message::Ping(_)) => {
                    self.call(move |hub| hub.touch(session, now_ms())).await;
                    continue;
                }
                Ok(Message::Binary(_)) => {
                    self.reply(session, Frame::error(ErrorCode::MalformedFrame, "binary frames are not supported"));
                    continue;
                }
                Ok(Message::Close(_)) | Err(_) => break,
            };
            let frame = match frame {
                Ok(f) => f,
                Err(e) => {
                    self.reply(session, Frame::error(ErrorCode::MalformedFrame, e.to_string()));
                    continue;
                }
            };
            match self.call(move |hub| hub.handle_frame(session, frame, now_ms())).await {
                Ok(fx) => self.dispatch(fx),
                Err(fault) => {
                    tracing::error!(%fault, session, "frame handling failed");
                    self.reply(session, Frame::error(ErrorCode::Internal, fault.to_string()));
                    if matches!(fault, ServerFault::Down | ServerFault::InjectedCrash(_)) {
                        break;
                    }
                }
            }
            if !self.peers.lock().expect("peer table").contains_key(&session) {
                break; // closed by the hub
            }
        }

        let fx = self.call(move |hub| hub.disconnect(session)).await;
        if let Some(tx) = self.peers.lock().expect("peer table").remove(&session) {
            let _ = tx.send(Outgoing::Close);
        }
        self.dispatch(fx);
        let _ = writer.await;
    }

    fn reply(&self, session: SessionId, frame: Frame) {
        if let Some(tx) = self.peers.lock().expect("peer table").get(&session) {
            let _ = tx.send(Outgoing::Frame(frame));
        }
    }
}

async fn upgrade(State(transport): State<Transport>, ws: WebSocketUpgrade) -> Response {
    ws.on_upgrade(move |socket| transport.run_socket(socket))
}

fn text(frame: &Frame) -> Message {
    Message::Text(frame.to_json().into())
}

async fn next_frame(
    stream: &mut futures::stream::SplitStream<WebSocket>,
) -> Option<Result<Frame, String>> {
    loop {
        match stream.next().await? {
            Ok(Message::Text(t)) => return Some(Frame::from_json(t.as_str()).map_err(|e| e.to_string())),
            Ok(Message::Ping(_)) | Ok(Message::Pong(_)) => continue,
            Ok(Message::Binary(_)) => return Some(Err("binary frames are not supported".into())),
            Ok(Message::Close(_)) | Err(_) => return None,
        }
    }
}

/// Serves `/ws` on an already bound listener until the future is dropped.
pub async fn serve_on(listener: TcpListener, hub: Arc<SyncServer>, heartbeat: Duration) -> std::io::Result<()> {
    let transport = Transport::new(hub);
    let beat = transport.spawn_heartbeat(heartbeat);
    let result = axum::serve(listener, transport.router()).await;
    beat.abort();
    result
}

/// Binds `addr` and serves in the background; returns the bound address.
pub async fn spawn(addr: &str, hub: Arc<SyncServer>, heartbeat: Duration) -> std::io::Result<SocketAddr> {
    let listener = TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    tokio::spawn(async move {
        if let Err(e) = serve_on(listener, hub, heartbeat).await {
            tracing::error!(error = %e, "server stopped");
        }
    });
    Ok(local)
}
