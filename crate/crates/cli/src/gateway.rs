//! WebSocket gateway: one dialog session per connection.
//!
//! Client to server: `{"type":"utterance","text":...}`. Server to client:
//! `{"type":"dialog","role":"user"|"robot","text":...}`,
//! `{"type":"world","snapshot":{regions,objects,robot}}` (at most ten per
//! second, always including the latest state) and
//! `{"type":"trace","ntuple":...,"text":...}`.

use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use congra_core::cqi::{SimParams, Simulator};
use congra_core::grammar::Grammar;
use congra_core::session::{BuiltinLink, EventKind, Session, SessionObserver, TranscriptEvent};
use congra_core::specializer::{ntuple_to_canonical_text, NTuple};
use congra_core::world::SituationModel;
use futures::{SinkExt, StreamExt};
use serde_json::{json, Value};
use tokio::sync::mpsc;
use tower_http::services::ServeDir;
use tracing::{debug, info, warn};

/// Minimum spacing of world snapshots.
pub const SNAPSHOT_INTERVAL: Duration = Duration::from_millis(100);

#[derive(Clone)]
pub struct GatewayConfig {
    pub grammar: Arc<Grammar>,
    pub world: SituationModel,
    /// Static files served at the root.
    pub ui_dir: Option<PathBuf>,
    /// Move the robot at wall-clock speed.
    pub realtime: bool,
}

pub fn router(config: GatewayConfig) -> Router {
    let ui = config.ui_dir.clone();
    let app = Router::new().route("/ws", get(upgrade)).with_state(Arc::new(config));
    match ui {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    }
}

pub async fn serve(
    listener: tokio::net::TcpListener,
    grammar: Arc<Grammar>,
    world: SituationModel,
    ui_dir: PathBuf,
) -> anyhow::Result<()> {
    let config = GatewayConfig {
        grammar,
        world,
        ui_dir: Some(ui_dir),
        realtime: true,
    };
    axum::serve(listener, router(config)).await?;
    Ok(())
}

async fn upgrade(ws: WebSocketUpgrade, State(config): State<Arc<GatewayConfig>>) -> Response {
    ws.on_upgrade(move |socket| connection(socket, config))
}

pub fn snapshot(m: &SituationModel) -> Value {
    let file = m.to_file();
    json!({
        "type": "world",
        "snapshot": {
            "regions": file.regions,
            "objects": file.objects,
            "robot": file.robot,
        }
    })
}

struct Throttle {
    out: mpsc::UnboundedSender<String>,
    last_sent: Option<Instant>,
    pending: Option<Value>,
}

impl Throttle {
    fn send(&mut self, v: &Value) {
        let _ = self.out.send(v.to_string());
    }

    fn world(&mut self, m: &SituationModel) {
        let snap = snapshot(m);
        if self.last_sent.is_some_and(|t| t.elapsed() < SNAPSHOT_INTERVAL) {
            self.pending = Some(snap);
        } else {
            self.send(&snap);
            self.pending = None;
            self.last_sent = Some(Instant::now());
        }
    }

    fn flush(&mut self) {
        if let Some(snap) = self.pending.take() {
            self.send(&snap);
            self.last_sent = Some(Instant::now());
        }
    }
}

struct Observer(Arc<Mutex<Throttle>>);

impl SessionObserver for Observer {
    fn event(&mut self, e: &TranscriptEvent) {
        let role = match e.kind {
            EventKind::User => "user",
            EventKind::Reply => "robot",
            _ => return,
        };
        let msg = json!({ "type": "dialog", "role": role, "text": e.text });
        self.0.lock().expect("throttle lock").send(&msg);
    }

    fn world(&mut self, m: &SituationModel) {
        self.0.lock().expect("throttle lock").world(m);
    }

    fn ntuple(&mut self, n: &NTuple) {
        let msg = json!({
            "type": "trace",
            "ntuple": n,
            "text": ntuple_to_canonical_text(n),
        });
        self.0.lock().expect("throttle lock").send(&msg);
    }
}

/// Pull the utterance out of a client message, if it is one.
pub fn parse_client_message(text: &str) -> Option<String> {
    let v: Value = serde_json::from_str(text).ok()?;
    if v.get("type")?.as_str()? != "utterance" {
        return None;
    }
    Some(v.get("text")?.as_str()?.to_string())
}

async fn connection(socket: WebSocket, config: Arc<GatewayConfig>) {
    let (mut ws_out, mut ws_in) = socket.split();
    let (out_tx, mut out_rx) = mpsc::unbounded_channel::<String>();
    let (utter_tx, utter_rx) = std::sync::mpsc::channel::<String>();
    let throttle = Arc::new(Mutex::new(Throttle {
        out: out_tx,
        last_sent: None,
        pending: None,
    }));
    let link = BuiltinLink::new(
        Simulator::new(config.world.clone(), SimParams::default()),
        config.realtime,
    );
    let halt = link.halt_flag();
    let worker = {
        let throttle = throttle.clone();
        let config = config.clone();
        tokio::task::spawn_blocking(move || {
            let observer = Box::new(Observer(throttle.clone()));
            let mut session = match Session::new(config.grammar.clone(), config.world.clone(), Box::new(link), Some(observer)) {
                Ok(s) => s,
                Err(e) => {
                    warn!(error = %e, "session failed to start");
                    return;
                }
            };
            throttle.lock().expect("throttle lock").flush();
            while let Ok(text) = utter_rx.recv() {
                session.repl_turn(&text);
                throttle.lock().expect("throttle lock").flush();
            }
            debug!("session closed");
        })
    };
    let writer = tokio::spawn(async move {
        while let Some(msg) = out_rx.recv().await {
            if ws_out.send(Message::Text(msg.into())).await.is_err() {
                break;
            }
        }
    });
    info!("client connected");
    while let Some(Ok(msg)) = ws_in.next().await {
        match msg {
            Message::Text(t) => match parse_client_message(&t) {
                Some(text) => {
                    if utter_tx.send(text).is_err() {
                        break;
                    }
                }
                None => debug!(message = %t, "ignoring client message"),
            },
            Message::Close(_) => break,
            _ => {}
        }
    }
    info!("client disconnected");
    halt.store(true, std::sync::atomic::Ordering::Relaxed);
    drop(utter_tx);
    let _ = worker.await;
    writer.abort();
}
