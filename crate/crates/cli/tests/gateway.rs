#[path = "../../core/tests/oracles/mod.rs"]
mod oracles;

use std::net::SocketAddr;
use std::time::Duration;

use congra::gateway::{parse_client_message, router, snapshot, GatewayConfig};
use futures::{SinkExt, StreamExt};
use oracles::{fixture_world, shipped_grammar};
use serde_json::{json, Value};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::time::timeout;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

type Client = WebSocketStream<MaybeTlsStream<TcpStream>>;

const WAIT: Duration = Duration::from_secs(20);

async fn start(world: &str, ui_dir: Option<std::path::PathBuf>) -> SocketAddr {
    let g = shipped_grammar();
    let config = GatewayConfig {
        world: fixture_world(&g, world),
        grammar: g,
        ui_dir,
        realtime: false,
    };
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router(config)).await.unwrap() });
    addr
}

async fn connect(addr: SocketAddr) -> Client {
    connect_async(format!("ws://{addr}/ws")).await.expect("websocket handshake").0
}

async fn say(ws: &mut Client, text: &str) {
    let msg = json!({ "type": "utterance", "text": text }).to_string();
    ws.send(Message::Text(msg.into())).await.unwrap();
}

/// Collect server messages until `done` accepts one.
async fn until(ws: &mut Client, done: impl Fn(&Value) -> bool) -> Vec<Value> {
    let mut seen = Vec::new();
    loop {
        let msg = timeout(WAIT, ws.next())
            .await
            .unwrap_or_else(|_| panic!("timed out; saw {seen:#?}"))
            .expect("connection open")
            .unwrap();
        let Message::Text(t) = msg else { continue };
        let v: Value = serde_json::from_str(&t).unwrap();
        let stop = done(&v);
        seen.push(v);
        if stop {
            return seen;
        }
    }
}

fn robot_says(v: &Value, text: &str) -> bool {
    v["type"] == "dialog" && v["role"] == "robot" && v["text"] == text
}

fn marker_blue_held(v: &Value) -> bool {
    v["type"] == "world"
        && v["snapshot"]["objects"]
            .as_array()
            .unwrap()
            .iter()
            .any(|o| o["id"] == "marker_blue" && o["level"] == "held:darwin")
}

#[tokio::test(flavor = "multi_thread")]
async fn clarification_dialog_over_websocket() {
    let addr = start("lab.json", None).await;
    let mut ws = connect(addr).await;

    say(&mut ws, "Darwin, pick up the marker under the table").await;
    let first = until(&mut ws, |v| robot_says(v, "Which one?")).await;
    assert!(first.iter().any(|v| v["type"] == "world"), "no initial snapshot");
    assert!(first
        .iter()
        .any(|v| v["type"] == "dialog" && v["role"] == "user" && v["text"] == "Darwin, pick up the marker under the table"));
    assert!(first.iter().any(|v| v["type"] == "trace" && v["text"].is_string()));

    say(&mut ws, "The blue one").await;
    let second = until(&mut ws, marker_blue_held).await;
    assert!(second.iter().any(|v| robot_says(v, "OK.")));
    let last = second.last().unwrap();
    assert_eq!(last["snapshot"]["robot"]["holding"], "marker_blue");
}

#[tokio::test(flavor = "multi_thread")]
async fn non_utterance_messages_are_ignored() {
    let addr = start("lab.json", None).await;
    let mut ws = connect(addr).await;
    ws.send(Message::Text(r#"{"type":"ping"}"#.into())).await.unwrap();
    ws.send(Message::Text("not json".into())).await.unwrap();
    say(&mut ws, "Which marker is blue?").await;
    let seen = until(&mut ws, |v| v["type"] == "dialog" && v["role"] == "robot").await;
    let replies: Vec<_> = seen.iter().filter(|v| v["type"] == "dialog" && v["role"] == "robot").collect();
    assert_eq!(replies.len(), 1);
    assert_eq!(replies[0]["text"], "The blue marker is marker_blue.");
}

#[tokio::test(flavor = "multi_thread")]
async fn sessions_are_independent_per_connection() {
    let addr = start("lab.json", None).await;
    let mut a = connect(addr).await;
    say(&mut a, "Darwin, pick up the marker under the table").await;
    until(&mut a, |v| robot_says(v, "Which one?")).await;

    let mut b = connect(addr).await;
    say(&mut b, "The blue one").await;
    let seen = until(&mut b, |v| v["type"] == "dialog" && v["role"] == "robot").await;
    assert!(!seen.iter().any(marker_blue_held));
}

#[tokio::test(flavor = "multi_thread")]
async fn static_files_are_served_beside_the_socket() {
    let dir = std::env::temp_dir().join(format!("congra-ui-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join("index.html"), "<p>congra</p>").unwrap();
    let addr = start("lab.json", Some(dir.clone())).await;
    let mut s = TcpStream::connect(addr).await.unwrap();
    s.write_all(b"GET /index.html HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n")
        .await
        .unwrap();
    let mut body = String::new();
    timeout(WAIT, s.read_to_string(&mut body)).await.unwrap().unwrap();
    std::fs::remove_dir_all(&dir).unwrap();
    assert!(body.starts_with("HTTP/1.1 200"), "{body}");
    assert!(body.ends_with("<p>congra</p>"), "{body}");
}

#[test]
fn client_messages_must_be_utterances() {
    assert_eq!(
        parse_client_message(r#"{"type":"utterance","text":"The blue one"}"#).as_deref(),
        Some("The blue one")
    );
    assert_eq!(parse_client_message(r#"{"type":"reset"}"#), None);
    assert_eq!(parse_client_message(r#"{"type":"utterance","text":3}"#), None);
    assert_eq!(parse_client_message("{"), None);
}

#[test]
fn snapshot_lists_the_whole_world() {
    let g = shipped_grammar();
    let m = fixture_world(&g, "lab.json");
    let v = snapshot(&m);
    assert_eq!(v["type"], "world");
    assert_eq!(v["snapshot"]["regions"].as_array().unwrap().len(), 2);
    assert_eq!(v["snapshot"]["objects"].as_array().unwrap().len(), 2);
    assert_eq!(v["snapshot"]["robot"]["id"], "darwin");
}
