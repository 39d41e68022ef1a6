use std::net::TcpStream;
use std::path::Path;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use palmkey_gateway::{Gateway, GatewayError, GatewayOptions};
use palmkey_pipeline::{run_loop, Pipeline, PipelineConfig, ReportLog, ScriptSource};
use serde_json::Value;
use tungstenite::stream::MaybeTlsStream;

const TIMEOUT: Duration = Duration::from_secs(20);

struct TestClient {
    rx: Receiver<Value>,
    tx: Sender<String>,
    handle: Option<JoinHandle<()>>,
}

impl TestClient {
    fn connect(gw: &Gateway) -> Self {
        let (mut ws, _) = tungstenite::connect(format!("ws://{}", gw.local_addr())).unwrap();
        if let MaybeTlsStream::Plain(s) = ws.get_mut() {
            s.set_read_timeout(Some(Duration::from_millis(5))).unwrap();
        }
        let (in_tx, rx) = mpsc::channel();
        let (tx, out_rx) = mpsc::channel::<String>();
        let handle = std::thread::spawn(move || loop {
            while let Ok(text) = out_rx.try_recv() {
                ws.send(text.into()).unwrap();
            }
            match ws.read() {
                Ok(tungstenite::Message::Text(t)) => {
                    if in_tx.send(serde_json::from_str(&t).unwrap()).is_err() {
                        return;
                    }
                }
                Ok(tungstenite::Message::Close(_)) => {
                    let _ = ws.flush();
                }
                Ok(_) => {}
                Err(tungstenite::Error::Io(e))
                    if matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut) => {}
                Err(_) => return,
            }
        });
        Self {
            rx,
            tx,
            handle: Some(handle),
        }
    }

    fn next(&self) -> Value {
        self.rx.recv_timeout(TIMEOUT).expect("message from gateway")
    }

    fn send(&self, v: Value) {
        self.tx.send(v.to_string()).unwrap();
    }

    /// Messages until the server closes the connection.
    fn drain(mut self) -> Vec<Value> {
        let mut out = Vec::new();
        loop {
            match self.rx.recv_timeout(TIMEOUT) {
                Ok(v) => out.push(v),
                Err(RecvTimeoutError::Disconnected) => break,
                Err(RecvTimeoutError::Timeout) => panic!("gateway did not close"),
            }
        }
        self.handle.take().unwrap().join().unwrap();
        out
    }
}

fn fox() -> ScriptSource {
    ScriptSource::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scripts/fox.gesture")).unwrap()
}

fn pipeline(config: PipelineConfig) -> Pipeline {
    Pipeline::new(config, (640, 480), 30.0).unwrap()
}

fn start(p: &Pipeline) -> Gateway {
    Gateway::for_pipeline("127.0.0.1:0", p, GatewayOptions::default()).unwrap()
}

fn handshake(c: &TestClient) -> Value {
    assert_eq!(c.next(), serde_json::json!({"type": "hello", "version": 1}));
    let spec = c.next();
    assert_eq!(spec["type"], "spec");
    assert_eq!(spec["seq"], 1);
    spec
}

/// Keep applying commands until an ack arrives.
fn await_ack(gw: &mut Gateway, p: &mut Pipeline, c: &TestClient) -> Value {
    let deadline = Instant::now() + TIMEOUT;
    loop {
        gw.apply_pending(p);
        if let Ok(v) = c.rx.recv_timeout(Duration::from_millis(10)) {
            if v["type"] == "command_ack" {
                return v;
            }
        }
        assert!(Instant::now() < deadline, "no ack");
    }
}

#[test]
fn hello_then_spec() {
    let p = pipeline(PipelineConfig::default());
    let gw = start(&p);
    let c = TestClient::connect(&gw);
    let spec = handshake(&c);
    assert_eq!(spec["page"], "letters_am");
    assert_eq!(spec["interface"]["name"], "keyboard");
    let pages: Vec<&str> = spec["interface"]["pages"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["id"].as_str().unwrap())
        .collect();
    assert_eq!(pages, ["letters_am", "letters_nz", "digits"]);
    gw.shutdown();
    assert!(c.drain().is_empty());
}

#[test]
fn fox_run_streams_three_orders() {
    let mut p = pipeline(PipelineConfig::default());
    let mut gw = start(&p);
    let c = TestClient::connect(&gw);
    handshake(&c);
    let summary = run_loop(&mut p, &mut fox(), &mut gw).unwrap();
    assert_eq!(summary.text_buffer.as_deref(), Some("fox"));
    assert_eq!(gw.dropped(), 0);
    gw.shutdown();
    let msgs = c.drain();

    let seqs: Vec<u64> = msgs.iter().map(|m| m["seq"].as_u64().unwrap()).collect();
    assert!(seqs.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(seqs[0], 2);
    let orders: Vec<(i64, i64, i64)> = msgs
        .iter()
        .filter(|m| m["type"] == "order_executed")
        .map(|m| (m["code"].as_i64().unwrap(), m["p1"].as_i64().unwrap(), m["p2"].as_i64().unwrap()))
        .collect();
    assert_eq!(orders, [(1, 102, 0), (1, 111, 0), (1, 120, 0)]);
    let texts: Vec<&str> = msgs
        .iter()
        .filter(|m| m["type"] == "text_buffer")
        .map(|m| m["text"].as_str().unwrap())
        .collect();
    assert_eq!(texts.last(), Some(&"fox"));
    let cursors = msgs.iter().filter(|m| m["type"] == "cursor").count();
    assert_eq!(cursors as u64, summary.frames);
    let last_cursor = msgs.iter().rev().find(|m| m["type"] == "cursor").unwrap();
    assert_eq!(last_cursor["page"], "letters_nz");
    for key in ["x", "y", "pressed", "page", "seq", "type"] {
        assert!(last_cursor.get(key).is_some(), "{key}");
    }
}

fn cursor_track(config: PipelineConfig) -> Vec<(f64, f64)> {
    let mut p = pipeline(config);
    let mut log = ReportLog::default();
    run_loop(&mut p, &mut fox(), &mut log).unwrap();
    log.reports.iter().map(|r| r.cursor).collect()
}

#[test]
fn mapping_mode_toggle_changes_trajectory() {
    let mut p = pipeline(PipelineConfig::default());
    let mut gw = start(&p);
    let c = TestClient::connect(&gw);
    handshake(&c);
    c.send(serde_json::json!({"type": "set_mapping_mode", "id": 1, "mode": "nonlinear"}));
    let ack = await_ack(&mut gw, &mut p, &c);
    assert_eq!(ack["ok"], true);
    assert_eq!(ack["id"], 1);
    assert_eq!(ack["command"], "set_mapping_mode");

    run_loop(&mut p, &mut fox(), &mut gw).unwrap();
    gw.shutdown();
    let streamed: Vec<(f64, f64)> = c
        .drain()
        .iter()
        .filter(|m| m["type"] == "cursor")
        .map(|m| (m["x"].as_f64().unwrap(), m["y"].as_f64().unwrap()))
        .collect();

    let mut nonlinear = PipelineConfig::default();
    nonlinear.mapping.mode = palmkey_core::mapping::MappingMode::NonlinearRelative;
    let expected = cursor_track(nonlinear);
    let absolute = cursor_track(PipelineConfig::default());
    assert_eq!(streamed.len(), expected.len());
    for (s, e) in streamed.iter().zip(&expected) {
        assert!((s.0 - e.0).abs() < 1e-9 && (s.1 - e.1).abs() < 1e-9, "{s:?} vs {e:?}");
    }
    assert!(streamed.iter().zip(&absolute).any(|(s, a)| (s.0 - a.0).abs() > 1.0));
}

#[test]
fn malformed_commands_are_acked_and_connection_survives() {
    let mut p = pipeline(PipelineConfig::default());
    let mut gw = start(&p);
    let c = TestClient::connect(&gw);
    handshake(&c);
    c.tx.send("{oops".into()).unwrap();
    let ack = c.next();
    assert_eq!(ack["type"], "command_ack");
    assert_eq!(ack["ok"], false);

    c.send(serde_json::json!({"type": "set_param", "id": 2, "key": "click.down_ratio", "value": "0.95"}));
    let ack = await_ack(&mut gw, &mut p, &c);
    assert_eq!((ack["id"].clone(), ack["ok"].clone()), (2.into(), false.into()));
    assert!(ack["error"].as_str().unwrap().contains("down_ratio"));

    c.send(serde_json::json!({"type": "set_param", "id": 3, "key": "click.down_ratio", "value": 0.5}));
    assert_eq!(await_ack(&mut gw, &mut p, &c)["ok"], true);
    assert_eq!(p.config().click.down_ratio, 0.5);

    c.send(serde_json::json!({"type": "goto_page", "id": 4, "page": "digits"}));
    assert_eq!(await_ack(&mut gw, &mut p, &c)["ok"], true);
    assert_eq!(p.page_id(), "digits");

    c.send(serde_json::json!({"type": "load_interface", "id": 5, "path": "builtin:mouse"}));
    assert_eq!(await_ack(&mut gw, &mut p, &c)["ok"], true);
    let spec = c.next();
    assert_eq!(spec["type"], "spec");
    assert_eq!(spec["interface"]["name"], "mouse");
    assert_eq!(spec["page"], "pad");

    // A client connecting now gets the new interface.
    let late = TestClient::connect(&gw);
    assert_eq!(handshake(&late)["interface"]["name"], "mouse");
    gw.shutdown();
    c.drain();
    late.drain();
}

#[test]
fn slow_client_loses_messages_not_order() {
    let p = pipeline(PipelineConfig::default());
    let options = GatewayOptions {
        queue_capacity: 4,
        ..GatewayOptions::default()
    };
    let gw = Gateway::for_pipeline("127.0.0.1:0", &p, options).unwrap();
    let c = TestClient::connect(&gw);
    handshake(&c);
    for i in 0..2000 {
        gw.broadcast(palmkey_gateway::Message::Cursor(palmkey_gateway::protocol::CursorMsg {
            x: i as f64,
            y: 0.0,
            pressed: false,
            page: "letters_am".into(),
        }));
    }
    let dropped = gw.dropped();
    gw.shutdown();
    let msgs = c.drain();
    let xs: Vec<f64> = msgs.iter().map(|m| m["x"].as_f64().unwrap()).collect();
    let seqs: Vec<u64> = msgs.iter().map(|m| m["seq"].as_u64().unwrap()).collect();
    assert!(!xs.is_empty());
    assert!(xs.windows(2).all(|w| w[0] < w[1]));
    assert!(seqs.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(xs.len() as u64 + dropped, 2000);
}

#[test]
fn port_in_use_is_a_startup_error() {
    let p = pipeline(PipelineConfig::default());
    let gw = start(&p);
    let err = Gateway::for_pipeline(gw.local_addr(), &p, GatewayOptions::default()).err().unwrap();
    assert!(matches!(err, GatewayError::Bind { .. }));
    let _ = TcpStream::connect(gw.local_addr()).unwrap();
}
