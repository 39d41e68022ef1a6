//! Wire format: one JSON object per WebSocket text message.
//!
//! Every server message has `type` and, except `hello`, a per-connection
//! `seq` that strictly increases. Field names are documented in
//! `docs/protocol.md` and pinned by golden tests.

use palmkey_core::interface::{ClickEdge, InterfaceSpec, ZoneEvent};
use palmkey_core::mapping::MappingMode;
use palmkey_pipeline::config::InterfaceChoice;
use palmkey_pipeline::{FrameReport, InterfaceSource, OperatorCommand};
use serde::Serialize;
use serde_json::Value;

pub const PROTOCOL_VERSION: u32 = 1;

/// Handshake, sent before anything else.
pub fn hello_json() -> String {
    format!(r#"{{"type":"hello","version":{PROTOCOL_VERSION}}}"#)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ZoneJson {
    pub id: String,
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
    pub label: String,
    pub action: &'static str,
    pub p1: i32,
    pub p2: i32,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PageJson {
    pub id: String,
    pub zones: Vec<ZoneJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InterfaceJson {
    pub name: String,
    pub width: u32,
    pub height: u32,
    pub start: String,
    pub pages: Vec<PageJson>,
}

impl From<&InterfaceSpec> for InterfaceJson {
    fn from(spec: &InterfaceSpec) -> Self {
        Self {
            name: spec.name.clone(),
            width: spec.width,
            height: spec.height,
            start: spec.start_page.clone(),
            pages: spec
                .pages
                .iter()
                .map(|p| PageJson {
                    id: p.id.clone(),
                    zones: p
                        .zones
                        .iter()
                        .map(|z| ZoneJson {
                            id: z.id.clone(),
                            x: z.rect.x,
                            y: z.rect.y,
                            w: z.rect.w,
                            h: z.rect.h,
                            label: z.label.clone(),
                            action: z.action.name(),
                            p1: z.p1,
                            p2: z.p2,
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpecMsg {
    pub interface: InterfaceJson,
    /// Page shown at the time of sending.
    pub page: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CursorMsg {
    pub x: f64,
    pub y: f64,
    pub pressed: bool,
    pub page: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ZoneEventMsg {
    /// `enter` or `leave`
    pub event: &'static str,
    pub page: String,
    pub zone: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClickEventMsg {
    /// `down` or `up`
    pub edge: &'static str,
    pub x: f64,
    pub y: f64,
    pub page: String,
    pub zone: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrderMsg {
    /// Engine receipt sequence number.
    pub order_seq: u64,
    pub action: &'static str,
    pub code: i32,
    pub p1: i32,
    pub p2: i32,
    pub timestamp_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TextBufferMsg {
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimingMsg {
    pub frame: u64,
    pub calibrating: bool,
    pub fizi_ms: f64,
    pub label_ms: f64,
    pub track_ms: f64,
    pub map_ms: f64,
    pub interact_ms: f64,
    pub execute_ms: f64,
    pub total_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AckMsg {
    /// Echo of the client's `id`, `null` when absent.
    pub id: Value,
    pub command: String,
    pub ok: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Message {
    Spec(SpecMsg),
    Cursor(CursorMsg),
    ZoneEvent(ZoneEventMsg),
    ClickEvent(ClickEventMsg),
    OrderExecuted(OrderMsg),
    TextBuffer(TextBufferMsg),
    Timing(TimingMsg),
    CommandAck(AckMsg),
}

#[derive(Serialize)]
struct Wire<'a> {
    #[serde(rename = "type")]
    kind: &'static str,
    seq: u64,
    #[serde(flatten)]
    body: &'a Message,
}

impl Message {
    pub fn type_name(&self) -> &'static str {
        match self {
            Message::Spec(_) => "spec",
            Message::Cursor(_) => "cursor",
            Message::ZoneEvent(_) => "zone_event",
            Message::ClickEvent(_) => "click_event",
            Message::OrderExecuted(_) => "order_executed",
            Message::TextBuffer(_) => "text_buffer",
            Message::Timing(_) => "timing",
            Message::CommandAck(_) => "command_ack",
        }
    }

    pub fn to_json(&self, seq: u64) -> String {
        serde_json::to_string(&Wire {
            kind: self.type_name(),
            seq,
            body: self,
        })
        .expect("message serialization cannot fail")
    }

    pub fn spec(spec: &InterfaceSpec, page: &str) -> Self {
        Message::Spec(SpecMsg {
            interface: spec.into(),
            page: page.to_string(),
        })
    }

    pub fn zone_event(e: &ZoneEvent) -> Self {
        let (event, page, zone) = match e {
            ZoneEvent::Enter { page, zone } => ("enter", page, zone),
            ZoneEvent::Leave { page, zone } => ("leave", page, zone),
        };
        Message::ZoneEvent(ZoneEventMsg {
            event,
            page: page.clone(),
            zone: zone.clone(),
        })
    }

    pub fn ack(id: Value, command: &str, result: Result<(), String>) -> Self {
        Message::CommandAck(AckMsg {
            id,
            command: command.to_string(),
            ok: result.is_ok(),
            error: result.err(),
        })
    }
}

fn ms(d: std::time::Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Messages for one frame in send order: zone events, click edge, executed
/// orders, text changes, the cursor, timings.
pub fn report_messages(report: &FrameReport, last_text: &mut Option<String>) -> Vec<Message> {
    let mut out: Vec<Message> = report.events.iter().map(Message::zone_event).collect();
    let edge = match report.edge {
        ClickEdge::Down => Some("down"),
        ClickEdge::Up => Some("up"),
        ClickEdge::None => None,
    };
    if let Some(edge) = edge {
        out.push(Message::ClickEvent(ClickEventMsg {
            edge,
            x: report.cursor.0,
            y: report.cursor.1,
            page: report.page.clone(),
            zone: report.zone.clone(),
        }));
    }
    for o in &report.orders {
        if let Ok(receipt) = &o.result {
            out.push(Message::OrderExecuted(OrderMsg {
                order_seq: receipt.seq,
                action: o.order.action.name(),
                code: o.order.action.code(),
                p1: o.order.p1,
                p2: o.order.p2,
                timestamp_ms: o.timestamp_ms,
            }));
        }
    }
    if report.text_buffer != *last_text {
        if let Some(text) = &report.text_buffer {
            out.push(Message::TextBuffer(TextBufferMsg { text: text.clone() }));
        }
        last_text.clone_from(&report.text_buffer);
    }
    out.push(Message::Cursor(CursorMsg {
        x: report.cursor.0,
        y: report.cursor.1,
        pressed: report.pressed,
        page: report.page.clone(),
    }));
    let t = &report.timings;
    out.push(Message::Timing(TimingMsg {
        frame: report.frame_index,
        calibrating: report.phase != palmkey_pipeline::Phase::Running,
        fizi_ms: ms(t.fizi),
        label_ms: ms(t.label),
        track_ms: ms(t.track),
        map_ms: ms(t.map),
        interact_ms: ms(t.interact),
        execute_ms: ms(t.execute),
        total_ms: ms(t.total),
    }));
    out
}

/// A decoded client request.
#[derive(Clone, Debug, PartialEq)]
pub struct ClientCommand {
    pub id: Value,
    pub command: OperatorCommand,
}

/// A request that could not be decoded; answered with a failed ack.
#[derive(Clone, Debug, PartialEq)]
pub struct BadCommand {
    pub id: Value,
    pub command: String,
    pub error: String,
}

fn str_field<'a>(obj: &'a serde_json::Map<String, Value>, key: &str) -> Result<&'a str, String> {
    match obj.get(key) {
        Some(Value::String(s)) => Ok(s),
        Some(_) => Err(format!("{key} must be a string")),
        None => Err(format!("missing {key}")),
    }
}

/// Decode one client text message.
pub fn parse_command(text: &str) -> Result<ClientCommand, BadCommand> {
    let value: Value = serde_json::from_str(text).map_err(|e| BadCommand {
        id: Value::Null,
        command: String::new(),
        error: format!("malformed JSON: {e}"),
    })?;
    let Value::Object(obj) = value else {
        return Err(BadCommand {
            id: Value::Null,
            command: String::new(),
            error: "expected a JSON object".into(),
        });
    };
    let id = obj.get("id").cloned().unwrap_or(Value::Null);
    let kind = obj.get("type").and_then(Value::as_str).unwrap_or("").to_string();
    let bad = |error: String| BadCommand {
        id: id.clone(),
        command: kind.clone(),
        error,
    };
    let command = match kind.as_str() {
        "load_interface" => match (obj.get("path"), obj.get("xml")) {
            (Some(_), None) => {
                let path = str_field(&obj, "path").map_err(bad)?;
                let choice: InterfaceChoice = path.parse().map_err(|e| bad(format!("path: {e}")))?;
                OperatorCommand::LoadInterface(InterfaceSource::Choice(choice))
            }
            (None, Some(_)) => {
                OperatorCommand::LoadInterface(InterfaceSource::Xml(str_field(&obj, "xml").map_err(bad)?.into()))
            }
            _ => return Err(bad("load_interface needs exactly one of path or xml".into())),
        },
        "set_mapping_mode" => {
            let mode: MappingMode = str_field(&obj, "mode")
                .map_err(bad)?
                .parse()
                .map_err(|e: palmkey_core::mapping::MappingError| bad(e.to_string()))?;
            OperatorCommand::SetMappingMode(mode)
        }
        "goto_page" => OperatorCommand::GotoPage(str_field(&obj, "page").map_err(bad)?.into()),
        "recalibrate" => {
            let frames = match obj.get("frames") {
                None | Some(Value::Null) => None,
                Some(v) => Some(
                    v.as_u64()
                        .ok_or_else(|| bad("frames must be a non-negative integer".into()))? as usize,
                ),
            };
            OperatorCommand::Recalibrate { frames }
        }
        "set_param" => {
            let key = str_field(&obj, "key").map_err(bad)?.to_string();
            let value = match obj.get("value") {
                Some(Value::String(s)) => s.clone(),
                Some(v @ (Value::Number(_) | Value::Bool(_))) => v.to_string(),
                _ => return Err(bad("value must be a string, number or boolean".into())),
            };
            OperatorCommand::SetParam { key, value }
        }
        "" => return Err(bad("missing type".into())),
        other => return Err(bad(format!("unknown command {other:?}"))),
    };
    Ok(ClientCommand { id, command })
}
