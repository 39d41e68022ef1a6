//! Order execution.
//!
//! An [`Order`] is the triple `(action_type, p1, p2)`. The integer codes of
//! [`ActionType`] are part of the wire format and must not change:
//!
//! | code | action          |
//! |------|-----------------|
//! | 0    | `NOOP`          |
//! | 1    | `KEY_PRESS`     |
//! | 2    | `KEY_BACKSPACE` |
//! | 3    | `KEY_RETURN`    |
//! | 4    | `KEY_SPACE`     |
//! | 5    | `MOUSE_LEFT`    |
//! | 6    | `MOUSE_RIGHT`   |
//! | 7    | `MOUSE_DOUBLE`  |
//! | 8    | `WHEEL_UP`      |
//! | 9    | `WHEEL_DOWN`    |
//! | 10   | `PAGE_GOTO`     |

use std::fmt;
use std::io::Write;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("unknown action code {0}")]
    UnknownActionCode(i32),

    #[error("unknown action name {0:?}")]
    UnknownActionName(String),

    #[error("order {order} rejected: {reason}")]
    Rejected { order: Order, reason: String },

    #[error("backend unavailable: {0}")]
    Unavailable(String),

    #[error("i/o error writing order log: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(i32)]
pub enum ActionType {
    Noop = 0,
    KeyPress = 1,
    KeyBackspace = 2,
    KeyReturn = 3,
    KeySpace = 4,
    MouseLeft = 5,
    MouseRight = 6,
    MouseDouble = 7,
    WheelUp = 8,
    WheelDown = 9,
    PageGoto = 10,
}

impl ActionType {
    pub const ALL: [ActionType; 11] = [
        ActionType::Noop,
        ActionType::KeyPress,
        ActionType::KeyBackspace,
        ActionType::KeyReturn,
        ActionType::KeySpace,
        ActionType::MouseLeft,
        ActionType::MouseRight,
        ActionType::MouseDouble,
        ActionType::WheelUp,
        ActionType::WheelDown,
        ActionType::PageGoto,
    ];

    pub fn code(self) -> i32 {
        self as i32
    }

    pub fn from_code(code: i32) -> Result<Self, EngineError> {
        Self::ALL
            .get(usize::try_from(code).map_err(|_| EngineError::UnknownActionCode(code))?)
            .copied()
            .ok_or(EngineError::UnknownActionCode(code))
    }

    /// Name as written in interface documents.
    pub fn name(self) -> &'static str {
        match self {
            ActionType::Noop => "NOOP",
            ActionType::KeyPress => "KEY_PRESS",
            ActionType::KeyBackspace => "KEY_BACKSPACE",
            ActionType::KeyReturn => "KEY_RETURN",
            ActionType::KeySpace => "KEY_SPACE",
            ActionType::MouseLeft => "MOUSE_LEFT",
            ActionType::MouseRight => "MOUSE_RIGHT",
            ActionType::MouseDouble => "MOUSE_DOUBLE",
            ActionType::WheelUp => "WHEEL_UP",
            ActionType::WheelDown => "WHEEL_DOWN",
            ActionType::PageGoto => "PAGE_GOTO",
        }
    }

    pub fn from_name(name: &str) -> Result<Self, EngineError> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == name)
            .ok_or_else(|| EngineError::UnknownActionName(name.to_string()))
    }
}

impl fmt::Display for ActionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Order {
    pub action: ActionType,
    pub p1: i32,
    pub p2: i32,
}

impl Order {
    pub fn triple(&self) -> [i32; 3] {
        [self.action.code(), self.p1, self.p2]
    }

    pub fn from_triple([code, p1, p2]: [i32; 3]) -> Result<Self, EngineError> {
        Ok(encode_action(ActionType::from_code(code)?, p1, p2))
    }
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [t, a, b] = self.triple();
        write!(f, "({t},{a},{b})")
    }
}

pub fn encode_action(action: ActionType, p1: i32, p2: i32) -> Order {
    Order { action, p1, p2 }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BackendKind {
    InterfaceControl,
    DirectSystemIntegration,
    Recorder,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Receipt {
    pub accepted: bool,
    pub seq: u64,
}

/// A sink that carries out orders. Calls are sequential; implementations
/// must be movable between threads between calls.
pub trait EngineBackend: Send {
    fn kind(&self) -> BackendKind;

    fn apply(&mut self, seq: u64, order: &Order, timestamp_ms: u64) -> Result<(), EngineError>;

    /// Typed text, for backends that keep one.
    fn text_buffer(&self) -> Option<&str> {
        None
    }

    /// Lines written so far, for backends that keep a log.
    fn log_lines(&self) -> Option<&[String]> {
        None
    }
}

/// Sequences orders onto one backend.
pub struct Engine {
    backend: Box<dyn EngineBackend>,
    next_seq: u64,
}

impl Engine {
    pub fn new(backend: Box<dyn EngineBackend>) -> Self {
        Self {
            backend,
            next_seq: 1,
        }
    }

    pub fn backend(&self) -> &dyn EngineBackend {
        self.backend.as_ref()
    }

    /// Execute one order. A failed order consumes no sequence number.
    pub fn execute(&mut self, order: Order, timestamp_ms: u64) -> Result<Receipt, EngineError> {
        let seq = self.next_seq;
        self.backend.apply(seq, &order, timestamp_ms)?;
        self.next_seq += 1;
        Ok(Receipt {
            accepted: true,
            seq,
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MouseCounters {
    pub left: u32,
    pub right: u32,
    pub double: u32,
    pub wheel: i32,
}

/// Drives the virtual interface's own state: a text buffer and mouse
/// counters.
#[derive(Clone, Debug, Default)]
pub struct InterfaceControl {
    text: String,
    mouse: MouseCounters,
}

impl InterfaceControl {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn mouse(&self) -> MouseCounters {
        self.mouse
    }
}

impl EngineBackend for InterfaceControl {
    fn kind(&self) -> BackendKind {
        BackendKind::InterfaceControl
    }

    fn apply(&mut self, _seq: u64, order: &Order, _timestamp_ms: u64) -> Result<(), EngineError> {
        match order.action {
            ActionType::KeyPress => {
                let c = u32::try_from(order.p1)
                    .ok()
                    .and_then(char::from_u32)
                    .ok_or_else(|| EngineError::Rejected {
                        order: *order,
                        reason: "p1 is not a character code".into(),
                    })?;
                self.text.push(c);
            }
            ActionType::KeyBackspace => {
                self.text.pop();
            }
            ActionType::KeyReturn => self.text.push('\n'),
            ActionType::KeySpace => self.text.push(' '),
            ActionType::MouseLeft => self.mouse.left += 1,
            ActionType::MouseRight => self.mouse.right += 1,
            ActionType::MouseDouble => self.mouse.double += 1,
            ActionType::WheelUp => self.mouse.wheel += 1,
            ActionType::WheelDown => self.mouse.wheel -= 1,
            ActionType::Noop | ActionType::PageGoto => {}
        }
        Ok(())
    }

    fn text_buffer(&self) -> Option<&str> {
        Some(&self.text)
    }
}

/// Appends `seq<TAB>timestamp_ms<TAB>type<TAB>p1<TAB>p2` per order to a
/// writer and keeps the lines in memory.
pub struct Recorder {
    sink: Option<Box<dyn Write + Send>>,
    lines: Vec<String>,
}

impl Recorder {
    pub fn in_memory() -> Self {
        Self {
            sink: None,
            lines: Vec::new(),
        }
    }

    pub fn to_writer(sink: Box<dyn Write + Send>) -> Self {
        Self {
            sink: Some(sink),
            lines: Vec::new(),
        }
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    pub fn format_line(seq: u64, timestamp_ms: u64, order: &Order) -> String {
        let [t, p1, p2] = order.triple();
        format!("{seq}\t{timestamp_ms}\t{t}\t{p1}\t{p2}")
    }
}

impl EngineBackend for Recorder {
    fn kind(&self) -> BackendKind {
        BackendKind::Recorder
    }

    fn apply(&mut self, seq: u64, order: &Order, timestamp_ms: u64) -> Result<(), EngineError> {
        let line = Self::format_line(seq, timestamp_ms, order);
        if let Some(sink) = self.sink.as_mut() {
            writeln!(sink, "{line}")?;
            sink.flush()?;
        }
        self.lines.push(line);
        Ok(())
    }

    fn log_lines(&self) -> Option<&[String]> {
        Some(&self.lines)
    }
}

/// Platform hook for injecting input events into the host system.
pub trait InputInjector: Send {
    fn inject(&mut self, order: &Order) -> Result<(), EngineError>;
}

/// Injector that only logs what it would send.
#[derive(Clone, Debug, Default)]
pub struct LoggingInjector {
    pub sent: Vec<Order>,
}

impl InputInjector for LoggingInjector {
    fn inject(&mut self, order: &Order) -> Result<(), EngineError> {
        log::info!("inject {} p1={} p2={}", order.action, order.p1, order.p2);
        self.sent.push(*order);
        Ok(())
    }
}

/// Emulates the system mouse and keyboard through an [`InputInjector`].
pub struct DirectSystemIntegration<I> {
    injector: I,
    lines: Vec<String>,
}

impl<I: InputInjector> DirectSystemIntegration<I> {
    pub fn new(injector: I) -> Self {
        Self {
            injector,
            lines: Vec::new(),
        }
    }

    pub fn injector(&self) -> &I {
        &self.injector
    }
}

impl<I: InputInjector> EngineBackend for DirectSystemIntegration<I> {
    fn kind(&self) -> BackendKind {
        BackendKind::DirectSystemIntegration
    }

    fn apply(&mut self, seq: u64, order: &Order, timestamp_ms: u64) -> Result<(), EngineError> {
        self.injector.inject(order)?;
        self.lines
            .push(Recorder::format_line(seq, timestamp_ms, order));
        Ok(())
    }

    fn log_lines(&self) -> Option<&[String]> {
        Some(&self.lines)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(c: char) -> Order {
        encode_action(ActionType::KeyPress, c as i32, 0)
    }

    #[test]
    fn encodings() {
        assert_eq!(key('f').triple(), [1, 102, 0]);
        assert_eq!(encode_action(ActionType::Noop, 0, 0).triple(), [0, 0, 0]);
        assert_eq!(encode_action(ActionType::MouseLeft, 0, 0).triple(), [5, 0, 0]);
        assert_eq!(ActionType::PageGoto.code(), 10);
    }

    #[test]
    fn codes_and_names_round_trip() {
        for a in ActionType::ALL {
            assert_eq!(ActionType::from_code(a.code()).unwrap(), a);
            assert_eq!(ActionType::from_name(a.name()).unwrap(), a);
            let o = encode_action(a, 3, -4);
            assert_eq!(Order::from_triple(o.triple()).unwrap(), o);
        }
        assert!(matches!(
            ActionType::from_code(11),
            Err(EngineError::UnknownActionCode(11))
        ));
        assert!(ActionType::from_code(-1).is_err());
        assert!(ActionType::from_name("KEY_TAB").is_err());
    }

    #[test]
    fn interface_control_types_fox() {
        let mut e = Engine::new(Box::new(InterfaceControl::new()));
        for c in ['f', 'o', 'x'] {
            e.execute(key(c), 0).unwrap();
        }
        assert_eq!(e.backend().text_buffer(), Some("fox"));
    }

    #[test]
    fn backspace_removes_last_char() {
        let mut e = Engine::new(Box::new(InterfaceControl::new()));
        e.execute(key('f'), 0).unwrap();
        e.execute(key('o'), 0).unwrap();
        e.execute(encode_action(ActionType::KeyBackspace, 0, 0), 0)
            .unwrap();
        assert_eq!(e.backend().text_buffer(), Some("f"));
    }

    #[test]
    fn bad_char_code_rejected_without_seq() {
        let mut e = Engine::new(Box::new(InterfaceControl::new()));
        assert!(e.execute(encode_action(ActionType::KeyPress, -5, 0), 0).is_err());
        assert_eq!(e.execute(key('a'), 0).unwrap().seq, 1);
    }

    #[test]
    fn recorder_lines_and_sequence() {
        let mut e = Engine::new(Box::new(Recorder::in_memory()));
        let r1 = e.execute(key('f'), 1000).unwrap();
        let r2 = e.execute(encode_action(ActionType::WheelDown, 0, 0), 1033).unwrap();
        assert!(r1.accepted && r2.seq > r1.seq);
        assert_eq!(
            e.backend().log_lines().unwrap(),
            ["1\t1000\t1\t102\t0", "2\t1033\t9\t0\t0"]
        );
    }

    #[test]
    fn recorder_writes_to_sink() {
        let file = tempfile_path();
        {
            let f = std::fs::File::create(&file).unwrap();
            let mut rec = Recorder::to_writer(Box::new(f));
            rec.apply(1, &key('x'), 5).unwrap();
        }
        assert_eq!(std::fs::read_to_string(&file).unwrap(), "1\t5\t1\t120\t0\n");
        std::fs::remove_file(file).unwrap();
    }

    fn tempfile_path() -> std::path::PathBuf {
        std::env::temp_dir().join(format!("palmkey-rec-{}.log", std::process::id()))
    }

    struct Unplugged;

    impl InputInjector for Unplugged {
        fn inject(&mut self, _: &Order) -> Result<(), EngineError> {
            Err(EngineError::Unavailable("no display".into()))
        }
    }

    #[test]
    fn dsi_forwards_or_surfaces_errors() {
        let mut e = Engine::new(Box::new(DirectSystemIntegration::new(LoggingInjector::default())));
        e.execute(encode_action(ActionType::MouseLeft, 0, 0), 0).unwrap();
        assert_eq!(e.backend().log_lines().unwrap().len(), 1);

        let mut e = Engine::new(Box::new(DirectSystemIntegration::new(Unplugged)));
        assert!(matches!(
            e.execute(encode_action(ActionType::MouseLeft, 0, 0), 0),
            Err(EngineError::Unavailable(_))
        ));
    }
}
