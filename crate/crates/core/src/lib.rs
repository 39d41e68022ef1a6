//! Vision and interaction core: hand segmentation (FIZI), region labeling and
//! tracking, cursor mapping, the XML virtual interface and the order engine.
//!
//! Everything in here is deterministic and free of I/O apart from the engine
//! backends' sinks. Frame acquisition and orchestration live in
//! `palmkey-pipeline`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod fizi;
pub mod imaging;
pub mod interface;
pub mod mapping;
pub mod regions;

pub use engine::{ActionType, EngineBackend, Order, Receipt};
pub use fizi::{BackgroundModel, FiziParams};
pub use imaging::{BinaryMask, Frame, HsvPixel, Rgb};
pub use interface::{InterfaceSpec, LookupTable};
pub use mapping::{CursorState, MappingMode, MappingParams};
pub use regions::{Connectivity, Region, TrackParams, TrackState};

/// Bundled sample interface documents.
pub mod samples {
    /// Mouse pad: left/right/double click, wheel up/down.
    pub const MOUSE_XML: &str = include_str!("../interfaces/mouse.xml");
    /// Paged keyboard: letters, digits and special keys.
    pub const KEYBOARD_XML: &str = include_str!("../interfaces/keyboard.xml");
}
