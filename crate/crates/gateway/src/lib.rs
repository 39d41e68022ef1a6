//! WebSocket gateway: streams interface state, cursor and events to front
//! panels and feeds operator commands back into the frame loop.

pub mod protocol;
mod server;

pub use protocol::{Message, PROTOCOL_VERSION};
pub use server::{Gateway, GatewayError, GatewayOptions};
