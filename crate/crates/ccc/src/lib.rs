//! Command control center: the service that arbitrates control rights over
//! a fleet, relays commands to vehicles and fans telemetry out to operator
//! clients, plus a simulated vehicle agent and a small client library.

pub mod agent;
pub mod client;
pub mod fleet;
pub mod hub;
pub mod server;

pub use agent::{run_vehicle, AgentConfig, AgentReport};
pub use client::CccClient;
pub use fleet::FleetConfig;
pub use hub::{Hub, HubConfig};
pub use server::{run_service, start, RunningService, ServiceConfig};

use tokio_util::codec::LengthDelimitedCodec;

/// 4-byte big-endian length prefix, bounded by the protocol frame limit.
pub fn frame_codec() -> LengthDelimitedCodec {
    LengthDelimitedCodec::builder().length_field_length(4).big_endian().max_frame_length(cage_core::wire::MAX_FRAME_LEN).new_codec()
}
