//! TCP link between the orchestrator and a robot controller.
//!
//! Frames are single JSON objects, one per LF-terminated line. The client
//! sends `hello` once, then one command at a time; each command is answered by
//! exactly one `ack` or `nack` carrying the same `seq`. The controller may
//! interleave unsolicited `status` frames, which clients skip.

mod client;
mod frame;
mod server;

pub use client::{RobotClient, DEFAULT_REPLY_TIMEOUT};
pub use frame::{action_frame, decode, encode, FrameError, WireFrame};
pub use server::{serve_simulated_robot, RobotServer};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinkError {
    #[error("cannot bind {addr}: {source}")]
    BindFailure {
        addr: String,
        source: std::io::Error,
    },
    #[error("cannot reach robot at {addr}: {source}")]
    RobotUnreachable {
        addr: String,
        source: std::io::Error,
    },
    #[error("robot refused session: {0}")]
    Refused(String),
    #[error("protocol violation: {0}")]
    Protocol(String),
}
