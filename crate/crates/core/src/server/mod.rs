//! The robot server: arbitration, actuation and the request cycle.
//!
//! A setpoint travels ingress decode, session submit, actuation, feedback
//! sampling and egress encode. [`ServerEngine`] implements that pipeline
//! without any I/O; [`TcpServer`] drives it over TCP in real time and the
//! simulator drives it in virtual time.

mod config;
mod engine;
mod log;
mod tcp;

pub use self::config::{
    ConfigError, ConfigLayer, ServerConfig, DEFAULT_PORT, ENV_ARM, ENV_LISTEN, ENV_PING_TIMEOUT_MS, ENV_PORT,
    ENV_QUEUE_BOUND, ENV_RATE,
};
pub use self::engine::{
    CompletedCycle, EngineConfig, Outbound, ServerEngine, DEFAULT_BROADCAST_RATE_HZ, DEFAULT_TICK,
};
pub use self::log::{Direction, LogParseError, WireLogEntry, BROADCAST_PEER};
pub use self::tcp::{serve, ServerError, TcpServer, OUTBOUND_BUFFER};
