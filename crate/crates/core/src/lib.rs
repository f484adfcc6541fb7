//! Multi-operator teleoperation of a simulated desktop robot arm.
//!
//! Operators send joint setpoints over a line protocol; the server
//! arbitrates them first-come first-served, one command at a time, drives
//! the arm at constant joint speed and streams feedback to everyone.
//! [`simnet`] replays scripted operators over simulated links in virtual
//! time and decomposes each cycle's response time with [`latency`].

pub mod arm;
pub mod latency;
pub mod protocol;
pub mod server;
pub mod session;
pub mod simnet;

pub use arm::{forward_kinematics, ArmConfig, ArmState, JointVector, JOINT_COUNT};
pub use latency::{predict_response, LatencyRecord, LatencySummary};
pub use protocol::{decode, encode, CodecError, WireJoints, WireMessage};
pub use server::{EngineConfig, ServerConfig, ServerEngine, TcpServer};
pub use session::{ClientId, SessionState};
pub use simnet::{emit_table, run_scenario, LinkProfile, RunReport, ScenarioScript};
