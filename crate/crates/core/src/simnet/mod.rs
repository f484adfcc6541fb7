//! Deterministic network simulator.
//!
//! Scripted clients talk to an in-process [`ServerEngine`](crate::server::ServerEngine)
//! through per-direction simulated links, all on one discrete-event virtual
//! clock. A multi-second arm cycle costs microseconds of wall time and the
//! same seed always produces the same report.

mod link;
mod report;
mod run;
mod script;

pub use link::{LinkProfile, SimLink};
pub use report::{emit_table, CycleReport, PingSample, Rejection, RunReport, Table, TableRow};
pub use run::{run_scenario, run_table1, SimConfig};
pub use script::{Action, ScenarioScript, ScriptError, ScriptStep};

use std::time::Duration;

use thiserror::Error;

use crate::latency::LatencyError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Script(#[from] ScriptError),
    #[error("link profile: {0}")]
    Profile(String),
    #[error("failed to read {0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error("no run reports to tabulate")]
    EmptyReports,
    #[error("simulation exceeded {0:?} of virtual time")]
    Timeout(Duration),
    #[error("client {client} is blocked with no events left")]
    Stalled { client: String },
    #[error("session invariant violated at {at:?}: {reason}")]
    Invariant { at: Duration, reason: String },
    #[error(transparent)]
    Latency(#[from] LatencyError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Calibrated conditions. One-way propagation is back-solved from the target
/// ping round trips of 1, 1.2 and 7.75 ms.
pub mod profiles {
    use super::LinkProfile;
    use std::time::Duration;

    pub fn local() -> LinkProfile {
        LinkProfile::new("local", Duration::from_micros(500), 100e6)
    }

    pub fn lan() -> LinkProfile {
        LinkProfile::new("lan", Duration::from_micros(600), 100e6)
    }

    pub fn inter_lan() -> LinkProfile {
        LinkProfile::new("inter-lan", Duration::from_micros(3800), 2e6)
    }

    pub fn canonical() -> [LinkProfile; 3] {
        [local(), lan(), inter_lan()]
    }

    pub fn by_name(name: &str) -> Option<LinkProfile> {
        canonical().into_iter().find(|p| p.name == name)
    }
}
