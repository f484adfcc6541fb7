//! Shared fixtures for the criterion benches.

use telerobot::arm::JointVector;
use telerobot::protocol::{Handshake, HostDirection, UserStatus, WireJoints, WireMessage};
use telerobot::ArmConfig;

/// One frame of every kind.
pub fn sample_messages() -> Vec<WireMessage> {
    let j = WireJoints([900, -450, 1200, -15, 1800]);
    vec![
        WireMessage::Setpoint(j),
        WireMessage::Feedback {
            joints: j,
            reached: true,
        },
        WireMessage::ClientCount(3),
        WireMessage::HostEvent {
            direction: HostDirection::Join,
            host: "192.168.1.20:50122".into(),
        },
        WireMessage::UserStatus {
            client: "c2".into(),
            status: UserStatus::Queued(4),
        },
        WireMessage::Ping(1_234_567),
        WireMessage::Pong(1_234_567),
        WireMessage::error("LOCKSTEP", "outstanding_command"),
        WireMessage::Handshake(Handshake::for_arm("c1", &ArmConfig::default())),
    ]
}

/// Deterministic spread of poses across the default limits.
pub fn sample_poses(n: usize) -> Vec<JointVector> {
    let cfg = ArmConfig::default();
    (0..n)
        .map(|k| {
            let mut j = [0.0; 5];
            for (i, a) in j.iter_mut().enumerate() {
                let l = cfg.limits[i];
                let f = ((k * 7 + i * 13) % 101) as f64 / 100.0;
                *a = l.min + f * (l.max - l.min);
            }
            JointVector(j)
        })
        .collect()
}
