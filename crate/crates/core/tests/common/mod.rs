#![allow(dead_code)]

use proptest::prelude::*;
use telerobot::arm::JointVector;
use telerobot::protocol::{Handshake, HostDirection, UserStatus, WireJoints, WireMessage, WIRE_ANGLE_LIMIT};
use telerobot::ArmConfig;

pub type Mat4 = [[f64; 4]; 4];

const I4: Mat4 = [
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
];

pub fn mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut m = [[0.0; 4]; 4];
    for (r, row) in m.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = (0..4).map(|k| a[r][k] * b[k][c]).sum();
        }
    }
    m
}

fn rot_z(t: f64) -> Mat4 {
    let (s, c) = t.sin_cos();
    [[c, -s, 0.0, 0.0], [s, c, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]]
}

fn rot_y(t: f64) -> Mat4 {
    let (s, c) = t.sin_cos();
    [[c, 0.0, s, 0.0], [0.0, 1.0, 0.0, 0.0], [-s, 0.0, c, 0.0], [0.0, 0.0, 0.0, 1.0]]
}

fn rot_x(t: f64) -> Mat4 {
    let (s, c) = t.sin_cos();
    [[1.0, 0.0, 0.0, 0.0], [0.0, c, -s, 0.0], [0.0, s, c, 0.0], [0.0, 0.0, 0.0, 1.0]]
}

fn trans_x(l: f64) -> Mat4 {
    let mut m = I4;
    m[0][3] = l;
    m
}

/// Homogeneous-transform chain for the five-axis arm: base yaw, three
/// pitches about -Y, roll about X, each followed by its link along X.
pub fn fk_oracle(link: &[f64; 5], q_deg: &[f64; 5]) -> Vec<Mat4> {
    let q = q_deg.map(f64::to_radians);
    let rots = [rot_z(q[0]), rot_y(-q[1]), rot_y(-q[2]), rot_y(-q[3]), rot_x(q[4])];
    let mut out = vec![I4];
    let mut acc = I4;
    for k in 0..5 {
        acc = mul(&mul(&acc, &rots[k]), &trans_x(link[k]));
        out.push(acc);
    }
    out
}

/// Largest element difference between the library frames and the oracle.
pub fn fk_max_error(cfg: &ArmConfig, q: &JointVector) -> f64 {
    let frames = telerobot::forward_kinematics(cfg, q);
    let oracle = fk_oracle(&cfg.link_lengths, &q.0);
    let mut worst = 0.0f64;
    for (f, o) in frames.iter().zip(&oracle) {
        let m = f.to_homogeneous();
        for r in 0..4 {
            for c in 0..4 {
                worst = worst.max((m[(r, c)] - o[r][c]).abs());
            }
        }
    }
    worst
}

pub fn joints_in_limits() -> impl Strategy<Value = JointVector> {
    let l = ArmConfig::default().limits;
    (
        l[0].min..=l[0].max,
        l[1].min..=l[1].max,
        l[2].min..=l[2].max,
        l[3].min..=l[3].max,
        l[4].min..=l[4].max,
    )
        .prop_map(|(a, b, c, d, e)| JointVector([a, b, c, d, e]))
}

pub fn wire_joints() -> impl Strategy<Value = WireJoints> {
    prop::array::uniform5(-WIRE_ANGLE_LIMIT..=WIRE_ANGLE_LIMIT).prop_map(WireJoints)
}

pub fn token() -> impl Strategy<Value = String> {
    "[!-~]{1,24}"
}

pub fn wire_message() -> impl Strategy<Value = WireMessage> {
    let status = prop_oneof![
        Just(UserStatus::Active),
        Just(UserStatus::Idle),
        (1u32..).prop_map(UserStatus::Queued),
    ];
    let limit = -WIRE_ANGLE_LIMIT..=WIRE_ANGLE_LIMIT;
    let handshake = (
        token(),
        prop::array::uniform5((limit.clone(), limit)),
        prop::array::uniform5(any::<u32>()),
        prop::array::uniform5(any::<u32>()),
    )
        .prop_map(|(client, limits, link_lengths, speeds)| {
            WireMessage::Handshake(Handshake {
                client,
                limits,
                link_lengths,
                speeds,
            })
        });
    prop_oneof![
        wire_joints().prop_map(WireMessage::Setpoint),
        (wire_joints(), any::<bool>()).prop_map(|(joints, reached)| WireMessage::Feedback { joints, reached }),
        any::<u32>().prop_map(WireMessage::ClientCount),
        (any::<bool>(), token()).prop_map(|(j, host)| WireMessage::HostEvent {
            direction: if j { HostDirection::Join } else { HostDirection::Leave },
            host,
        }),
        (token(), status).prop_map(|(client, status)| WireMessage::UserStatus { client, status }),
        any::<u64>().prop_map(WireMessage::Ping),
        any::<u64>().prop_map(WireMessage::Pong),
        (token(), token()).prop_map(|(code, detail)| WireMessage::Error { code, detail }),
        handshake,
    ]
}
