//! Simulated five-axis desktop manipulator.
//!
//! The arm is a serial chain of five revolute joints: base rotation,
//! shoulder, elbow, wrist pitch and gripper roll. Joint angles are carried
//! in degrees everywhere in this module; the wire codec converts them to
//! integer tenths at the protocol boundary.

mod config;
mod kinematics;
mod motion;

pub use config::{ArmConfig, ArmConfigError, JointLimits, JOINT_NAMES};
pub use kinematics::{forward_kinematics, FramePoses, JOINT_AXES};
pub use motion::{cycle_duration, step_motion, ArmState};

use std::fmt;
use std::ops::{Index, IndexMut};

/// Number of actuated joints.
pub const JOINT_COUNT: usize = 5;

/// Five joint angles in degrees, ordered base-rotation, shoulder, elbow,
/// wrist-pitch, gripper-roll.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct JointVector(pub [f64; JOINT_COUNT]);

impl JointVector {
    pub const ZERO: JointVector = JointVector([0.0; JOINT_COUNT]);

    pub fn new(angles: [f64; JOINT_COUNT]) -> Self {
        Self(angles)
    }

    pub fn as_array(&self) -> &[f64; JOINT_COUNT] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().copied()
    }

    /// Largest per-joint absolute difference.
    pub fn max_abs_diff(&self, other: &JointVector) -> f64 {
        self.iter()
            .zip(other.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Index<usize> for JointVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for JointVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl From<[f64; JOINT_COUNT]> for JointVector {
    fn from(a: [f64; JOINT_COUNT]) -> Self {
        Self(a)
    }
}

impl fmt::Display for JointVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{:.2}, {:.2}, {:.2}, {:.2}, {:.2}]",
            self.0[0], self.0[1], self.0[2], self.0[3], self.0[4]
        )
    }
}

/// Clamps every joint into its configured range. Components already inside
/// their range are returned unchanged. NaN components collapse to the lower
/// limit so the result is always a legal pose.
pub fn clamp_to_limits(cfg: &ArmConfig, j: &JointVector) -> JointVector {
    let mut out = *j;
    for (i, lim) in cfg.limits.iter().enumerate() {
        let v = out[i];
        out[i] = if v.is_nan() {
            lim.min
        } else {
            v.clamp(lim.min, lim.max)
        };
    }
    out
}
