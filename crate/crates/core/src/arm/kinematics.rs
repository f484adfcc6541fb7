use nalgebra::{Isometry3, Translation3, Unit, UnitQuaternion, Vector3};

use super::{ArmConfig, JointVector, JOINT_COUNT};

/// Rotation axis of each joint, expressed in the frame of the previous link.
///
/// The base turns about +Z. Shoulder, elbow and wrist pitch about -Y so a
/// positive angle lifts the chain from +X toward +Z. The gripper rolls about
/// its own link axis (+X). Every link extends along local +X, so the zero
/// pose lies fully stretched along the base +X axis.
pub const JOINT_AXES: [[f64; 3]; JOINT_COUNT] = [
    [0.0, 0.0, 1.0],
    [0.0, -1.0, 0.0],
    [0.0, -1.0, 0.0],
    [0.0, -1.0, 0.0],
    [1.0, 0.0, 0.0],
];

/// Base frame followed by the five link frames, in millimetres.
pub type FramePoses = [Isometry3<f64>; JOINT_COUNT + 1];

pub fn forward_kinematics(cfg: &ArmConfig, j: &JointVector) -> FramePoses {
    let mut frames = [Isometry3::identity(); JOINT_COUNT + 1];
    let mut acc = Isometry3::identity();
    for k in 0..JOINT_COUNT {
        let [x, y, z] = JOINT_AXES[k];
        let axis = Unit::new_normalize(Vector3::new(x, y, z));
        let rot = UnitQuaternion::from_axis_angle(&axis, j[k].to_radians());
        let link = Translation3::new(cfg.link_lengths[k], 0.0, 0.0);
        acc = acc * Isometry3::from_parts(Translation3::identity(), rot) * Isometry3::from_parts(link, UnitQuaternion::identity());
        frames[k + 1] = acc;
    }
    frames
}
