use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::JOINT_COUNT;

pub const JOINT_NAMES: [&str; JOINT_COUNT] =
    ["base", "shoulder", "elbow", "wrist_pitch", "gripper_roll"];

#[derive(Debug, Error)]
pub enum ArmConfigError {
    #[error("failed to read arm config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed arm config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("arm config must list exactly {JOINT_COUNT} joints, found {0}")]
    JointCount(usize),
    #[error("joint {joint}: {reason}")]
    Joint { joint: &'static str, reason: String },
    #[error("invalid arm config: {0}")]
    Invalid(String),
}

/// Closed angular range in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointLimits {
    pub min: f64,
    pub max: f64,
}

impl JointLimits {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }
}

/// Geometry and actuation parameters of the simulated arm.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmConfig {
    pub limits: [JointLimits; JOINT_COUNT],
    /// Maximum slew rate per joint, degrees per second.
    pub speeds: [f64; JOINT_COUNT],
    /// Link lengths of the serial chain in millimetres.
    pub link_lengths: [f64; JOINT_COUNT],
    /// A joint counts as arrived once it is this close to its target, in degrees.
    pub settle_tolerance: f64,
}

impl Default for ArmConfig {
    fn default() -> Self {
        Self {
            limits: [
                JointLimits::new(-135.0, 135.0),
                JointLimits::new(0.0, 120.0),
                JointLimits::new(-120.0, 120.0),
                JointLimits::new(-90.0, 90.0),
                JointLimits::new(-180.0, 180.0),
            ],
            speeds: [30.0; JOINT_COUNT],
            link_lengths: [120.0, 150.0, 150.0, 80.0, 50.0],
            // Must stay below speed * tick (0.3 deg at 30 deg/s, 10 ms) so the
            // settle time tracks the closed-form duration within one tick.
            settle_tolerance: 0.05,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JointEntry {
    name: String,
    min_deg: f64,
    max_deg: f64,
    max_speed_deg_s: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArmConfigFile {
    settle_tolerance_deg: f64,
    link_lengths_mm: Vec<f64>,
    joints: Vec<JointEntry>,
}

impl ArmConfig {
    pub fn validate(&self) -> Result<(), ArmConfigError> {
        for i in 0..JOINT_COUNT {
            let joint = JOINT_NAMES[i];
            let lim = self.limits[i];
            if !(lim.min.is_finite() && lim.max.is_finite() && lim.min < lim.max) {
                return Err(ArmConfigError::Joint {
                    joint,
                    reason: format!("limits must satisfy min < max, got [{}, {}]", lim.min, lim.max),
                });
            }
            if lim.min < -360.0 || lim.max > 360.0 {
                return Err(ArmConfigError::Joint {
                    joint,
                    reason: "limits must lie within +/-360 degrees".into(),
                });
            }
            if !(self.speeds[i].is_finite() && self.speeds[i] > 0.0) {
                return Err(ArmConfigError::Joint {
                    joint,
                    reason: format!("speed must be > 0, got {}", self.speeds[i]),
                });
            }
            if !(self.link_lengths[i].is_finite() && self.link_lengths[i] > 0.0) {
                return Err(ArmConfigError::Joint {
                    joint,
                    reason: format!("link length must be > 0, got {}", self.link_lengths[i]),
                });
            }
        }
        if !(self.settle_tolerance.is_finite() && self.settle_tolerance > 0.0) {
            return Err(ArmConfigError::Invalid(format!(
                "settle tolerance must be > 0, got {}",
                self.settle_tolerance
            )));
        }
        Ok(())
    }

    /// Total reach of the chain, the upper bound on end-effector distance.
    pub fn reach(&self) -> f64 {
        self.link_lengths.iter().sum()
    }

    pub fn from_toml_str(s: &str) -> Result<Self, ArmConfigError> {
        let file: ArmConfigFile = toml::from_str(s)?;
        if file.joints.len() != JOINT_COUNT {
            return Err(ArmConfigError::JointCount(file.joints.len()));
        }
        if file.link_lengths_mm.len() != JOINT_COUNT {
            return Err(ArmConfigError::Invalid(format!(
                "link_lengths_mm needs {JOINT_COUNT} entries, found {}",
                file.link_lengths_mm.len()
            )));
        }
        let mut cfg = ArmConfig {
            settle_tolerance: file.settle_tolerance_deg,
            ..ArmConfig::default()
        };
        for (i, j) in file.joints.iter().enumerate() {
            if j.name != JOINT_NAMES[i] {
                return Err(ArmConfigError::Invalid(format!(
                    "joint {} must be named {:?}, found {:?}",
                    i + 1,
                    JOINT_NAMES[i],
                    j.name
                )));
            }
            cfg.limits[i] = JointLimits::new(j.min_deg, j.max_deg);
            cfg.speeds[i] = j.max_speed_deg_s;
            cfg.link_lengths[i] = file.link_lengths_mm[i];
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ArmConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ArmConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        let file = ArmConfigFile {
            settle_tolerance_deg: self.settle_tolerance,
            link_lengths_mm: self.link_lengths.to_vec(),
            joints: (0..JOINT_COUNT)
                .map(|i| JointEntry {
                    name: JOINT_NAMES[i].to_string(),
                    min_deg: self.limits[i].min,
                    max_deg: self.limits[i].max,
                    max_speed_deg_s: self.speeds[i],
                })
                .collect(),
        };
        toml::to_string(&file).expect("arm config always serializes")
    }
}
