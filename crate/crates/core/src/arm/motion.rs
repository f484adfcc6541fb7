use super::{clamp_to_limits, ArmConfig, JointVector, JOINT_COUNT};

/// Actual pose, commanded pose and the simulation clock of the arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmState {
    pub current: JointVector,
    pub target: JointVector,
    pub moving: bool,
    /// Seconds of simulated motion time.
    pub sim_clock: f64,
}

impl ArmState {
    /// An arm at rest at `pose`.
    pub fn at_rest(pose: JointVector) -> Self {
        Self {
            current: pose,
            target: pose,
            moving: false,
            sim_clock: 0.0,
        }
    }

    /// Commands a new target. The caller is expected to clamp it first.
    pub fn retarget(&mut self, cfg: &ArmConfig, target: JointVector) {
        self.target = clamp_to_limits(cfg, &target);
        self.moving = !settled(cfg, &self.current, &self.target);
    }

    /// Stops at the current pose.
    pub fn halt(&mut self) {
        self.target = self.current;
        self.moving = false;
    }
}

fn settled(cfg: &ArmConfig, current: &JointVector, target: &JointVector) -> bool {
    current.max_abs_diff(target) <= cfg.settle_tolerance
}

/// Advances the arm by `dt` seconds under independent constant-speed slewing.
///
/// Each joint covers at most `speed * dt` toward its target and never
/// overshoots. The arm keeps closing the residual gap after it has settled.
pub fn step_motion(cfg: &ArmConfig, s: &ArmState, dt: f64) -> ArmState {
    debug_assert!(dt > 0.0, "step_motion needs dt > 0");
    let dt = if dt.is_finite() { dt.max(0.0) } else { 0.0 };
    let mut next = *s;
    for i in 0..JOINT_COUNT {
        let gap = s.target[i] - s.current[i];
        let max_step = cfg.speeds[i] * dt;
        next.current[i] = if gap.abs() <= max_step {
            s.target[i]
        } else {
            s.current[i] + max_step.copysign(gap)
        };
    }
    next.current = clamp_to_limits(cfg, &next.current);
    next.moving = !settled(cfg, &next.current, &next.target);
    next.sim_clock = s.sim_clock + dt;
    next
}

/// Closed-form time for the slowest joint to cover its distance.
pub fn cycle_duration(cfg: &ArmConfig, from: &JointVector, to: &JointVector) -> f64 {
    (0..JOINT_COUNT)
        .map(|i| (to[i] - from[i]).abs() / cfg.speeds[i])
        .fold(0.0, f64::max)
}
