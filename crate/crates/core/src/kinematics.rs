//! First-order kinematic vehicle model with command clamping and swept
//! collision rejection.

use crate::geometry::{wrap_tau, Vec2};
use crate::world::World;
use serde::{Deserialize, Serialize};

/// Plan-view pose. `heading` is radians in `[0, 2π)`, counter-clockwise from +x.
/// Serialized as `{x, y, heading_deg}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "PoseRecord", into = "PoseRecord")]
pub struct MavPose {
    pub position: Vec2,
    pub heading: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseRecord {
    x: f64,
    y: f64,
    heading_deg: f64,
}

impl From<PoseRecord> for MavPose {
    fn from(r: PoseRecord) -> Self {
        MavPose::new(r.x, r.y, r.heading_deg.to_radians())
    }
}

impl From<MavPose> for PoseRecord {
    fn from(p: MavPose) -> Self {
        PoseRecord {
            x: p.position.x,
            y: p.position.y,
            heading_deg: p.heading.to_degrees(),
        }
    }
}

impl MavPose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            position: Vec2::new(x, y),
            heading: wrap_tau(heading),
        }
    }

    pub fn heading_unit(&self) -> Vec2 {
        Vec2::from_angle(self.heading)
    }

    pub fn heading_deg(&self) -> f64 {
        self.heading.to_degrees()
    }
}

/// Body-frame velocity command: forward along heading, lateral to the left.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VelocityCommand {
    pub v_forward: f64,
    pub v_lateral: f64,
    /// rad/s, positive counter-clockwise.
    pub yaw_rate: f64,
}

impl VelocityCommand {
    pub const ZERO: VelocityCommand = VelocityCommand {
        v_forward: 0.0,
        v_lateral: 0.0,
        yaw_rate: 0.0,
    };

    pub fn new(v_forward: f64, v_lateral: f64, yaw_rate: f64) -> Self {
        Self {
            v_forward,
            v_lateral,
            yaw_rate,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.v_forward.is_finite() && self.v_lateral.is_finite() && self.yaw_rate.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleParams {
    /// m/s, applied per axis.
    pub v_max: f64,
    pub omega_max_deg_s: f64,
    pub collision_radius: f64,
    /// Fixed integration step, seconds.
    pub dt: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            v_max: 1.0,
            omega_max_deg_s: 60.0,
            collision_radius: 0.15,
            dt: 0.05,
        }
    }
}

/// Per-component clamp to the vehicle limits, sign preserved. Non-finite
/// components become zero.
pub fn clamp_command(cmd: VelocityCommand, limits: &VehicleParams) -> VelocityCommand {
    let clamp = |v: f64, lim: f64| {
        if v.is_finite() {
            v.clamp(-lim, lim)
        } else {
            0.0
        }
    };
    let omega_max = limits.omega_max_deg_s.to_radians();
    VelocityCommand {
        v_forward: clamp(cmd.v_forward, limits.v_max),
        v_lateral: clamp(cmd.v_lateral, limits.v_max),
        yaw_rate: clamp(cmd.yaw_rate, omega_max),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub pose: MavPose,
    pub collision: bool,
}

/// Integrates one step. Translation uses the pre-step heading. A step whose
/// swept segment comes within `collision_radius` of geometry (or leaves the
/// bounds) is rejected: the prior pose is returned with `collision` set.
pub fn step(
    world: &World,
    pose: MavPose,
    cmd: VelocityCommand,
    dt: f64,
    collision_radius: f64,
) -> StepOutcome {
    let body = Vec2::new(cmd.v_forward, cmd.v_lateral);
    let displacement = body.rotate(pose.heading) * dt;
    let next_position = pose.position + displacement;
    let next = MavPose {
        position: next_position,
        heading: wrap_tau(pose.heading + cmd.yaw_rate * dt),
    };
    if displacement == Vec2::ZERO {
        return StepOutcome {
            pose: next,
            collision: false,
        };
    }
    let blocked = !world.contains(next_position)
        || world.swept_clearance(pose.position, next_position) < collision_radius;
    if blocked {
        StepOutcome {
            pose,
            collision: true,
        }
    } else {
        StepOutcome {
            pose: next,
            collision: false,
        }
    }
}
