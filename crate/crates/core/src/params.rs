//! Run parameters with named overrides.
//!
//! Scenario files (`params`) and the command line (`--set key=value`) use the
//! same flat key space; see [`Params::apply`].

use crate::kinematics::VehicleParams;
use crate::perception::NoiseParams;
use crate::sensors::SensorConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissionParams {
    /// Bounding-box area fraction that ends the approach.
    pub area_threshold: f64,
    pub capture_interval_deg: f64,
    pub obstacle_stop_distance: f64,
    pub approach_speed: f64,
    pub orbit_speed_deg_s: f64,
    pub standoff_min: f64,
    pub max_orbit_radius: f64,
    /// Yaw gain, rad/s per unit of horizontal image offset.
    pub k_yaw: f64,
    pub lost_patience: u32,
}

impl Default for MissionParams {
    fn default() -> Self {
        Self {
            area_threshold: 0.10,
            capture_interval_deg: 30.0,
            obstacle_stop_distance: 0.5,
            approach_speed: 0.5,
            orbit_speed_deg_s: 15.0,
            standoff_min: 1.0,
            max_orbit_radius: 6.0,
            k_yaw: 2.0,
            lost_patience: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub mission: MissionParams,
    pub sensors: SensorConfig,
    pub vehicle: VehicleParams,
    pub noise: NoiseParams,
    pub tick_budget: u64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            mission: MissionParams::default(),
            sensors: SensorConfig::default(),
            vehicle: VehicleParams::default(),
            noise: NoiseParams::default(),
            tick_budget: 60_000,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("unknown parameter `{0}`")]
    Unknown(String),
    #[error("parameter `{key}`: {message}")]
    Invalid { key: String, message: String },
}

/// Every key accepted by [`Params::apply`].
pub const PARAM_KEYS: &[&str] = &[
    "area_threshold",
    "capture_interval_deg",
    "obstacle_stop_distance",
    "approach_speed",
    "orbit_speed_deg_s",
    "standoff_min",
    "max_orbit_radius",
    "k_yaw",
    "lost_patience",
    "lidar_max_range",
    "ultrasound_max_range",
    "ultrasound_cone_half_angle_deg",
    "ultrasound_rays",
    "hfov_deg",
    "vfov_deg",
    "min_detectable_area_fraction",
    "v_max",
    "omega_max_deg_s",
    "collision_radius",
    "dt",
    "miss_rate",
    "false_positive_rate",
    "jitter_sigma",
    "tick_budget",
];

fn as_count(key: &str, value: f64) -> Result<u64, ParamError> {
    if value >= 0.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
        Ok(value as u64)
    } else {
        Err(ParamError::Invalid {
            key: key.to_string(),
            message: format!("expected a non-negative integer, got {value}"),
        })
    }
}

impl Params {
    pub fn apply(&mut self, key: &str, value: f64) -> Result<(), ParamError> {
        if !value.is_finite() {
            return Err(ParamError::Invalid {
                key: key.to_string(),
                message: "value must be finite".into(),
            });
        }
        let m = &mut self.mission;
        let s = &mut self.sensors;
        let v = &mut self.vehicle;
        let n = &mut self.noise;
        match key {
            "area_threshold" => m.area_threshold = value,
            "capture_interval_deg" => m.capture_interval_deg = value,
            "obstacle_stop_distance" => m.obstacle_stop_distance = value,
            "approach_speed" => m.approach_speed = value,
            "orbit_speed_deg_s" => m.orbit_speed_deg_s = value,
            "standoff_min" => m.standoff_min = value,
            "max_orbit_radius" => m.max_orbit_radius = value,
            "k_yaw" => m.k_yaw = value,
            "lost_patience" => m.lost_patience = as_count(key, value)? as u32,
            "lidar_max_range" => s.lidar_max_range = value,
            "ultrasound_max_range" => s.ultrasound_max_range = value,
            "ultrasound_cone_half_angle_deg" => s.ultrasound_cone_half_angle_deg = value,
            "ultrasound_rays" => s.ultrasound_rays = as_count(key, value)? as u32,
            "hfov_deg" => s.hfov_deg = value,
            "vfov_deg" => s.vfov_deg = value,
            "min_detectable_area_fraction" => s.min_detectable_area_fraction = value,
            "v_max" => v.v_max = value,
            "omega_max_deg_s" => v.omega_max_deg_s = value,
            "collision_radius" => v.collision_radius = value,
            "dt" => v.dt = value,
            "miss_rate" => n.miss_rate = value,
            "false_positive_rate" => n.false_positive_rate = value,
            "jitter_sigma" => n.jitter_sigma = value,
            "tick_budget" => self.tick_budget = as_count(key, value)?,
            other => return Err(ParamError::Unknown(other.to_string())),
        }
        Ok(())
    }

    /// Parses `key=value`.
    pub fn apply_assignment(&mut self, assignment: &str) -> Result<(), ParamError> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| ParamError::Invalid {
                key: assignment.to_string(),
                message: "expected key=value".into(),
            })?;
        let key = key.trim();
        let value: f64 = raw.trim().parse().map_err(|_| ParamError::Invalid {
            key: key.to_string(),
            message: format!("`{}` is not a number", raw.trim()),
        })?;
        self.apply(key, value)
    }

    /// Checks ranges. Returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>, ParamError> {
        let invalid = |key: &str, message: String| ParamError::Invalid {
            key: key.to_string(),
            message,
        };
        let m = &self.mission;
        if !(m.area_threshold > 0.0 && m.area_threshold < 1.0) {
            return Err(invalid("area_threshold", "must be in (0, 1)".into()));
        }
        if !(m.capture_interval_deg > 0.0 && m.capture_interval_deg <= 360.0) {
            return Err(invalid(
                "capture_interval_deg",
                "must be in (0, 360]".into(),
            ));
        }
        for (key, value) in [
            ("obstacle_stop_distance", m.obstacle_stop_distance),
            ("approach_speed", m.approach_speed),
            ("orbit_speed_deg_s", m.orbit_speed_deg_s),
            ("standoff_min", m.standoff_min),
            ("max_orbit_radius", m.max_orbit_radius),
            ("v_max", self.vehicle.v_max),
            ("omega_max_deg_s", self.vehicle.omega_max_deg_s),
            ("dt", self.vehicle.dt),
        ] {
            if value <= 0.0 {
                return Err(invalid(key, format!("must be positive, got {value}")));
            }
        }
        if self.vehicle.collision_radius < 0.0 {
            return Err(invalid("collision_radius", "must be non-negative".into()));
        }
        self.sensors
            .validate()
            .map_err(|msg| invalid("sensors", msg))?;
        self.noise.validate().map_err(|msg| invalid("noise", msg))?;

        let mut warnings = Vec::new();
        let per_circle = 360.0 / m.capture_interval_deg;
        if (per_circle - per_circle.round()).abs() > 1e-9 {
            warnings.push(format!(
                "capture_interval_deg {} does not divide 360 evenly",
                m.capture_interval_deg
            ));
        }
        if m.obstacle_stop_distance <= self.vehicle.collision_radius {
            warnings.push("obstacle_stop_distance does not exceed collision_radius".into());
        }
        Ok(warnings)
    }
}
