//! Semi-autonomous inspection state machine.
//!
//! ```text
//! Manual ──detection──▶ Approach ──area ≥ threshold──▶ ScanInit ──▶ Scanning ─┐
//!   ▲                      │                              │        (reverse ≤1)│
//!   │◀──── target lost ────┘                              │                    ▼
//!   │◀──────────────── scan rejected ─────────────────────┘                Complete
//!   └──────────────────────────────────────────────────────────────────────────┘
//! ```
//!
//! [`mission_step`] is a pure transition function: the caller supplies the
//! fresh sensor frame and the pilot's command and receives the next state,
//! the velocity command for this tick and any events.
//!
//! While scanning, the vehicle faces the orbit center so the side ultrasonic
//! sensors look along the tangent. Counter-clockwise travel moves the vehicle
//! to its right; the sensor on the travel side gates the orbit.

use crate::geometry::{wrap_deg, wrap_pi, ArcSet, Vec2};
use crate::kinematics::{MavPose, VelocityCommand};
use crate::params::Params;
use crate::sensors::{
    bbox_half_angle, detect_column, BBox, ImageObservation, UltrasoundMount, UltrasoundReadings,
};
use crate::world::{visible_surface_arc, World};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::f64::consts::PI;
use thiserror::Error;

/// Degenerate-fill guard for [`estimate_column_radius`].
const FILL_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanDirection {
    Ccw,
    Cw,
}

impl ScanDirection {
    pub fn sign(self) -> f64 {
        match self {
            Self::Ccw => 1.0,
            Self::Cw => -1.0,
        }
    }

    pub fn reversed(self) -> Self {
        match self {
            Self::Ccw => Self::Cw,
            Self::Cw => Self::Ccw,
        }
    }

    /// Side sensor facing the direction of travel while facing the center.
    pub fn travel_side(self) -> UltrasoundMount {
        match self {
            Self::Ccw => UltrasoundMount::Right,
            Self::Cw => UltrasoundMount::Left,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
#[derive(Default)]
pub enum MissionMode {
    #[default]
    Manual,
    Approach,
    ScanInit,
    Scanning {
        direction: ScanDirection,
        reversed_once: bool,
    },
    Complete,
}

impl MissionMode {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Manual => "manual",
            Self::Approach => "approach",
            Self::ScanInit => "scan_init",
            Self::Scanning { .. } => "scanning",
            Self::Complete => "complete",
        }
    }

    pub fn is_autopilot(&self) -> bool {
        !matches!(self, Self::Manual)
    }

    /// Whether `self → next` is an edge of the mission graph. Staying put is
    /// always legal.
    pub fn can_transition_to(&self, next: &MissionMode) -> bool {
        use MissionMode::*;
        if self == next {
            return true;
        }
        match (self, next) {
            (Manual, Approach) | (Approach, ScanInit) | (Approach, Manual) => true,
            (
                ScanInit,
                Scanning {
                    direction,
                    reversed_once,
                },
            ) => *direction == ScanDirection::Ccw && !reversed_once,
            (ScanInit, Manual) => true,
            (
                Scanning {
                    direction: d0,
                    reversed_once: false,
                },
                Scanning {
                    direction: d1,
                    reversed_once: true,
                },
            ) => *d1 == d0.reversed(),
            (Scanning { .. }, Complete) | (Complete, Manual) => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaptureReason {
    ScanStart,
    Interval,
    ArcEnd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureRecord {
    pub column_id: String,
    pub tick: u64,
    pub pose: MavPose,
    /// Azimuth of the capture pose about the orbit center, `[0, 360)`.
    pub azimuth_deg: f64,
    /// Signed sweep since scan start, positive counter-clockwise.
    pub swept_deg: f64,
    pub reason: CaptureReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompletionReason {
    FullCircle,
    SecondArcEnd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanState {
    pub column_id: String,
    pub start_tick: u64,
    pub orbit_center: Vec2,
    pub orbit_radius: f64,
    pub start_azimuth_deg: f64,
    /// Cumulative signed sweep, degrees.
    pub swept_signed_deg: f64,
    /// Furthest counter-clockwise and clockwise sweep reached.
    pub max_swept_deg: f64,
    pub min_swept_deg: f64,
    last_azimuth_deg: f64,
    pub capture_log: Vec<CaptureRecord>,
    pub end_azimuths: Vec<f64>,
}

impl ScanState {
    /// Angular span covered so far, end to end.
    pub fn span_deg(&self) -> f64 {
        self.max_swept_deg - self.min_swept_deg
    }

    pub fn azimuth_of(&self, p: Vec2) -> f64 {
        wrap_deg((p - self.orbit_center).angle().to_degrees())
    }

    fn log(&mut self, tick: u64, pose: MavPose, reason: CaptureReason) -> CaptureRecord {
        let rec = CaptureRecord {
            column_id: self.column_id.clone(),
            tick,
            pose,
            azimuth_deg: self.azimuth_of(pose.position),
            swept_deg: self.swept_signed_deg,
            reason,
        };
        self.capture_log.push(rec.clone());
        rec
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum MissionEvent {
    ModeSwitch {
        from: MissionMode,
        to: MissionMode,
        /// True when control passes to the autopilot, false when it returns
        /// to the pilot.
        autopilot: bool,
    },
    TargetSelected {
        column_id: String,
        area_fraction: f64,
    },
    OrbitPlanned {
        column_id: String,
        center: Vec2,
        radius: f64,
    },
    Capture(CaptureRecord),
    Reversal {
        column_id: String,
        azimuth_deg: f64,
    },
    ScanComplete {
        column_id: String,
        reason: CompletionReason,
    },
    TargetLost {
        column_id: String,
    },
    ScanRejected {
        column_id: String,
        reason: String,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MissionError {
    #[error("invalid radius estimate inputs: distance {distance}, half-angle {half_angle}")]
    InvalidEstimateInput { distance: f64, half_angle: f64 },
    #[error("target fills the frame (sin of half-angle {sin_alpha:.6}); radius is unobservable")]
    DegenerateFill { sin_alpha: f64 },
    #[error("lidar reports no return")]
    LidarOutOfRange,
    #[error("orbit radius {radius:.3} m exceeds limit {limit:.3} m")]
    OrbitTooLarge { radius: f64, limit: f64 },
}

/// Column radius from the lidar range to its surface and the angular
/// half-width of its box: `sin α = r / (d + r)` solved for `r`.
pub fn estimate_column_radius(d_lidar: f64, half_angle: f64) -> Result<f64, MissionError> {
    if !(d_lidar > 0.0 && d_lidar.is_finite() && (0.0..PI / 2.0).contains(&half_angle)) {
        return Err(MissionError::InvalidEstimateInput {
            distance: d_lidar,
            half_angle,
        });
    }
    let s = half_angle.sin();
    if s >= 1.0 - FILL_EPS {
        return Err(MissionError::DegenerateFill { sin_alpha: s });
    }
    Ok(d_lidar * s / (1.0 - s))
}

/// Orbit geometry from the pose at the end of the approach: the estimated
/// column center lies `d + r̂` ahead along the heading.
pub fn begin_scan(
    column_id: &str,
    tick: u64,
    pose: &MavPose,
    d_lidar: Option<f64>,
    bbox: &BBox,
    params: &Params,
) -> Result<ScanState, MissionError> {
    let d = d_lidar.ok_or(MissionError::LidarOutOfRange)?;
    let r_hat = estimate_column_radius(d, bbox_half_angle(bbox, &params.sensors))?;
    let radius = d + r_hat;
    if radius > params.mission.max_orbit_radius {
        return Err(MissionError::OrbitTooLarge {
            radius,
            limit: params.mission.max_orbit_radius,
        });
    }
    let center = pose.position + pose.heading_unit() * radius;
    let start = wrap_deg((pose.position - center).angle().to_degrees());
    let mut scan = ScanState {
        column_id: column_id.to_string(),
        start_tick: tick,
        orbit_center: center,
        orbit_radius: radius,
        start_azimuth_deg: start,
        swept_signed_deg: 0.0,
        max_swept_deg: 0.0,
        min_swept_deg: 0.0,
        last_azimuth_deg: start,
        capture_log: Vec::new(),
        end_azimuths: Vec::new(),
    };
    scan.log(tick, *pose, CaptureReason::ScanStart);
    Ok(scan)
}

/// Fraction of the column surface seen from at least one capture pose.
pub fn coverage_so_far(world: &World, captures: &[CaptureRecord], column_index: usize) -> f64 {
    let mut union = ArcSet::new();
    for c in captures {
        if let Ok(arc) = visible_surface_arc(world, column_index, c.pose.position) {
            union.union(&arc);
        }
    }
    (union.measure_deg() / 360.0).clamp(0.0, 1.0)
}

/// Fresh readings for one tick.
#[derive(Debug, Clone, Copy)]
pub struct SensorFrame<'a> {
    pub lidar: Option<f64>,
    pub ultrasound: UltrasoundReadings,
    pub observation: &'a ImageObservation,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MissionState {
    pub mode: MissionMode,
    pub target: Option<String>,
    pub scan: Option<ScanState>,
    pub lost_ticks: u32,
    /// Columns already scanned or rejected; never reselected.
    pub inspected: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissionOutput {
    pub state: MissionState,
    pub cmd: VelocityCommand,
    pub events: Vec<MissionEvent>,
}

struct Transition {
    state: MissionState,
    events: Vec<MissionEvent>,
}

impl Transition {
    fn switch(&mut self, to: MissionMode) {
        let from = self.state.mode;
        debug_assert!(from.can_transition_to(&to), "{from:?} -> {to:?}");
        self.state.mode = to;
        if from != to {
            self.events.push(MissionEvent::ModeSwitch {
                from,
                to,
                autopilot: to.is_autopilot(),
            });
        }
    }

    fn finish(self, cmd: VelocityCommand) -> MissionOutput {
        MissionOutput {
            state: self.state,
            cmd,
            events: self.events,
        }
    }
}

pub fn mission_step(
    state: &MissionState,
    pose: &MavPose,
    tick: u64,
    sensors: &SensorFrame<'_>,
    pilot_cmd: VelocityCommand,
    params: &Params,
) -> MissionOutput {
    let mut tr = Transition {
        state: state.clone(),
        events: Vec::new(),
    };
    match state.mode {
        MissionMode::Manual => {
            manual(&mut tr, sensors);
            tr.finish(pilot_cmd)
        }
        MissionMode::Approach => {
            let cmd = approach(&mut tr, pose, tick, sensors, params);
            tr.finish(cmd)
        }
        MissionMode::ScanInit => {
            scan_init(&mut tr, pose, tick, sensors, params);
            tr.finish(VelocityCommand::ZERO)
        }
        MissionMode::Scanning {
            direction,
            reversed_once,
        } => {
            let cmd = scanning(
                &mut tr,
                pose,
                tick,
                sensors,
                params,
                direction,
                reversed_once,
            );
            tr.finish(cmd)
        }
        MissionMode::Complete => {
            if let Some(id) = tr.state.target.take() {
                tr.state.inspected.insert(id);
            }
            tr.state.scan = None;
            tr.switch(MissionMode::Manual);
            tr.finish(VelocityCommand::ZERO)
        }
    }
}

fn manual(tr: &mut Transition, sensors: &SensorFrame<'_>) {
    let mut candidates = sensors.observation.clone();
    candidates
        .column_boxes
        .retain(|b| !tr.state.inspected.contains(&b.column_id));
    if let Some(selected) = detect_column(&candidates) {
        tr.events.push(MissionEvent::TargetSelected {
            column_id: selected.column_id.clone(),
            area_fraction: selected.area_fraction,
        });
        tr.state.target = Some(selected.column_id.clone());
        tr.state.lost_ticks = 0;
        tr.switch(MissionMode::Approach);
    }
}

fn approach(
    tr: &mut Transition,
    pose: &MavPose,
    tick: u64,
    sensors: &SensorFrame<'_>,
    params: &Params,
) -> VelocityCommand {
    let m = &params.mission;
    let target = tr.state.target.clone().unwrap_or_default();
    let Some(tbox) = sensors.observation.column_box(&target) else {
        tr.state.lost_ticks += 1;
        if tr.state.lost_ticks >= m.lost_patience {
            tr.events
                .push(MissionEvent::TargetLost { column_id: target });
            tr.state.target = None;
            tr.state.lost_ticks = 0;
            tr.switch(MissionMode::Manual);
        }
        return VelocityCommand::ZERO;
    };
    tr.state.lost_ticks = 0;
    let yaw_rate = m.k_yaw * (0.5 - tbox.bbox.center_x());
    if tbox.area_fraction >= m.area_threshold
        && begin_scan(&target, tick, pose, sensors.lidar, &tbox.bbox, params).is_ok()
    {
        tr.switch(MissionMode::ScanInit);
        return VelocityCommand::ZERO;
    }
    let room_ahead = sensors.lidar.is_none_or(|d| d > m.standoff_min);
    let v_forward = if tbox.area_fraction < m.area_threshold && room_ahead {
        m.approach_speed
    } else {
        0.0
    };
    VelocityCommand::new(v_forward, 0.0, yaw_rate)
}

fn scan_init(
    tr: &mut Transition,
    pose: &MavPose,
    tick: u64,
    sensors: &SensorFrame<'_>,
    params: &Params,
) {
    let target = tr.state.target.clone().unwrap_or_default();
    let result = match sensors.observation.column_box(&target) {
        Some(b) => begin_scan(&target, tick, pose, sensors.lidar, &b.bbox, params)
            .map_err(|e| e.to_string()),
        None => Err("target not in frame".to_string()),
    };
    match result {
        Ok(scan) => {
            tr.events.push(MissionEvent::OrbitPlanned {
                column_id: scan.column_id.clone(),
                center: scan.orbit_center,
                radius: scan.orbit_radius,
            });
            tr.events
                .push(MissionEvent::Capture(scan.capture_log[0].clone()));
            tr.state.scan = Some(scan);
            tr.switch(MissionMode::Scanning {
                direction: ScanDirection::Ccw,
                reversed_once: false,
            });
        }
        Err(reason) => {
            tr.events.push(MissionEvent::ScanRejected {
                column_id: target.clone(),
                reason,
            });
            tr.state.inspected.insert(target);
            tr.state.target = None;
            tr.switch(MissionMode::Manual);
        }
    }
}

fn scanning(
    tr: &mut Transition,
    pose: &MavPose,
    tick: u64,
    sensors: &SensorFrame<'_>,
    params: &Params,
    direction: ScanDirection,
    reversed_once: bool,
) -> VelocityCommand {
    let m = &params.mission;
    let interval = m.capture_interval_deg;
    let scan = tr.state.scan.as_mut().expect("scanning without scan state");

    let az = scan.azimuth_of(pose.position);
    let delta = wrap_pi((az - scan.last_azimuth_deg).to_radians()).to_degrees();
    scan.last_azimuth_deg = az;
    scan.swept_signed_deg += delta;
    let swept = scan.swept_signed_deg;

    // Interval captures fire only when the sweep reaches new ground.
    if swept > scan.max_swept_deg {
        let first = (scan.max_swept_deg / interval).floor() as i64 + 1;
        let last = (swept / interval).floor() as i64;
        scan.max_swept_deg = swept;
        for _ in first.max(1)..=last {
            let rec = scan.log(tick, *pose, CaptureReason::Interval);
            tr.events.push(MissionEvent::Capture(rec));
        }
    } else if swept < scan.min_swept_deg {
        let first = (-scan.min_swept_deg / interval).floor() as i64 + 1;
        let last = (-swept / interval).floor() as i64;
        scan.min_swept_deg = swept;
        for _ in first.max(1)..=last {
            let rec = scan.log(tick, *pose, CaptureReason::Interval);
            tr.events.push(MissionEvent::Capture(rec));
        }
    }

    let column_id = scan.column_id.clone();
    if scan.span_deg() >= 360.0 {
        tr.events.push(MissionEvent::ScanComplete {
            column_id,
            reason: CompletionReason::FullCircle,
        });
        tr.switch(MissionMode::Complete);
        return VelocityCommand::ZERO;
    }

    let gate = sensors.ultrasound.get(direction.travel_side());
    if gate.is_some_and(|d| d < m.obstacle_stop_distance) {
        let rec = scan.log(tick, *pose, CaptureReason::ArcEnd);
        scan.end_azimuths.push(rec.azimuth_deg);
        tr.events.push(MissionEvent::Capture(rec));
        if reversed_once {
            tr.events.push(MissionEvent::ScanComplete {
                column_id,
                reason: CompletionReason::SecondArcEnd,
            });
            tr.switch(MissionMode::Complete);
            return VelocityCommand::ZERO;
        }
        tr.events.push(MissionEvent::Reversal {
            column_id,
            azimuth_deg: az,
        });
        let reversed = direction.reversed();
        tr.switch(MissionMode::Scanning {
            direction: reversed,
            reversed_once: true,
        });
        let scan = tr.state.scan.as_ref().expect("scan state");
        return orbit_command(scan, pose, reversed, params);
    }
    orbit_command(scan, pose, direction, params)
}

/// Velocity that moves the vehicle to the next point on the orbit circle
/// while turning to face the center there.
pub fn orbit_command(
    scan: &ScanState,
    pose: &MavPose,
    direction: ScanDirection,
    params: &Params,
) -> VelocityCommand {
    let dt = params.vehicle.dt;
    let r = scan.orbit_radius;
    let az = (pose.position - scan.orbit_center).angle();
    // Chord length per step must stay within the per-axis speed limit.
    let max_chord = 0.999 * params.vehicle.v_max * dt;
    let chord_limited = 2.0 * (max_chord / (2.0 * r)).min(1.0).asin();
    let step = (params.mission.orbit_speed_deg_s.to_radians() * dt).min(chord_limited);
    let next_az = az + direction.sign() * step;
    let target = scan.orbit_center + Vec2::from_angle(next_az) * r;
    let body = (target - pose.position).rotate(-pose.heading) * (1.0 / dt);
    let desired_heading = next_az + PI;
    let yaw_rate = wrap_pi(desired_heading - pose.heading) / dt;
    VelocityCommand::new(body.x, body.y, yaw_rate)
}
