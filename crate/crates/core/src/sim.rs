//! Fixed-step simulation loop shared by headless runs and the live server.
//!
//! Each tick: read sensors at the current pose, run the mission step, turn
//! capture events into damage reports, fuse on scan completion, clamp and
//! integrate the command, and log the tick.

use crate::fusion::{fuse, ColumnAssessment, DamageReport, DamageState};
use crate::kinematics::{clamp_command, step, MavPose, VelocityCommand};
use crate::mission::{
    coverage_so_far, mission_step, CaptureRecord, MissionEvent, MissionMode, MissionState,
    SensorFrame,
};
use crate::params::Params;
use crate::perception::{DamageDetector, DetectorConfig, OracleDetector};
use crate::report::{RunReport, TerminationReason, REPORT_FORMAT};
use crate::scenario::{PilotEntry, Scenario};
use crate::sensors::{camera_capture, lidar_read, ImageObservation, UltrasoundReadings};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum SimEvent {
    Mission {
        event: MissionEvent,
    },
    Collision {
        attempted: VelocityCommand,
    },
    Assessment {
        column_id: String,
        fused_state: DamageState,
        coverage_fraction: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickEvent {
    pub tick: u64,
    pub event: SimEvent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEntry {
    pub tick: u64,
    pub pose: MavPose,
    pub mode: MissionMode,
}

/// Everything observable about one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct TickOutput {
    pub tick: u64,
    /// Pose after integrating this tick's command.
    pub pose: MavPose,
    pub mode: MissionMode,
    pub lidar: Option<f64>,
    pub ultrasound: UltrasoundReadings,
    pub events: Vec<SimEvent>,
    pub assessments: Vec<ColumnAssessment>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PilotError {
    #[error("autopilot engaged")]
    AutopilotEngaged,
    #[error("command must be finite")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "ticks", rename_all = "snake_case")]
pub enum RunLimit {
    /// Stop when done or when `Params::tick_budget` runs out.
    UntilDone,
    /// Run exactly this many ticks (replay of a live session).
    Ticks(u64),
}

pub struct Simulation {
    scenario: Scenario,
    params: Params,
    seed: u64,
    detector: Box<dyn DamageDetector + Send>,
    pose: MavPose,
    mission: MissionState,
    tick: u64,
    held_pilot: VelocityCommand,
    pending_reports: Vec<DamageReport>,
    assessments: Vec<ColumnAssessment>,
    trajectory: Vec<TrajectoryEntry>,
    events: Vec<TickEvent>,
    pilot_inputs: Vec<PilotEntry>,
    capture_log: Vec<CaptureRecord>,
    episodes: u32,
    min_clearance: f64,
    warnings: Vec<String>,
}

impl Simulation {
    pub fn new(scenario: Scenario, params: Params, seed: u64) -> Self {
        let detector = OracleDetector::new(DetectorConfig {
            noise: params.noise,
            seed,
        });
        Self::with_detector(scenario, params, seed, Box::new(detector))
    }

    pub fn with_detector(
        scenario: Scenario,
        params: Params,
        seed: u64,
        detector: Box<dyn DamageDetector + Send>,
    ) -> Self {
        let warnings = params.validate().unwrap_or_else(|e| vec![e.to_string()]);
        let pose = scenario.initial_pose;
        let min_clearance = scenario.world.clearance(pose.position);
        Self {
            scenario,
            params,
            seed,
            detector,
            pose,
            mission: MissionState::default(),
            tick: 0,
            held_pilot: VelocityCommand::ZERO,
            pending_reports: Vec::new(),
            assessments: Vec::new(),
            trajectory: Vec::new(),
            events: Vec::new(),
            pilot_inputs: Vec::new(),
            capture_log: Vec::new(),
            episodes: 0,
            min_clearance,
            warnings,
        }
    }

    /// Back to the initial state; recorded inputs are discarded.
    pub fn reset(&mut self) {
        let detector = std::mem::replace(&mut self.detector, Box::new(OracleDetector::default()));
        *self = Self::with_detector(self.scenario.clone(), self.params, self.seed, detector);
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn pose(&self) -> MavPose {
        self.pose
    }

    pub fn mode(&self) -> MissionMode {
        self.mission.mode
    }

    pub fn mission(&self) -> &MissionState {
        &self.mission
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn assessments(&self) -> &[ColumnAssessment] {
        &self.assessments
    }

    pub fn capture_log(&self) -> &[CaptureRecord] {
        &self.capture_log
    }

    /// True once every column has been scanned (or rejected) and control is
    /// back with the pilot.
    pub fn all_columns_inspected(&self) -> bool {
        self.mission.mode == MissionMode::Manual
            && self
                .scenario
                .world
                .columns
                .iter()
                .all(|c| self.mission.inspected.contains(&c.id))
    }

    /// Sets the held pilot command from the current tick on. Rejected while
    /// the autopilot has control.
    pub fn submit_pilot(&mut self, cmd: VelocityCommand) -> Result<(), PilotError> {
        if !cmd.is_finite() {
            return Err(PilotError::NonFinite);
        }
        if self.mission.mode.is_autopilot() {
            return Err(PilotError::AutopilotEngaged);
        }
        self.held_pilot = cmd;
        let entry = PilotEntry {
            tick: self.tick,
            v_forward: cmd.v_forward,
            v_lateral: cmd.v_lateral,
            yaw_rate: cmd.yaw_rate,
        };
        match self.pilot_inputs.last_mut() {
            Some(last) if last.tick == self.tick => *last = entry,
            _ => self.pilot_inputs.push(entry),
        }
        Ok(())
    }

    fn sense(&self) -> (Option<f64>, UltrasoundReadings, ImageObservation) {
        let world = &self.scenario.world;
        let cfg = &self.params.sensors;
        (
            lidar_read(world, &self.pose, cfg),
            UltrasoundReadings::read(world, &self.pose, cfg),
            camera_capture(world, &self.pose, self.tick, cfg),
        )
    }

    pub fn step(&mut self) -> TickOutput {
        let t = self.tick;
        let (lidar, ultrasound, observation) = self.sense();
        let frame = SensorFrame {
            lidar,
            ultrasound,
            observation: &observation,
        };
        let mode_before = self.mission.mode;
        let out = mission_step(
            &self.mission,
            &self.pose,
            t,
            &frame,
            self.held_pilot,
            &self.params,
        );

        let mut events = Vec::new();
        let mut new_assessments = Vec::new();
        for ev in &out.events {
            match ev {
                MissionEvent::Capture(rec) => {
                    let mut image = observation.clone();
                    image
                        .visible_patches
                        .retain(|p| p.column_id == rec.column_id);
                    image.column_boxes.retain(|b| b.column_id == rec.column_id);
                    let detections = self.detector.detect(&image);
                    self.pending_reports
                        .push(DamageReport::new(rec.clone(), detections));
                    self.capture_log.push(rec.clone());
                }
                MissionEvent::ScanComplete { column_id, .. } => {
                    let world = &self.scenario.world;
                    let coverage = match (world.column_index(column_id), out.state.scan.as_ref()) {
                        (Some(ci), Some(scan)) => coverage_so_far(world, &scan.capture_log, ci),
                        _ => 0.0,
                    };
                    let reports = std::mem::take(&mut self.pending_reports);
                    if let Ok(a) = fuse(column_id, reports, coverage) {
                        self.episodes += 1;
                        new_assessments.push(a);
                    }
                }
                _ => {}
            }
            events.push(SimEvent::Mission { event: ev.clone() });
        }
        for a in &new_assessments {
            events.push(SimEvent::Assessment {
                column_id: a.column_id.clone(),
                fused_state: a.fused_state,
                coverage_fraction: a.coverage_fraction,
            });
        }

        let cmd = clamp_command(out.cmd, &self.params.vehicle);
        let v = &self.params.vehicle;
        let moved = step(
            &self.scenario.world,
            self.pose,
            cmd,
            v.dt,
            v.collision_radius,
        );
        if moved.collision {
            events.push(SimEvent::Collision { attempted: cmd });
        }

        self.trajectory.push(TrajectoryEntry {
            tick: t,
            pose: self.pose,
            mode: mode_before,
        });
        self.mission = out.state;
        if mode_before == MissionMode::Complete && self.mission.mode == MissionMode::Manual {
            self.held_pilot = VelocityCommand::ZERO;
        }
        self.pose = moved.pose;
        self.min_clearance = self
            .min_clearance
            .min(self.scenario.world.clearance(self.pose.position));
        self.events.extend(
            events
                .iter()
                .cloned()
                .map(|event| TickEvent { tick: t, event }),
        );
        self.assessments.extend(new_assessments.iter().cloned());
        self.tick += 1;

        TickOutput {
            tick: t,
            pose: self.pose,
            mode: self.mission.mode,
            lidar,
            ultrasound,
            events,
            assessments: new_assessments,
        }
    }

    /// Drives the loop with a scripted pilot. Entries rejected because the
    /// autopilot has control are dropped, exactly as live input would be.
    pub fn run_script(&mut self, script: &[PilotEntry], limit: RunLimit) -> TerminationReason {
        let last_script_tick = script.last().map_or(0, |e| e.tick);
        let mut next = 0;
        loop {
            match limit {
                RunLimit::Ticks(n) if self.tick >= n => return TerminationReason::SessionEnded,
                RunLimit::UntilDone if self.tick >= self.params.tick_budget => {
                    return TerminationReason::TickBudgetExhausted
                }
                _ => {}
            }
            while next < script.len() && script[next].tick <= self.tick {
                if script[next].tick == self.tick {
                    let _ = self.submit_pilot(script[next].command());
                }
                next += 1;
            }
            self.step();
            if limit == RunLimit::UntilDone {
                if self.all_columns_inspected() {
                    return TerminationReason::AllColumnsInspected;
                }
                if self.mission.mode == MissionMode::Manual
                    && self.episodes > 0
                    && self.tick > last_script_tick
                {
                    return TerminationReason::PilotScriptEnded;
                }
            }
        }
    }

    pub fn into_report(self, termination: TerminationReason) -> RunReport {
        RunReport {
            format: REPORT_FORMAT.to_string(),
            scenario: self.scenario.source.clone(),
            seed: self.seed,
            params: self.params,
            warnings: self.warnings,
            termination,
            ticks: self.tick,
            pilot_inputs: self.pilot_inputs,
            trajectory: self.trajectory,
            events: self.events,
            capture_log: self.capture_log,
            assessments: self.assessments,
            collisions: 0,
            min_clearance: self.min_clearance,
        }
        .with_collision_count()
    }

    pub fn report(&self, termination: TerminationReason) -> RunReport {
        RunReport {
            format: REPORT_FORMAT.to_string(),
            scenario: self.scenario.source.clone(),
            seed: self.seed,
            params: self.params,
            warnings: self.warnings.clone(),
            termination,
            ticks: self.tick,
            pilot_inputs: self.pilot_inputs.clone(),
            trajectory: self.trajectory.clone(),
            events: self.events.clone(),
            capture_log: self.capture_log.clone(),
            assessments: self.assessments.clone(),
            collisions: 0,
            min_clearance: self.min_clearance,
        }
        .with_collision_count()
    }
}

/// Runs a scenario to completion without a real-time clock.
pub fn run_headless(
    scenario: &Scenario,
    pilot_script: &[PilotEntry],
    seed: u64,
    params: Params,
    limit: RunLimit,
) -> RunReport {
    let mut sim = Simulation::new(scenario.clone(), params, seed);
    let termination = sim.run_script(pilot_script, limit);
    sim.into_report(termination)
}
