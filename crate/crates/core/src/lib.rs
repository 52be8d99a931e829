//! Deterministic simulator and mission library for semi-autonomous column
//! inspection with a small aerial vehicle.
//!
//! The pipeline: a pilot flies manually until the camera detects a column;
//! the autopilot approaches until the column fills enough of the frame,
//! orbits it at the lidar-measured standoff while capturing images at fixed
//! angular intervals (reversing once when a side ultrasonic sensor sees an
//! obstacle), and hands control back. Per-image damage detections are fused
//! worst-case into a damage state for the column.
//!
//! Modules, bottom up:
//!
//! - [`geometry`]: vectors, angles, circular arc sets.
//! - [`world`]: walls, obstacles, columns, ray casting and surface visibility.
//! - [`sensors`]: lidar, ultrasonic cones, synthetic camera.
//! - [`kinematics`]: vehicle pose, command clamping, collision-checked stepping.
//! - [`mission`]: the inspection state machine.
//! - [`perception`]: damage detector interface and noisy ground-truth oracle.
//! - [`fusion`]: per-image damage levels and worst-case fusion.
//! - [`scenario`], [`params`], [`sim`], [`report`]: files, the fixed-step loop
//!   and canonical run reports.

pub mod fusion;
pub mod geometry;
pub mod kinematics;
pub mod mission;
pub mod params;
pub mod perception;
pub mod report;
pub mod scenario;
pub mod sensors;
pub mod sim;
pub mod world;

pub use fusion::{classify_image, fuse, ColumnAssessment, DamageReport, DamageState};
pub use geometry::{Arc, ArcSet, Vec2};
pub use kinematics::{MavPose, VelocityCommand};
pub use mission::{CaptureReason, MissionMode, ScanDirection};
pub use params::Params;
pub use report::{read_report, replay, write_report, RunReport, TerminationReason};
pub use scenario::{load_pilot_script, load_scenario, PilotEntry, Scenario};
pub use sim::{run_headless, RunLimit, Simulation};
pub use world::{DamageKind, World};
