//! Per-image damage levels and worst-case fusion across views.

use crate::kinematics::MavPose;
use crate::mission::CaptureRecord;
use crate::perception::{detect_damage, DamageDetection, DetectorConfig};
use crate::sensors::{camera_capture, SensorConfig};
use crate::world::{DamageKind, World};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Ordered damage ladder: no damage < light < severe.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
pub enum DamageState {
    #[default]
    #[serde(rename = "DS0_None")]
    Ds0None,
    #[serde(rename = "DS1_Light")]
    Ds1Light,
    #[serde(rename = "DS2_Severe")]
    Ds2Severe,
}

impl DamageState {
    /// Level implied by a single detected damage kind.
    pub fn of_kind(kind: DamageKind) -> Self {
        match kind {
            DamageKind::Spalling => Self::Ds1Light,
            DamageKind::RebarExposure => Self::Ds2Severe,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Ds0None => "DS0_None",
            Self::Ds1Light => "DS1_Light",
            Self::Ds2Severe => "DS2_Severe",
        }
    }
}

/// Spalling alone is light damage; any exposed reinforcement is severe.
pub fn classify_image(detections: &[DamageDetection]) -> DamageState {
    detections
        .iter()
        .map(|d| DamageState::of_kind(d.kind))
        .max()
        .unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DamageReport {
    pub capture: CaptureRecord,
    pub detections: Vec<DamageDetection>,
    pub image_level: DamageState,
}

impl DamageReport {
    pub fn new(capture: CaptureRecord, detections: Vec<DamageDetection>) -> Self {
        let image_level = classify_image(&detections);
        Self {
            capture,
            detections,
            image_level,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub report: usize,
    pub detection: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnAssessment {
    pub column_id: String,
    pub fused_state: DamageState,
    pub reports: Vec<DamageReport>,
    pub coverage_fraction: f64,
    /// Set when part of the surface was never imaged; the verdict may
    /// understate the true state.
    pub coverage_incomplete: bool,
    pub evidence: Vec<Evidence>,
    /// First and last tick of the scan in the run's trajectory log.
    pub scan_ticks: (u64, u64),
}

#[derive(Debug, Error, PartialEq)]
pub enum FusionError {
    #[error("cannot fuse an empty report list")]
    NoReports,
}

/// Worst case over views. Evidence cites every detection whose kind maps to
/// the fused level. Coverage is recorded verbatim and never changes the
/// verdict.
pub fn fuse(
    column_id: &str,
    reports: Vec<DamageReport>,
    coverage: f64,
) -> Result<ColumnAssessment, FusionError> {
    if reports.is_empty() {
        return Err(FusionError::NoReports);
    }
    let fused_state = reports
        .iter()
        .map(|r| r.image_level)
        .max()
        .unwrap_or_default();
    let evidence = if fused_state == DamageState::Ds0None {
        Vec::new()
    } else {
        reports
            .iter()
            .enumerate()
            .flat_map(|(ri, r)| {
                r.detections
                    .iter()
                    .enumerate()
                    .filter(|(_, d)| DamageState::of_kind(d.kind) == fused_state)
                    .map(move |(di, _)| Evidence {
                        report: ri,
                        detection: di,
                    })
            })
            .collect()
    };
    let first = reports.iter().map(|r| r.capture.tick).min().unwrap_or(0);
    let last = reports.iter().map(|r| r.capture.tick).max().unwrap_or(0);
    Ok(ColumnAssessment {
        column_id: column_id.to_string(),
        fused_state,
        reports,
        coverage_fraction: coverage,
        coverage_incomplete: coverage < 1.0,
        evidence,
        scan_ticks: (first, last),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SingleVsFused {
    pub single_view_state: DamageState,
    pub fused_state: DamageState,
}

/// Level from one fixed viewpoint next to the fused level of a scan, showing
/// how a single view can understate the damage.
pub fn figure5_check(
    world: &World,
    single_view_pose: &MavPose,
    sensors: &SensorConfig,
    detector: &DetectorConfig,
    scan_reports: &[DamageReport],
) -> Result<SingleVsFused, FusionError> {
    let obs = camera_capture(world, single_view_pose, 0, sensors);
    let single_view_state = classify_image(&detect_damage(&obs, detector));
    let fused_state = scan_reports
        .iter()
        .map(|r| r.image_level)
        .max()
        .ok_or(FusionError::NoReports)?;
    Ok(SingleVsFused {
        single_view_state,
        fused_state,
    })
}
