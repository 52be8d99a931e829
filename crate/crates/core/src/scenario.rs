//! Scenario and pilot-script files.
//!
//! A scenario is strict UTF-8 JSON:
//!
//! ```json
//! {
//!   "name": "center",
//!   "bounds": [10.0, 10.0],
//!   "walls": [{"x1": 0, "y1": 4, "x2": 3, "y2": 4}],
//!   "obstacles": [{"cx": 2, "cy": 8, "r": 0.4}],
//!   "columns": [{"id": "C1", "cx": 5, "cy": 5, "radius": 0.3, "height": 3.0,
//!                "attached": false,
//!                "damage": [{"id": "P1", "kind": "rebar_exposure",
//!                            "az_start_deg": 150, "az_end_deg": 210,
//!                            "z_low": 0.5, "z_high": 1.5}]}],
//!   "mav": {"x": 1, "y": 1, "heading_deg": 0},
//!   "params": {"capture_interval_deg": 30}
//! }
//! ```
//!
//! The bounds rectangle always contributes four boundary walls; `walls`
//! lists interior walls only. Unknown keys anywhere are rejected.

use crate::geometry::{Arc, Vec2};
use crate::kinematics::{MavPose, VelocityCommand};
use crate::params::{ParamError, Params};
use crate::world::{Column, DamageKind, DamagePatch, InvariantViolation, Obstacle, Wall, World};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}, column {column}: at `{field}`: {message}")]
    Parse {
        path: String,
        field: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: invariant violated by {violation}")]
    Invariant {
        path: String,
        violation: InvariantViolation,
    },
    #[error("{path}: {source}")]
    Param {
        path: String,
        #[source]
        source: ParamError,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    bounds: [f64; 2],
    #[serde(default)]
    walls: Vec<WallSpec>,
    #[serde(default)]
    obstacles: Vec<ObstacleSpec>,
    #[serde(default)]
    columns: Vec<ColumnSpec>,
    mav: MavSpec,
    #[serde(default)]
    params: BTreeMap<String, f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WallSpec {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObstacleSpec {
    cx: f64,
    cy: f64,
    r: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ColumnSpec {
    id: String,
    cx: f64,
    cy: f64,
    radius: f64,
    height: f64,
    #[serde(default)]
    attached: bool,
    #[serde(default)]
    damage: Vec<PatchSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PatchSpec {
    id: String,
    kind: DamageKind,
    az_start_deg: f64,
    az_end_deg: f64,
    z_low: f64,
    z_high: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MavSpec {
    x: f64,
    y: f64,
    heading_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSource {
    pub name: String,
    pub path: String,
    /// Hex SHA-256 of the file bytes.
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub world: World,
    pub initial_pose: MavPose,
    pub overrides: BTreeMap<String, f64>,
    pub source: ScenarioSource,
}

impl Scenario {
    /// Defaults with the scenario's overrides applied.
    pub fn params(&self) -> Params {
        let mut p = Params::default();
        for (k, v) in &self.overrides {
            p.apply(k, *v).expect("overrides checked at load");
        }
        p
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let label = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: label.clone(),
        source,
    })?;
    parse_scenario(&text, &label)
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str, label: &str) -> Result<T, ScenarioError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        ScenarioError::Parse {
            path: label.to_string(),
            field,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })
}

/// Parses and validates scenario text. `label` names the source in errors
/// and in the returned [`ScenarioSource`].
pub fn parse_scenario(text: &str, label: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = parse_json(text, label)?;
    let invariant = |violation| ScenarioError::Invariant {
        path: label.to_string(),
        violation,
    };

    let walls = file
        .walls
        .iter()
        .map(|w| Wall {
            a: Vec2::new(w.x1, w.y1),
            b: Vec2::new(w.x2, w.y2),
        })
        .collect();
    let obstacles = file
        .obstacles
        .iter()
        .map(|o| Obstacle {
            center: Vec2::new(o.cx, o.cy),
            radius: o.r,
        })
        .collect();
    let mut columns = Vec::with_capacity(file.columns.len());
    for c in file.columns {
        let mut patches = Vec::with_capacity(c.damage.len());
        for p in c.damage {
            let entity = format!("column {} patch {}", c.id, p.id);
            if !(0.0..360.0).contains(&p.az_start_deg) || !(0.0..=360.0).contains(&p.az_end_deg) {
                return Err(invariant(InvariantViolation {
                    entity,
                    message: "azimuths must satisfy 0 <= start < 360 and 0 <= end <= 360".into(),
                }));
            }
            let width = if p.az_end_deg > p.az_start_deg {
                p.az_end_deg - p.az_start_deg
            } else {
                p.az_end_deg + 360.0 - p.az_start_deg
            };
            if p.az_end_deg == p.az_start_deg {
                return Err(invariant(InvariantViolation {
                    entity,
                    message: "empty azimuth interval".into(),
                }));
            }
            patches.push(DamagePatch {
                id: p.id,
                kind: p.kind,
                azimuth: Arc::new(p.az_start_deg, width),
                z_low: p.z_low,
                z_high: p.z_high,
            });
        }
        columns.push(Column {
            id: c.id,
            center: Vec2::new(c.cx, c.cy),
            radius: c.radius,
            height: c.height,
            attached: c.attached,
            patches,
        });
    }

    let world = World::new(
        file.name.clone(),
        file.bounds[0],
        file.bounds[1],
        walls,
        obstacles,
        columns,
    )
    .map_err(invariant)?;

    let pose = MavPose::new(file.mav.x, file.mav.y, file.mav.heading_deg.to_radians());
    if !pose.position.is_finite() || !world.contains(pose.position) {
        return Err(invariant(InvariantViolation {
            entity: "mav".into(),
            message: "initial position outside bounds".into(),
        }));
    }

    let mut params = Params::default();
    for (k, v) in &file.params {
        params.apply(k, *v).map_err(|source| ScenarioError::Param {
            path: label.to_string(),
            source,
        })?;
    }
    params.validate().map_err(|source| ScenarioError::Param {
        path: label.to_string(),
        source,
    })?;

    Ok(Scenario {
        world,
        initial_pose: pose,
        overrides: file.params,
        source: ScenarioSource {
            name: file.name,
            path: label.to_string(),
            sha256: sha256_hex(text.as_bytes()),
        },
    })
}

/// One line of a pilot script: the command held from `tick` onward while
/// the vehicle is under manual control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PilotEntry {
    pub tick: u64,
    pub v_forward: f64,
    pub v_lateral: f64,
    pub yaw_rate: f64,
}

impl PilotEntry {
    pub fn command(&self) -> VelocityCommand {
        VelocityCommand::new(self.v_forward, self.v_lateral, self.yaw_rate)
    }
}

pub fn parse_pilot_script(text: &str, label: &str) -> Result<Vec<PilotEntry>, ScenarioError> {
    let mut entries: Vec<PilotEntry> = parse_json(text, label)?;
    for (i, e) in entries.iter().enumerate() {
        if !e.command().is_finite() {
            return Err(ScenarioError::Parse {
                path: label.to_string(),
                field: format!("[{i}]"),
                line: 0,
                column: 0,
                message: "non-finite command".into(),
            });
        }
    }
    // Stable: later entries for the same tick win.
    entries.sort_by_key(|e| e.tick);
    Ok(entries)
}

pub fn load_pilot_script(path: impl AsRef<Path>) -> Result<Vec<PilotEntry>, ScenarioError> {
    let path = path.as_ref();
    let label = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: label.clone(),
        source,
    })?;
    parse_pilot_script(&text, &label)
}
