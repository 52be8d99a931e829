//! Run reports: canonical serialization and replay verification.
//!
//! Canonical form is pretty-printed JSON with object keys sorted and every
//! floating-point number written with exactly six decimals, so two runs with
//! the same inputs produce the same bytes.

use crate::fusion::ColumnAssessment;
use crate::mission::CaptureRecord;
use crate::params::Params;
use crate::scenario::{load_scenario, PilotEntry, ScenarioError, ScenarioSource};
use crate::sim::{run_headless, RunLimit, SimEvent, TickEvent, TrajectoryEntry};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const REPORT_FORMAT: &str = "colscan-report/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    AllColumnsInspected,
    PilotScriptEnded,
    TickBudgetExhausted,
    SessionEnded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub format: String,
    pub scenario: ScenarioSource,
    pub seed: u64,
    pub params: Params,
    pub warnings: Vec<String>,
    pub termination: TerminationReason,
    /// Number of ticks simulated; trajectory ticks run `0..ticks`.
    pub ticks: u64,
    pub pilot_inputs: Vec<PilotEntry>,
    pub trajectory: Vec<TrajectoryEntry>,
    pub events: Vec<TickEvent>,
    pub capture_log: Vec<CaptureRecord>,
    pub assessments: Vec<ColumnAssessment>,
    pub collisions: u64,
    /// Smallest distance from the vehicle to any surface over the run.
    pub min_clearance: f64,
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("report contains a non-finite number at {0}")]
    NonFinite(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: at `{field}`: {message}")]
    Schema {
        path: String,
        field: String,
        line: usize,
        message: String,
    },
    #[error("unsupported report format `{0}`")]
    Format(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("scenario {path} changed since the run (hash {actual}, report says {expected})")]
    ScenarioChanged {
        path: String,
        expected: String,
        actual: String,
    },
}

impl RunReport {
    pub(crate) fn with_collision_count(mut self) -> Self {
        self.collisions = self
            .events
            .iter()
            .filter(|e| matches!(e.event, SimEvent::Collision { .. }))
            .count() as u64;
        self
    }

    /// Capture log of the given reason, in order.
    pub fn captures(
        &self,
        reason: crate::mission::CaptureReason,
    ) -> impl Iterator<Item = &CaptureRecord> {
        self.capture_log.iter().filter(move |c| c.reason == reason)
    }

    pub fn to_canonical_json(&self) -> Result<String, ReportError> {
        let value = serde_json::to_value(self).expect("report serializes");
        // serde_json maps NaN and infinities to null, so check the source
        // values before they are lost.
        self.check_finite()?;
        let mut out = String::new();
        write_canonical(&value, 0, &mut out);
        out.push('\n');
        Ok(out)
    }

    fn check_finite(&self) -> Result<(), ReportError> {
        let bad = |what: String| Err(ReportError::NonFinite(what));
        for e in &self.trajectory {
            if !e.pose.position.is_finite() || !e.pose.heading.is_finite() {
                return bad(format!("trajectory tick {}", e.tick));
            }
        }
        for c in &self.capture_log {
            if !c.pose.position.is_finite()
                || !c.azimuth_deg.is_finite()
                || !c.swept_deg.is_finite()
            {
                return bad(format!("capture at tick {}", c.tick));
            }
        }
        for a in &self.assessments {
            if !a.coverage_fraction.is_finite() {
                return bad(format!("assessment of {}", a.column_id));
            }
            for r in &a.reports {
                for d in &r.detections {
                    let b = d.region;
                    if ![b.x_min, b.y_min, b.x_max, b.y_max, d.confidence]
                        .iter()
                        .all(|v| v.is_finite())
                    {
                        return bad(format!("detection at tick {}", r.capture.tick));
                    }
                }
            }
        }
        for p in &self.pilot_inputs {
            if !p.command().is_finite() {
                return bad(format!("pilot input at tick {}", p.tick));
            }
        }
        if !self.min_clearance.is_finite() {
            return bad("min_clearance".into());
        }
        let params = serde_json::to_value(self.params).expect("params serialize");
        if contains_null(&params) {
            return bad("params".into());
        }
        Ok(())
    }

    pub fn from_json(text: &str, label: &str) -> Result<Self, ReportError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let report: RunReport = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            let inner = e.into_inner();
            ReportError::Schema {
                path: label.to_string(),
                field,
                line: inner.line(),
                message: inner.to_string(),
            }
        })?;
        if report.format != REPORT_FORMAT {
            return Err(ReportError::Format(report.format));
        }
        Ok(report)
    }
}

fn contains_null(v: &Value) -> bool {
    match v {
        Value::Null => true,
        Value::Array(a) => a.iter().any(contains_null),
        Value::Object(o) => o.values().any(contains_null),
        _ => false,
    }
}

fn format_float(f: f64) -> String {
    let s = format!("{f:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

fn write_canonical(v: &Value, indent: usize, out: &mut String) {
    const PAD: &str = "  ";
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_u64() {
                let _ = write!(out, "{i}");
            } else if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else {
                out.push_str(&format_float(n.as_f64().unwrap_or(0.0)));
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string")),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                out.push_str(&PAD.repeat(indent + 1));
                write_canonical(item, indent + 1, out);
                if i + 1 < items.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            out.push_str(&PAD.repeat(indent));
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, k) in keys.iter().enumerate() {
                out.push_str(&PAD.repeat(indent + 1));
                out.push_str(&serde_json::to_string(k).expect("key"));
                out.push_str(": ");
                write_canonical(&map[*k], indent + 1, out);
                if i + 1 < keys.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            out.push_str(&PAD.repeat(indent));
            out.push('}');
        }
    }
}

/// Writes the canonical form. Refuses reports holding NaN or infinities.
pub fn write_report(report: &RunReport, path: impl AsRef<Path>) -> Result<(), ReportError> {
    let path = path.as_ref();
    let text = report.to_canonical_json()?;
    std::fs::write(path, text).map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_report(path: impl AsRef<Path>) -> Result<RunReport, ReportError> {
    let path = path.as_ref();
    let label = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| ReportError::Io {
        path: label.clone(),
        source,
    })?;
    RunReport::from_json(&text, &label)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayVerdict {
    pub capture_log_matches: bool,
    pub bytes_match: bool,
    /// First differing line of the canonical text, if any.
    pub first_difference: Option<(usize, String, String)>,
    pub replayed: RunReport,
}

impl ReplayVerdict {
    pub fn is_match(&self) -> bool {
        self.capture_log_matches && self.bytes_match
    }
}

/// Locates the scenario a report was produced from: the recorded path as
/// given, then relative to the report's directory.
fn resolve_scenario_path(recorded: &str, report_path: Option<&Path>) -> PathBuf {
    let direct = PathBuf::from(recorded);
    if direct.exists() {
        return direct;
    }
    if let Some(dir) = report_path.and_then(Path::parent) {
        let candidate = dir.join(recorded);
        if candidate.exists() {
            return candidate;
        }
    }
    direct
}

/// Re-runs a report's inputs headless and compares the results.
pub fn replay(
    report: &RunReport,
    report_path: Option<&Path>,
) -> Result<ReplayVerdict, ReportError> {
    let path = resolve_scenario_path(&report.scenario.path, report_path);
    let mut scenario = load_scenario(&path)?;
    if scenario.source.sha256 != report.scenario.sha256 {
        return Err(ReportError::ScenarioChanged {
            path: path.display().to_string(),
            expected: report.scenario.sha256.clone(),
            actual: scenario.source.sha256,
        });
    }
    // Keep the recorded label so the canonical bytes are comparable.
    scenario.source.path = report.scenario.path.clone();
    let limit = match report.termination {
        TerminationReason::SessionEnded => RunLimit::Ticks(report.ticks),
        _ => RunLimit::UntilDone,
    };
    let replayed = run_headless(
        &scenario,
        &report.pilot_inputs,
        report.seed,
        report.params,
        limit,
    );

    let original_text = report.to_canonical_json()?;
    let replay_text = replayed.to_canonical_json()?;
    let first_difference = original_text
        .lines()
        .zip(replay_text.lines())
        .enumerate()
        .find(|(_, (a, b))| a != b)
        .map(|(i, (a, b))| (i + 1, a.to_string(), b.to_string()))
        .or_else(|| {
            let (a, b) = (original_text.lines().count(), replay_text.lines().count());
            (a != b).then(|| (a.min(b) + 1, format!("{a} lines"), format!("{b} lines")))
        });
    let capture_log_matches =
        canonical_captures(&report.capture_log) == canonical_captures(&replayed.capture_log);
    Ok(ReplayVerdict {
        capture_log_matches,
        bytes_match: first_difference.is_none(),
        first_difference,
        replayed,
    })
}

fn canonical_captures(log: &[CaptureRecord]) -> String {
    let mut out = String::new();
    write_canonical(
        &serde_json::to_value(log).expect("captures serialize"),
        0,
        &mut out,
    );
    out
}
