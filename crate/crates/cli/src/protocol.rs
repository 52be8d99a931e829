//! Telemetry messages. One JSON object per WebSocket text frame.

use colscan_core::fusion::ColumnAssessment;
use colscan_core::kinematics::VelocityCommand;
use colscan_core::sensors::UltrasoundReadings;
use colscan_core::sim::{SimEvent, TickOutput};
use colscan_core::MavPose;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Tick {
        t: u64,
        pose: MavPose,
        mode: String,
        lidar: Option<f64>,
        ultrasound: UltrasoundReadings,
        events: Vec<SimEvent>,
    },
    Assessment(ColumnAssessment),
    Error {
        msg: String,
    },
}

impl ServerMessage {
    pub fn tick(out: &TickOutput) -> Self {
        Self::Tick {
            t: out.tick,
            pose: out.pose,
            mode: out.mode.label().to_string(),
            lidar: out.lidar,
            ultrasound: out.ultrasound,
            events: out.events.clone(),
        }
    }

    pub fn error(msg: impl Into<String>) -> Self {
        Self::Error { msg: msg.into() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server message serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionCommand {
    Start,
    Reset,
    End,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    Pilot {
        v_forward: f64,
        v_lateral: f64,
        yaw_rate: f64,
    },
    Session {
        cmd: SessionCommand,
    },
    ClaimPilot,
}

impl ClientMessage {
    pub fn parse(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("bad message: {e}"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("client message serializes")
    }
}

impl From<VelocityCommand> for ClientMessage {
    fn from(c: VelocityCommand) -> Self {
        Self::Pilot {
            v_forward: c.v_forward,
            v_lateral: c.v_lateral,
            yaw_rate: c.yaw_rate,
        }
    }
}
