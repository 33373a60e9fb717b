//! JSON control grammar shared by the TCP (newline-delimited) and
//! WebSocket endpoints.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cue::CueAction;
use crate::manipulator::{AxisInput, Channel, Owner};
use crate::mixer::{Command, StateReport};

pub const DEFAULT_CONTROL_PORT: u16 = 7002;
pub const DEFAULT_WS_PORT: u16 = 7003;
/// Period of state pushes to subscribed sessions.
pub const STATE_PUSH_INTERVAL_US: u64 = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ControlMessage {
    Axes {
        avatar: String,
        #[serde(default)]
        forward: f64,
        #[serde(default)]
        lateral: f64,
        #[serde(default)]
        vertical: f64,
        #[serde(default)]
        yaw_rate: f64,
        #[serde(default)]
        pitch_rate: f64,
    },
    Ownership {
        avatar: String,
        channel: String,
        owner: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weight: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        partner: Option<String>,
    },
    FireCue {
        id: String,
    },
    SubscribeState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    State(StateReport),
    Error { message: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("bad control message: {0}")]
    Json(String),
    #[error("{0}")]
    Invalid(String),
}

/// A control message resolved against the engine's vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub enum ControlRequest {
    Axes { avatar: String, input: AxisInput },
    Command(Command),
    SubscribeState,
}

impl ControlMessage {
    pub fn into_request(self) -> Result<ControlRequest, ControlError> {
        Ok(match self {
            ControlMessage::Axes { avatar, forward, lateral, vertical, yaw_rate, pitch_rate } => ControlRequest::Axes {
                avatar,
                input: AxisInput::new(forward, lateral, vertical, yaw_rate, pitch_rate, 0),
            },
            ControlMessage::Ownership { avatar, channel, owner, weight, partner } => {
                let channel = channel.parse::<Channel>().map_err(|e| ControlError::Invalid(e.to_string()))?;
                let owner = Owner::from_parts(&owner, weight, partner.as_deref())
                    .map_err(|e| ControlError::Invalid(e.to_string()))?;
                ControlRequest::Command(Command::Action(CueAction::SetOwnership { avatar, channel, owner }))
            }
            ControlMessage::FireCue { id } => ControlRequest::Command(Command::FireCue { id }),
            ControlMessage::SubscribeState => ControlRequest::SubscribeState,
        })
    }
}

pub fn parse_control(text: &str) -> Result<ControlRequest, ControlError> {
    let msg: ControlMessage = serde_json::from_str(text.trim()).map_err(|e| ControlError::Json(e.to_string()))?;
    msg.into_request()
}

pub fn encode_server(msg: &ServerMessage) -> String {
    serde_json::to_string(msg).expect("server messages always serialize")
}
