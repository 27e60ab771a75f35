/*
Copyright 2026 The Inchworm Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

//! Operator commands, shared by command scripts and the live service.

use inchworm_core::docking::{DockingError, Injection};
use inchworm_core::locomotion::{LocomotionError, StepGoal};
use inchworm_core::rig::RigError;
use inchworm_core::{End, Pose};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Command {
    /// Push the free end with a steering wrench `[fx, fy, fz, mx, my, mz]`
    /// given in the world frame. A zero wrench holds still.
    Jog {
        wrench: [f64; 6],
    },
    /// Drive the free end to a world pose.
    SetTarget {
        pose: Pose,
    },
    /// Stop jogging or target tracking.
    Stop,
    /// Close `end` on `interface`, or on the nearest free interface.
    Dock {
        end: End,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        interface: Option<String>,
    },
    Undock {
        end: End,
    },
    /// Full locomotion step: release `end`, plan, move, dock on `interface`.
    PlanTo {
        end: End,
        interface: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        budget_s: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        duration_s: Option<f64>,
    },
    /// Run `steps`, or the scenario's gait when omitted.
    StartGait {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        steps: Option<Vec<StepGoal>>,
    },
    /// Do not start further gait steps; the running step completes.
    StopGait,
    Inject {
        end: End,
        injection: Injection,
    },
    ResetFault {
        end: End,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Jog { .. } => "jog",
            Command::SetTarget { .. } => "set_target",
            Command::Stop => "stop",
            Command::Dock { .. } => "dock",
            Command::Undock { .. } => "undock",
            Command::PlanTo { .. } => "plan_to",
            Command::StartGait { .. } => "start_gait",
            Command::StopGait => "stop_gait",
            Command::Inject { .. } => "inject",
            Command::ResetFault { .. } => "reset_fault",
        }
    }
}

/// Machine-readable reason a command or message was refused.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    /// Not a well-formed message.
    Malformed,
    /// Handshake missing or for another protocol version.
    VersionMismatch,
    /// Arguments out of range or non-finite.
    InvalidArgument,
    UnknownInterface,
    /// Something else is in progress (motion, step, clutch).
    Busy,
    /// Not allowed in the current docking state.
    State,
    AlignmentError,
    OccupiedError,
    LastConnectionError,
    Faulted,
    /// The command mailbox is full; retry later.
    Overloaded,
}

#[derive(Clone, Debug, PartialEq, Error, Serialize, Deserialize)]
#[error("{message}")]
pub struct CommandError {
    pub code: ErrorCode,
    pub message: String,
}

impl CommandError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        CommandError {
            code,
            message: message.into(),
        }
    }
}

impl From<DockingError> for CommandError {
    fn from(e: DockingError) -> Self {
        let code = match &e {
            DockingError::AlignmentError { .. } => ErrorCode::AlignmentError,
            DockingError::StateError { .. } => ErrorCode::State,
            DockingError::OccupiedError(_) => ErrorCode::OccupiedError,
            DockingError::LastConnectionError(_) => ErrorCode::LastConnectionError,
            DockingError::UnknownInterface(_) => ErrorCode::UnknownInterface,
        };
        CommandError::new(code, e.to_string())
    }
}

impl From<RigError> for CommandError {
    fn from(e: RigError) -> Self {
        match e {
            RigError::Docking(d) => d.into(),
            RigError::Control(c) => CommandError::new(ErrorCode::InvalidArgument, c.to_string()),
            RigError::UnknownInterface(_) => {
                CommandError::new(ErrorCode::UnknownInterface, e.to_string())
            }
            RigError::Busy(_) => CommandError::new(ErrorCode::Busy, e.to_string()),
            RigError::NoFreeEnd => CommandError::new(ErrorCode::State, e.to_string()),
            RigError::Faulted => CommandError::new(ErrorCode::Faulted, e.to_string()),
            RigError::InvalidStance(_) => {
                CommandError::new(ErrorCode::InvalidArgument, e.to_string())
            }
        }
    }
}

impl From<LocomotionError> for CommandError {
    fn from(e: LocomotionError) -> Self {
        match e {
            LocomotionError::Rig(r) => r.into(),
            LocomotionError::InvalidGoal(m) if m.starts_with("unknown interface") => {
                CommandError::new(ErrorCode::UnknownInterface, m)
            }
            LocomotionError::InvalidGoal(m) if m.ends_with("is occupied") => {
                CommandError::new(ErrorCode::OccupiedError, m)
            }
            LocomotionError::InvalidGoal(m) => CommandError::new(ErrorCode::InvalidArgument, m),
            other => CommandError::new(ErrorCode::State, other.to_string()),
        }
    }
}
