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

//! Wire protocol of the live service: length-prefixed JSON messages over a
//! TCP stream. See `docs/protocol.md` for the message catalogue.

use std::io::{self, Read, Write};

use inchworm_core::collision::Capsule;
use inchworm_core::docking::Interface;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::command::{Command, CommandError};
use crate::scenario::{Block, Scenario};
use crate::simulation::Snapshot;
use crate::trace::TraceEvent;

pub const PROTOCOL_VERSION: &str = "inchworm/1";
/// Largest accepted frame body, bytes.
pub const MAX_FRAME_LEN: usize = 1 << 20;
pub const DEFAULT_PORT: u16 = 7878;
/// Environment variable holding the default service port.
pub const PORT_ENV: &str = "INCHWORM_PORT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    Hello {
        protocol: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        client: Option<String>,
    },
    Command {
        /// Echoed in the matching `ack` or `error`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<u64>,
        command: Command,
    },
    Bye,
}

/// Robot link geometry for rendering: capsules in segment frames.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry {
    pub name: String,
    pub capsule: Capsule,
}

/// Static part of the world, sent once in the welcome message.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub name: String,
    pub interfaces: Vec<Interface>,
    pub blocks: Vec<Block>,
    pub links: Vec<LinkGeometry>,
    pub gravity: [f64; 3],
}

impl Scene {
    pub fn from_scenario(s: &Scenario) -> Scene {
        Scene {
            name: s.name.clone(),
            interfaces: s.interfaces.clone(),
            blocks: s.blocks.clone(),
            links: s
                .robot
                .segments()
                .iter()
                .map(|seg| LinkGeometry {
                    name: seg.name.clone(),
                    capsule: seg.collision,
                })
                .collect(),
            gravity: s.gravity,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReply {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<u64>,
    #[serde(flatten)]
    pub error: CommandError,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Welcome {
        protocol: String,
        server: String,
        /// Control period, s.
        period: f64,
        snapshot_hz: f64,
        scene: Scene,
    },
    Snapshot(Snapshot),
    Ack {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<u64>,
    },
    Error(ErrorReply),
    Event {
        tick: u64,
        event: TraceEvent,
    },
    Goodbye {
        reason: String,
    },
}

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("frame of {0} bytes exceeds the limit")]
    TooLarge(usize),
}

/// Writes one frame: a 4-byte big-endian body length, then the JSON body.
pub fn write_frame<W: Write, T: Serialize>(out: &mut W, message: &T) -> Result<(), FrameError> {
    let body = serde_json::to_vec(message).map_err(io::Error::from)?;
    if body.len() > MAX_FRAME_LEN {
        return Err(FrameError::TooLarge(body.len()));
    }
    out.write_all(&(body.len() as u32).to_be_bytes())?;
    out.write_all(&body)?;
    out.flush()?;
    Ok(())
}

/// Reads one frame body. `Ok(None)` on a clean end of stream.
pub fn read_frame<R: Read>(input: &mut R) -> Result<Option<Vec<u8>>, FrameError> {
    let mut len = [0u8; 4];
    match input.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_FRAME_LEN {
        return Err(FrameError::TooLarge(len));
    }
    let mut body = vec![0u8; len];
    input.read_exact(&mut body)?;
    Ok(Some(body))
}

/// Port from `INCHWORM_PORT`, else the default.
pub fn default_port() -> u16 {
    std::env::var(PORT_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_PORT)
}
