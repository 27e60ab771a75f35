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

//! Trace files: one JSON object per line, a header followed by one record
//! per control tick.

use std::io::{BufRead, Write};

use inchworm_core::docking::{DockingEvent, IcuPhase, IcuState, Telemetry};
use inchworm_core::rig::CONTROL_PERIOD;
use inchworm_core::{DockingMode, End, JointConfig, Pose};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::command::{Command, CommandError};

pub const TRACE_FORMAT: &str = "inchworm-trace/1";

/// Everything that happens between two records besides the motion itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TraceEvent {
    /// A command as received, before it is applied.
    Command {
        source: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<u64>,
        command: Command,
    },
    CommandRejected {
        source: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<u64>,
        error: CommandError,
    },
    GaitStarted {
        steps: usize,
    },
    GaitFinished {
        success: bool,
    },
    StepStarted {
        index: usize,
        moved_end: End,
        from: String,
        target: String,
        mode: DockingMode,
        seed: u64,
    },
    PlanStarted {
        moved_end: End,
        target: String,
        seed: u64,
        budget_s: f64,
    },
    PlanFinished {
        moved_end: End,
        target: String,
        success: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        iterations: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cost: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        error: Option<String>,
    },
    StepFinished {
        index: usize,
        moved_end: End,
        target: String,
        success: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        error: Option<String>,
    },
    Docking {
        event: DockingEvent,
    },
    TrajectoryFinished,
    AnchorChanged {
        end: End,
    },
    MotionStopped {
        reason: String,
    },
}

/// Docking unit state as recorded and published.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DockState {
    pub end: End,
    pub phase: IcuPhase,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interface: Option<String>,
    pub coupled: bool,
    pub telemetry: Telemetry,
}

impl From<&IcuState> for DockState {
    fn from(icu: &IcuState) -> Self {
        DockState {
            end: icu.end,
            phase: icu.phase,
            interface: icu.interface.clone(),
            coupled: icu.is_coupled(),
            telemetry: icu.telemetry,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: String,
    pub scenario: String,
    pub seed: u64,
    /// s
    pub period: f64,
}

/// State after `tick` control periods, and the events of that period.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub tick: u64,
    /// s
    pub t: f64,
    pub q: JointConfig,
    /// World pose of `E`.
    pub tip: Pose,
    /// World pose of `B`.
    pub base: Pose,
    pub mode: DockingMode,
    pub anchor: End,
    pub motion: String,
    pub docks: [DockState; 2],
    /// Quasi-static joint torques, N·m.
    pub torques: [f64; 7],
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<TraceEvent>,
}

impl TraceRecord {
    pub fn end_pose(&self, end: End) -> &Pose {
        match end {
            End::B => &self.base,
            End::E => &self.tip,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum TraceLine {
    Header(TraceHeader),
    Tick(TraceRecord),
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("trace is empty")]
    Empty,
    #[error("unsupported trace format {0}")]
    Format(String),
    #[error("record {index}: {message}")]
    Inconsistent { index: usize, message: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn new(scenario: &str, seed: u64) -> Trace {
        Trace {
            header: TraceHeader {
                format: TRACE_FORMAT.into(),
                scenario: scenario.into(),
                seed,
                period: CONTROL_PERIOD,
            },
            records: Vec::new(),
        }
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut w = TraceWriter::new(&mut out, &self.header)?;
        for r in &self.records {
            w.write(r)?;
        }
        w.flush()
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Trace, TraceError> {
        let mut header = None;
        let mut records = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: TraceLine = serde_json::from_str(&line).map_err(|e| TraceError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            match parsed {
                TraceLine::Header(h) if header.is_none() && records.is_empty() => {
                    if h.format != TRACE_FORMAT {
                        return Err(TraceError::Format(h.format));
                    }
                    header = Some(h);
                }
                TraceLine::Header(_) => {
                    return Err(TraceError::Parse {
                        line: i + 1,
                        message: "header must be the first line".into(),
                    })
                }
                TraceLine::Tick(r) => records.push(r),
            }
        }
        let header = header.ok_or(TraceError::Empty)?;
        Ok(Trace { header, records })
    }

    /// Ticks are consecutive and timestamps sit on the fixed step grid.
    pub fn validate(&self) -> Result<(), TraceError> {
        for (i, r) in self.records.iter().enumerate() {
            if r.t != r.tick as f64 * self.header.period {
                return Err(TraceError::Inconsistent {
                    index: i,
                    message: format!("t = {} is not tick {} × period", r.t, r.tick),
                });
            }
            if i > 0 && r.tick != self.records[i - 1].tick + 1 {
                return Err(TraceError::Inconsistent {
                    index: i,
                    message: format!("tick {} follows {}", r.tick, self.records[i - 1].tick),
                });
            }
        }
        Ok(())
    }

    /// Every event, with the tick of the record it belongs to.
    pub fn events(&self) -> impl Iterator<Item = (u64, &TraceEvent)> {
        self.records
            .iter()
            .flat_map(|r| r.events.iter().map(move |e| (r.tick, e)))
    }
}

/// Streams a trace to `out` without keeping it in memory.
pub struct TraceWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut out: W, header: &TraceHeader) -> std::io::Result<Self> {
        serde_json::to_writer(&mut out, &TraceLine::Header(header.clone()))?;
        out.write_all(b"\n")?;
        Ok(TraceWriter { out })
    }

    pub fn write(&mut self, record: &TraceRecord) -> std::io::Result<()> {
        // Serializing through a borrowed wrapper avoids cloning the record.
        #[derive(Serialize)]
        struct Line<'a> {
            kind: &'static str,
            #[serde(flatten)]
            record: &'a TraceRecord,
        }
        serde_json::to_writer(
            &mut self.out,
            &Line {
                kind: "tick",
                record,
            },
        )?;
        self.out.write_all(b"\n")
    }

    pub fn flush(&mut self) -> std::io::Result<()> {
        self.out.flush()
    }
}

/// Path of the moving end during one step's trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndpointPath {
    pub step: usize,
    /// `Regular` when `E` moved, `Inverted` when `B` moved.
    pub label: String,
    pub moved_end: End,
    pub from: String,
    pub target: String,
    pub success: bool,
    /// World positions, one per control tick, m.
    pub points: Vec<[f64; 3]>,
}

/// Endpoint paths of all locomotion steps in the trace, in step order.
pub fn endpoint_paths(trace: &Trace) -> Vec<EndpointPath> {
    let mut out: Vec<EndpointPath> = Vec::new();
    let mut open: Option<EndpointPath> = None;
    for r in &trace.records {
        if let Some(path) = open.as_mut() {
            if r.motion == "trajectory" {
                let p = r.end_pose(path.moved_end).translation;
                path.points.push([p.x, p.y, p.z]);
            }
        }
        for e in &r.events {
            match e {
                TraceEvent::StepStarted {
                    index,
                    moved_end,
                    from,
                    target,
                    mode,
                    ..
                } => {
                    open = Some(EndpointPath {
                        step: *index,
                        label: mode_label(*mode).into(),
                        moved_end: *moved_end,
                        from: from.clone(),
                        target: target.clone(),
                        success: false,
                        points: Vec::new(),
                    });
                }
                TraceEvent::StepFinished { success, .. } => {
                    if let Some(mut path) = open.take() {
                        path.success = *success;
                        out.push(path);
                    }
                }
                _ => {}
            }
        }
    }
    out.extend(open);
    out
}

pub fn mode_label(mode: DockingMode) -> &'static str {
    match mode {
        DockingMode::Regular => "Regular",
        DockingMode::Inverted => "Inverted",
        DockingMode::Transition => "Transition",
    }
}
