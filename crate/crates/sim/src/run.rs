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

//! Batch runs: a scenario plus a timed command script in, a trace and
//! metrics out.

use std::fs;
use std::path::Path;

use inchworm_core::rig::CONTROL_PERIOD;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::command::Command;
use crate::metrics::Metrics;
use crate::scenario::{Scenario, ScenarioError};
use crate::simulation::{Planning, Simulation};
use crate::trace::Trace;

/// A command issued at simulated time `t` (rounded to the control tick).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimedCommand {
    /// s
    pub t: f64,
    pub command: Command,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("commands[{index}]: {message}")]
    Script { index: usize, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunOptions {
    /// Overrides the scenario's step seed.
    pub seed: Option<u64>,
    pub budget_s: Option<f64>,
    pub duration_s: Option<f64>,
    /// Keep ticking at least this long, s.
    pub min_duration_s: f64,
    /// Hard stop, s.
    pub max_duration_s: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            seed: None,
            budget_s: None,
            duration_s: None,
            min_duration_s: 0.0,
            max_duration_s: 600.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub trace: Trace,
    pub metrics: Metrics,
}

pub fn load_commands(path: &Path) -> Result<Vec<TimedCommand>, RunError> {
    let text = fs::read_to_string(path).map_err(|e| RunError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let index = e
            .path()
            .iter()
            .find_map(|seg| match seg {
                serde_path_to_error::Segment::Seq { index } => Some(*index),
                _ => None,
            })
            .unwrap_or(0);
        RunError::Script {
            index,
            message: format!("{}: {}", e.path(), e.inner()),
        }
    })
}

fn tick_of(t: f64) -> u64 {
    (t / CONTROL_PERIOD).round() as u64
}

/// Runs `commands` against a fresh simulation of `scenario` until every
/// command has been issued and the robot is idle again (or the time limit
/// is hit). Planning runs inline, so equal inputs give equal traces.
pub fn run(
    scenario: &Scenario,
    commands: &[TimedCommand],
    options: &RunOptions,
) -> Result<RunOutput, RunError> {
    for (index, c) in commands.iter().enumerate() {
        if !(c.t >= 0.0 && c.t.is_finite()) {
            return Err(RunError::Script {
                index,
                message: "t must be finite and >= 0".into(),
            });
        }
    }
    let mut order: Vec<usize> = (0..commands.len()).collect();
    order.sort_by_key(|&i| tick_of(commands[i].t));

    let mut sim = Simulation::new(scenario, Planning::Inline)?;
    let mut defaults = scenario.step;
    if let Some(seed) = options.seed {
        defaults.seed = seed;
    }
    if let Some(b) = options.budget_s {
        defaults.budget_s = b;
    }
    if let Some(d) = options.duration_s {
        defaults.duration_s = d;
    }
    sim.set_step_defaults(defaults);

    let mut trace = Trace::new(&scenario.name, defaults.seed);
    trace.records.push(sim.record());
    let max_ticks = tick_of(options.max_duration_s);
    let min_ticks = tick_of(options.min_duration_s);
    let mut next = 0;
    let mut truncated = false;
    loop {
        let tick = sim.tick_count();
        if next == order.len() && tick >= min_ticks && sim.is_idle() {
            break;
        }
        if tick >= max_ticks {
            truncated = true;
            break;
        }
        while next < order.len() && tick_of(commands[order[next]].t) <= tick {
            let i = order[next];
            // Refusals are part of the trace; the run carries on.
            let _ = sim.apply("script", Some(i as u64), commands[i].command.clone());
            next += 1;
        }
        trace.records.push(sim.tick());
    }
    Ok(RunOutput {
        metrics: sim.metrics(truncated),
        trace,
    })
}

/// Runs the scenario's gait, or `steps` when given.
pub fn walk(
    scenario: &Scenario,
    steps: Option<Vec<inchworm_core::locomotion::StepGoal>>,
    options: &RunOptions,
) -> Result<RunOutput, RunError> {
    let commands = [TimedCommand {
        t: 0.0,
        command: Command::StartGait { steps },
    }];
    run(scenario, &commands, options)
}
