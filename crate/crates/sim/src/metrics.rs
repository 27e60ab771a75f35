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

//! Per-step measurements of a run.

use inchworm_core::locomotion::StepRecord;
use inchworm_core::{DockingMode, End};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub index: usize,
    pub moved_end: End,
    pub from: String,
    pub target: String,
    pub mode: DockingMode,
    pub seed: u64,
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Wall-clock planning time, s.
    pub planning_time_s: Option<f64>,
    /// Planner time to the first solution, s, counted in budget time
    /// (iterations divided by the configured iteration rate).
    pub first_solution_time_s: Option<f64>,
    pub iterations: Option<usize>,
    /// `(iteration, best cost)` each time the planner improved its solution.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub best_cost_history: Vec<(usize, f64)>,
    /// Joint-space path length, rad.
    pub path_cost_rad: Option<f64>,
    pub trajectory_duration_s: Option<f64>,
    /// Smallest distance to the structure while moving, m. Absent when the
    /// step never moved.
    pub min_clearance_m: Option<f64>,
    /// Largest quasi-static joint torque while moving, N·m.
    pub max_torque_nm: f64,
    /// Simulated time spent on the step, s.
    pub step_time_s: f64,
}

impl StepMetrics {
    pub fn from_record(index: usize, r: &StepRecord) -> StepMetrics {
        StepMetrics {
            index,
            moved_end: r.moved_end,
            from: r.from.clone(),
            target: r.target.clone(),
            mode: r.mode,
            seed: r.seed,
            success: r.success,
            error: r.error.clone(),
            planning_time_s: r.planning_time,
            first_solution_time_s: r.stats.as_ref().and_then(|s| s.first_solution_time),
            iterations: r.stats.as_ref().map(|s| s.iterations),
            best_cost_history: r
                .stats
                .as_ref()
                .map(|s| s.best_cost_history.clone())
                .unwrap_or_default(),
            path_cost_rad: r.cost,
            trajectory_duration_s: r.trajectory_duration,
            min_clearance_m: r.min_clearance.is_finite().then_some(r.min_clearance),
            max_torque_nm: r.max_torque,
            step_time_s: (r.end_time - r.start_time).max(0.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub scenario: String,
    pub seed: u64,
    pub ticks: u64,
    /// Simulated time, s.
    pub duration_s: f64,
    pub steps: Vec<StepMetrics>,
    /// Largest quasi-static joint torque over the whole run, N·m.
    pub max_torque_nm: f64,
    /// The run hit its time limit before going idle.
    pub truncated: bool,
}

impl Metrics {
    pub fn steps_succeeded(&self) -> usize {
        self.steps.iter().filter(|s| s.success).count()
    }

    pub fn all_steps_succeeded(&self) -> bool {
        self.steps.iter().all(|s| s.success)
    }
}
