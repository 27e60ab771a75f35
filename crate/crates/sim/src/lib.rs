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

//! Scenario files, the deterministic simulation loop, traces and metrics,
//! and the live service for the inchworm walking manipulator.

#![allow(clippy::large_enum_variant, clippy::neg_cmp_op_on_partial_ord)]

pub mod check;
pub mod command;
pub mod metrics;
pub mod protocol;
pub mod run;
pub mod scenario;
pub mod service;
pub mod simulation;
pub mod trace;

pub use command::{Command, CommandError, ErrorCode};
pub use metrics::{Metrics, StepMetrics};
pub use run::{run, walk, RunOptions, RunOutput, TimedCommand};
pub use scenario::{load_scenario, Scenario, ScenarioError};
pub use simulation::{Planning, Simulation, Snapshot};
pub use trace::{endpoint_paths, EndpointPath, Trace, TraceEvent, TraceRecord};
