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

//! Scenario files: the persisted description of the structure, the robot
//! and how it starts out.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use inchworm_core::collision::{CollisionShape, DEFAULT_SAFETY_MARGIN};
use inchworm_core::control::{PoseTolerance, SolverParams};
use inchworm_core::docking::{DockingParams, Interface};
use inchworm_core::kinematics::default_chain;
use inchworm_core::locomotion::{StepGoal, StepOptions};
use inchworm_core::mockup;
use inchworm_core::planning::PlannerParams;
use inchworm_core::rig::{InitialStance, Rig, RigConfig, RigError};
use inchworm_core::{KinematicChain, Pose};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    /// The document does not match the schema. `path` locates the offending
    /// value, e.g. `interfaces[3]`.
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    /// The document parses but is inconsistent.
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

impl ScenarioError {
    fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        ScenarioError::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Location of the problem inside the document, when known.
    pub fn field(&self) -> Option<&str> {
        match self {
            ScenarioError::Io { .. } => None,
            ScenarioError::Schema { path, .. } => Some(path),
            ScenarioError::Invalid { field, .. } => Some(field),
        }
    }
}

/// Axis-aligned (in its own frame) rectangular block of the structure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Block {
    pub pose: Pose,
    /// m
    pub half_extents: [f64; 3],
}

impl Block {
    pub fn shape(&self) -> CollisionShape {
        let [x, y, z] = self.half_extents;
        CollisionShape::Box {
            pose: self.pose,
            half_extents: Vector3::new(x, y, z),
        }
    }
}

/// Defaults for locomotion steps started from this scenario.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepSettings {
    pub seed: u64,
    /// Planning budget per step, s.
    pub budget_s: f64,
    /// Requested trajectory duration per step, s.
    pub duration_s: f64,
    pub pose_tolerance: PoseTolerance,
}

impl Default for StepSettings {
    fn default() -> Self {
        let opts = StepOptions::default();
        StepSettings {
            seed: opts.seed,
            budget_s: opts.budget,
            duration_s: 6.0,
            pose_tolerance: opts.pose_tolerance,
        }
    }
}

impl StepSettings {
    pub fn options(&self) -> StepOptions {
        StepOptions {
            budget: self.budget_s,
            seed: self.seed,
            pose_tolerance: self.pose_tolerance,
        }
    }
}

fn default_safety_margin() -> f64 {
    DEFAULT_SAFETY_MARGIN
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Robot model; the built-in model when omitted.
    #[serde(default = "default_chain")]
    pub robot: KinematicChain,
    pub interfaces: Vec<Interface>,
    #[serde(default)]
    pub blocks: Vec<Block>,
    /// World frame, m/s².
    pub gravity: [f64; 3],
    pub initial: InitialStance,
    #[serde(default)]
    pub planner: PlannerParams,
    #[serde(default)]
    pub controller: SolverParams,
    #[serde(default)]
    pub docking: DockingParams,
    #[serde(default)]
    pub step: StepSettings,
    #[serde(default = "default_safety_margin")]
    pub safety_margin: f64,
    #[serde(default, skip_serializing_if = "is_false")]
    pub enforce_torque_limits: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gait: Option<Vec<StepGoal>>,
}

impl Scenario {
    /// The two-wall mockup with eight interfaces on a 0.30 m grid, both
    /// ends docked on the floor and the switch-in-place gait.
    pub fn mockup() -> Scenario {
        let blocks = mockup::blocks()
            .into_iter()
            .filter_map(|s| match s {
                CollisionShape::Box { pose, half_extents } => Some(Block {
                    pose,
                    half_extents: [half_extents.x, half_extents.y, half_extents.z],
                }),
                _ => None,
            })
            .collect();
        let step = StepSettings::default();
        Scenario {
            name: "mockup".into(),
            robot: default_chain(),
            interfaces: mockup::interfaces(),
            blocks,
            gravity: [0.0, 0.0, -9.81],
            initial: mockup::initial_stance(),
            planner: PlannerParams::default(),
            controller: SolverParams::default(),
            docking: DockingParams::default(),
            step,
            safety_margin: DEFAULT_SAFETY_MARGIN,
            enforce_torque_limits: false,
            gait: Some(mockup::switch_in_place_gait(step.duration_s)),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Scenario, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ScenarioError::Schema {
                path: if path == "." { "<root>".into() } else { path },
                message: e.into_inner().to_string(),
            }
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn save(&self, path: &Path) -> Result<(), ScenarioError> {
        fs::write(path, self.to_json_string() + "\n").map_err(|e| ScenarioError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn gravity(&self) -> Vector3<f64> {
        Vector3::from(self.gravity)
    }

    pub fn rig_config(&self) -> RigConfig {
        let mut config = RigConfig::new(
            self.robot.clone(),
            self.blocks.iter().map(Block::shape).collect(),
            self.gravity(),
        );
        config.docking = self.docking;
        config.solver = self.controller;
        config.planner = self.planner;
        config.safety_margin = self.safety_margin;
        config.enforce_torque_limits = self.enforce_torque_limits;
        config
    }

    /// A rig in the initial stance.
    pub fn build_rig(&self) -> Result<Rig, ScenarioError> {
        Rig::new(self.rig_config(), self.interfaces.clone(), &self.initial).map_err(|e| {
            let field = match &e {
                RigError::InvalidStance(m) if m.contains("away from") => "initial.also_docked",
                RigError::InvalidStance(m) if m.contains("q0") => "initial.q0",
                RigError::InvalidStance(_) => "robot",
                RigError::UnknownInterface(_) => "initial.interface",
                _ => "initial",
            };
            ScenarioError::invalid(field, e.to_string())
        })
    }

    pub fn interface(&self, id: &str) -> Option<&Interface> {
        self.interfaces.iter().find(|i| i.id == id)
    }

    /// Checks everything the schema cannot express.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.robot
            .validate()
            .map_err(|e| ScenarioError::invalid("robot", e.to_string()))?;

        let mut ids = BTreeSet::new();
        for (i, iface) in self.interfaces.iter().enumerate() {
            if iface.id.trim().is_empty() {
                return Err(ScenarioError::invalid(
                    format!("interfaces[{i}].id"),
                    "must not be empty",
                ));
            }
            if !ids.insert(iface.id.as_str()) {
                return Err(ScenarioError::invalid(
                    format!("interfaces[{i}].id"),
                    format!("duplicate interface id {}", iface.id),
                ));
            }
            if iface.occupied_by.is_some() {
                return Err(ScenarioError::invalid(
                    format!("interfaces[{i}].occupied_by"),
                    "occupancy follows from `initial`, do not set it",
                ));
            }
        }

        for (i, b) in self.blocks.iter().enumerate() {
            if !b.half_extents.iter().all(|h| h.is_finite() && *h > 0.0) {
                return Err(ScenarioError::invalid(
                    format!("blocks[{i}].half_extents"),
                    "must be finite and > 0",
                ));
            }
        }
        if !self.gravity.iter().all(|g| g.is_finite()) {
            return Err(ScenarioError::invalid("gravity", "must be finite"));
        }

        let known = |id: &str| ids.contains(id);
        if !known(&self.initial.interface) {
            return Err(ScenarioError::invalid(
                "initial.interface",
                format!("unknown interface {}", self.initial.interface),
            ));
        }
        if let Some(other) = &self.initial.also_docked {
            if !known(other) {
                return Err(ScenarioError::invalid(
                    "initial.also_docked",
                    format!("unknown interface {other}"),
                ));
            }
            if *other == self.initial.interface {
                return Err(ScenarioError::invalid(
                    "initial.also_docked",
                    "both ends cannot share one interface",
                ));
            }
        }
        if !self.initial.q0.is_finite() || !self.robot.within_limits(&self.initial.q0) {
            return Err(ScenarioError::invalid(
                "initial.q0",
                "outside the joint limits",
            ));
        }

        validate_planner(&self.planner)?;
        self.controller
            .validate()
            .map_err(|e| ScenarioError::invalid("controller", e.to_string()))?;
        let d = &self.docking;
        if !(d.close_duration > 0.0 && d.open_duration > 0.0) {
            return Err(ScenarioError::invalid(
                "docking",
                "clutch durations must be > 0",
            ));
        }
        if !(d.tolerance.translation > 0.0 && d.tolerance.rotation > 0.0) {
            return Err(ScenarioError::invalid("docking.tolerance", "must be > 0"));
        }
        let s = &self.step;
        if !(s.budget_s > 0.0 && s.budget_s.is_finite()) {
            return Err(ScenarioError::invalid("step.budget_s", "must be > 0"));
        }
        if !(s.duration_s > 0.0 && s.duration_s.is_finite()) {
            return Err(ScenarioError::invalid("step.duration_s", "must be > 0"));
        }
        if !(s.pose_tolerance.translation > 0.0 && s.pose_tolerance.rotation > 0.0) {
            return Err(ScenarioError::invalid("step.pose_tolerance", "must be > 0"));
        }
        if !(self.safety_margin >= 0.0 && self.safety_margin.is_finite()) {
            return Err(ScenarioError::invalid("safety_margin", "must be >= 0"));
        }
        if let Some(gait) = &self.gait {
            validate_steps(gait, &ids, "gait")?;
        }

        // Consistency of the stance itself (second end really on its interface).
        self.build_rig().map(|_| ())
    }
}

fn validate_planner(p: &PlannerParams) -> Result<(), ScenarioError> {
    let checks: [(&str, bool); 6] = [
        ("planner.eta", p.eta > 0.0 && p.eta.is_finite()),
        ("planner.goal_bias", (0.0..=1.0).contains(&p.goal_bias)),
        (
            "planner.iterations_per_second",
            p.iterations_per_second > 0.0 && p.iterations_per_second.is_finite(),
        ),
        ("planner.goal_samples", p.goal_samples > 0),
        (
            "planner.sampling_bound",
            p.sampling_bound > 0.0 && p.sampling_bound.is_finite(),
        ),
        ("planner.ik", p.ik.validate().is_ok()),
    ];
    match checks.iter().find(|(_, ok)| !ok) {
        Some((field, _)) => Err(ScenarioError::invalid(*field, "out of range")),
        None => Ok(()),
    }
}

/// Checks a step list against the known interface ids.
pub fn validate_steps(
    steps: &[StepGoal],
    ids: &BTreeSet<&str>,
    field: &str,
) -> Result<(), ScenarioError> {
    for (i, s) in steps.iter().enumerate() {
        if !ids.contains(s.target.as_str()) {
            return Err(ScenarioError::invalid(
                format!("{field}[{i}].target"),
                format!("unknown interface {}", s.target),
            ));
        }
        if !(s.duration > 0.0 && s.duration.is_finite()) {
            return Err(ScenarioError::invalid(
                format!("{field}[{i}].duration"),
                "must be > 0",
            ));
        }
    }
    Ok(())
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Scenario::from_json_str(&text)
}
