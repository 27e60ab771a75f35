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

//! Quasi-static gravity loads on the joints.
//!
//! Torques are the moments gravity exerts about each joint axis from
//! everything distal to that joint, measured from the docked (supporting)
//! end. A holding actuator must supply the opposite torque; only magnitudes
//! matter for the feasibility check.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::kinematics::{DockingMode, End, JointConfig, KinematicChain, JOINT_COUNT};

/// Joint torques in N·m, in the joint order of the original chain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct TorqueVector(pub [f64; JOINT_COUNT]);

impl TorqueVector {
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, t| m.max(t.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|t| t.is_finite())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub torques: TorqueVector,
    /// `torque_limit − |τ|` per joint.
    pub margins: [f64; JOINT_COUNT],
    /// Joint with the smallest margin.
    pub worst_joint: usize,
    pub feasible: bool,
}

/// Force and moment the docked interface exerts on the arm, expressed in the
/// supporting end's frame and taken about its origin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReactionWrench {
    pub force: Vector3<f64>,
    pub moment: Vector3<f64>,
}

/// End that carries the load in `mode`. Both ends docked is statically
/// indeterminate; the base is taken as the support then.
pub fn supporting_end(mode: DockingMode) -> End {
    match mode {
        DockingMode::Inverted => End::E,
        DockingMode::Regular | DockingMode::Transition => End::B,
    }
}

/// Gravity torque on every joint. `gravity` is expressed in the frame of the
/// supporting end (`B` for regular docking, `E` for inverted docking).
pub fn gravity_torques(
    chain: &KinematicChain,
    q: &JointConfig,
    gravity: &Vector3<f64>,
    mode: DockingMode,
) -> TorqueVector {
    let support = supporting_end(mode);
    if support == chain.base_end() {
        TorqueVector(torques_from_base(chain, q, gravity))
    } else {
        let rerooted = chain.reroot();
        let t = torques_from_base(&rerooted, &chain.reverse_map(q), gravity);
        // Reversed joint order and negated angles.
        TorqueVector(std::array::from_fn(|i| -t[JOINT_COUNT - 1 - i]))
    }
}

fn torques_from_base(
    chain: &KinematicChain,
    q: &JointConfig,
    gravity: &Vector3<f64>,
) -> [f64; JOINT_COUNT] {
    let fk = chain.forward_kinematics(q);
    let weights: Vec<(Vector3<f64>, Vector3<f64>)> = chain
        .segments()
        .iter()
        .zip(fk.segment_poses.iter())
        .map(|(s, pose)| (pose.transform_point(&s.com), gravity * s.mass))
        .collect();
    std::array::from_fn(|i| {
        let axis = fk.joint_axis(chain, i);
        let origin = fk.joint_frames[i].translation;
        // Joint i carries segments i+1 onwards.
        let moment: Vector3<f64> = weights[i + 1..]
            .iter()
            .map(|(com, w)| (com - origin).cross(w))
            .sum();
        axis.dot(&moment)
    })
}

pub fn reaction_wrench(
    chain: &KinematicChain,
    q: &JointConfig,
    gravity: &Vector3<f64>,
    mode: DockingMode,
) -> ReactionWrench {
    let rooted = chain.rooted_at(supporting_end(mode));
    let q = if rooted.base_end() == chain.base_end() {
        *q
    } else {
        chain.reverse_map(q)
    };
    let fk = rooted.forward_kinematics(&q);
    let mut force = Vector3::zeros();
    let mut moment = Vector3::zeros();
    for (s, pose) in rooted.segments().iter().zip(fk.segment_poses.iter()) {
        let w = gravity * s.mass;
        force -= w;
        moment -= pose.transform_point(&s.com).cross(&w);
    }
    ReactionWrench { force, moment }
}

pub fn check_feasibility(
    chain: &KinematicChain,
    q: &JointConfig,
    gravity: &Vector3<f64>,
    mode: DockingMode,
) -> FeasibilityReport {
    let torques = gravity_torques(chain, q, gravity, mode);
    feasibility_from_torques(chain, torques)
}

pub fn feasibility_from_torques(
    chain: &KinematicChain,
    torques: TorqueVector,
) -> FeasibilityReport {
    let margins: [f64; JOINT_COUNT] =
        std::array::from_fn(|i| chain.joints()[i].torque_limit - torques.0[i].abs());
    let mut worst_joint = 0;
    for i in 1..JOINT_COUNT {
        if margins[i] < margins[worst_joint] {
            worst_joint = i;
        }
    }
    FeasibilityReport {
        torques,
        margins,
        worst_joint,
        feasible: margins.iter().all(|m| *m >= 0.0),
    }
}
