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

//! The desk-scale satellite mockup: a floor and a wall of 0.30 m cubes
//! meeting at a right angle, with eight passive interfaces on a 0.30 m grid.
//!
//! World frame: the floor top is `z = 0`, the wall face is `x = 0`, the
//! structure occupies `x < 0 ∨ z < 0`.
//!
//! ```text
//!   z
//!   |  W2  W4        (wall, x = 0, facing +x)
//!   |  W1  W3
//!   +-------- x
//!       F1  F2       (floor, z = 0, facing +z; y = -0.15)
//!       F3  F4       (y = +0.15)
//! ```

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{UnitQuaternion, Vector3};

use crate::collision::CollisionShape;
use crate::docking::{Interface, InterfaceKind};
use crate::kinematics::{End, JointConfig};
use crate::locomotion::StepGoal;
use crate::pose::Pose;
use crate::rig::InitialStance;

pub const BLOCK_SIZE: f64 = 0.30;
const ROWS: [f64; 2] = [-0.15, 0.15];
const CENTERS: [f64; 3] = [0.15, 0.45, 0.75];

fn cube(center: Vector3<f64>) -> CollisionShape {
    let h = BLOCK_SIZE / 2.0;
    CollisionShape::Box {
        pose: Pose::new(center, UnitQuaternion::identity()),
        half_extents: Vector3::new(h, h, h),
    }
}

/// Fourteen cubes: a 3×2 floor, a 3×2 wall and the two corner cubes.
pub fn blocks() -> Vec<CollisionShape> {
    let h = BLOCK_SIZE / 2.0;
    let mut out = Vec::new();
    for y in ROWS {
        for c in CENTERS {
            out.push(cube(Vector3::new(c, y, -h)));
        }
        for c in CENTERS {
            out.push(cube(Vector3::new(-h, y, c)));
        }
        out.push(cube(Vector3::new(-h, y, -h)));
    }
    out
}

fn passive(id: &str, pose: Pose) -> Interface {
    Interface {
        id: id.to_string(),
        pose,
        kind: InterfaceKind::Passive,
        occupied_by: None,
    }
}

/// Floor interfaces face `+z`; wall interfaces face `+x`.
pub fn interfaces() -> Vec<Interface> {
    let wall = UnitQuaternion::from_axis_angle(&Vector3::y_axis(), FRAC_PI_2);
    vec![
        passive("F1", Pose::from_translation(0.45, -0.15, 0.0)),
        passive("F2", Pose::from_translation(0.75, -0.15, 0.0)),
        passive("F3", Pose::from_translation(0.45, 0.15, 0.0)),
        passive("F4", Pose::from_translation(0.75, 0.15, 0.0)),
        passive("W1", Pose::new(Vector3::new(0.0, -0.15, 0.45), wall)),
        passive("W2", Pose::new(Vector3::new(0.0, -0.15, 0.75), wall)),
        passive("W3", Pose::new(Vector3::new(0.0, 0.15, 0.45), wall)),
        passive("W4", Pose::new(Vector3::new(0.0, 0.15, 0.75), wall)),
    ]
}

/// Arch-shaped configuration of the default chain that puts `E` exactly
/// `span` metres from `B` along `-x` of `B`, both end frames aligned.
///
/// The three pitch joints form a symmetric arch; the last roll joint undoes
/// the half-turn the tip mount introduces.
pub fn arch(span: f64) -> JointConfig {
    // Upper arm and forearm are 0.40 m each; the shoulder rise and the
    // wrist drop (0.20 m each) cancel out.
    let a = -(span / 0.8).asin();
    JointConfig([0.0, a, 0.0, PI - 2.0 * a - 2.0 * PI, 0.0, a, PI])
}

/// `B` on F2, `E` on F1: both ends docked on the floor.
pub fn initial_stance() -> InitialStance {
    InitialStance {
        end: End::B,
        interface: "F2".into(),
        q0: arch(0.30),
        also_docked: Some("F1".into()),
    }
}

/// Tip to the top-left wall interface, then the base (inverted) onto the
/// slot the tip just left.
pub fn switch_in_place_gait(duration: f64) -> Vec<StepGoal> {
    vec![
        StepGoal {
            moved_end: End::E,
            target: "W2".into(),
            duration,
        },
        StepGoal {
            moved_end: End::B,
            target: "F1".into(),
            duration,
        },
    ]
}
