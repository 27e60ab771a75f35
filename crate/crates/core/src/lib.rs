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

//! Kinematics, collision checking, planning, control and docking logic for a
//! seven-joint arm that walks across a structured surface by docking its two
//! ends alternately.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::result_large_err)]

pub mod collision;
pub mod control;
pub mod docking;
pub mod kinematics;
pub mod locomotion;
pub mod mockup;
pub mod planning;
pub mod pose;
pub mod rig;
pub mod statics;

pub use kinematics::{DockingMode, End, JointConfig, KinematicChain};
pub use pose::Pose;
