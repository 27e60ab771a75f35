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

//! Serial-chain model of the seven-joint walking arm.
//!
//! The chain is a list of eight rigid segments connected by seven revolute
//! joints. Each joint is described by two fixed anchors, one in the parent
//! segment frame and one in the child segment frame, plus a rotation axis
//! expressed in the joint frame. The transform across joint `i` is
//!
//! ```text
//! T_parent_child(q) = parent_anchor ∘ Rot(axis, q) ∘ child_anchor⁻¹
//! ```
//!
//! Describing both sides of every joint makes re-rooting a pure permutation
//! of the stored data: reverse the segment and joint order, swap each pair of
//! anchors, swap the two end mounts, and negate the joint angles.

use std::fmt;

use nalgebra::{SMatrix, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collision::Capsule;
use crate::pose::{axis_angle, Pose};

pub const JOINT_COUNT: usize = 7;
pub const SEGMENT_COUNT: usize = JOINT_COUNT + 1;

/// 6×7 geometric Jacobian: linear rows first, then angular rows.
pub type Jacobian = SMatrix<f64, 6, JOINT_COUNT>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("invalid joint configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid chain model: {0}")]
    InvalidModel(String),
    #[error("docking mode {0:?} has no free end to move")]
    ModeError(DockingMode),
}

/// One of the two dockable ends of the arm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
pub enum End {
    /// Base frame `B`.
    B,
    /// End-effector frame `E`.
    E,
}

impl End {
    pub fn other(self) -> End {
        match self {
            End::B => End::E,
            End::E => End::B,
        }
    }

    pub fn index(self) -> usize {
        match self {
            End::B => 0,
            End::E => 1,
        }
    }
}

impl fmt::Display for End {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            End::B => write!(f, "B"),
            End::E => write!(f, "E"),
        }
    }
}

/// How the arm is currently held by the environment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DockingMode {
    /// Docked through `B`; `E` is free.
    Regular,
    /// Docked through `E`; `B` is free.
    Inverted,
    /// Both ends docked.
    Transition,
}

impl DockingMode {
    /// Mode implied by which ends are coupled; `None` when neither is.
    pub fn from_docked(base_docked: bool, tip_docked: bool) -> Option<DockingMode> {
        match (base_docked, tip_docked) {
            (true, true) => Some(DockingMode::Transition),
            (true, false) => Some(DockingMode::Regular),
            (false, true) => Some(DockingMode::Inverted),
            (false, false) => None,
        }
    }

    /// The end that moves in this mode.
    pub fn free_end(self) -> Option<End> {
        match self {
            DockingMode::Regular => Some(End::E),
            DockingMode::Inverted => Some(End::B),
            DockingMode::Transition => None,
        }
    }

    /// Mode in which `end` is the moving end.
    pub fn moving(end: End) -> DockingMode {
        match end {
            End::E => DockingMode::Regular,
            End::B => DockingMode::Inverted,
        }
    }
}

/// Seven joint angles in radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct JointConfig(pub [f64; JOINT_COUNT]);

impl JointConfig {
    pub fn zeros() -> Self {
        JointConfig([0.0; JOINT_COUNT])
    }

    pub fn from_slice(values: &[f64]) -> Result<Self, KinematicsError> {
        if values.len() != JOINT_COUNT {
            return Err(KinematicsError::InvalidConfig(format!(
                "expected {JOINT_COUNT} joint values, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(KinematicsError::InvalidConfig(format!(
                "joint {i} is not finite"
            )));
        }
        let mut q = [0.0; JOINT_COUNT];
        q.copy_from_slice(values);
        Ok(JointConfig(q))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Euclidean distance in joint space.
    pub fn distance(&self, other: &JointConfig) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Largest per-joint absolute difference.
    pub fn max_abs_diff(&self, other: &JointConfig) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `self + t·(other − self)`.
    pub fn lerp(&self, other: &JointConfig, t: f64) -> JointConfig {
        let mut out = [0.0; JOINT_COUNT];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.0[i] + t * (other.0[i] - self.0[i]);
        }
        JointConfig(out)
    }

    /// Joint order reversed and angles negated: the configuration of the
    /// re-rooted chain that describes the same physical pose.
    pub fn reversed(&self) -> JointConfig {
        let mut out = [0.0; JOINT_COUNT];
        for (i, o) in out.iter_mut().enumerate() {
            *o = -self.0[JOINT_COUNT - 1 - i];
        }
        JointConfig(out)
    }
}

impl std::ops::Index<usize> for JointConfig {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl std::ops::IndexMut<usize> for JointConfig {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// Rigid body between two joints (or between an end mount and a joint).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub name: String,
    /// kg
    pub mass: f64,
    /// Center of mass in the segment frame, m.
    pub com: Vector3<f64>,
    /// Collision capsule in the segment frame.
    pub collision: Capsule,
}

/// Revolute joint with limits and actuator ratings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Joint {
    pub name: String,
    /// Rotation axis in the joint frame (unit length).
    pub axis: Vector3<f64>,
    /// Joint frame expressed in the parent segment frame.
    pub parent_anchor: Pose,
    /// Joint frame expressed in the child segment frame.
    pub child_anchor: Pose,
    pub lower: f64,
    pub upper: f64,
    /// N·m
    pub torque_limit: f64,
    /// rad/s
    pub velocity_limit: f64,
}

impl Joint {
    /// Transform from the parent segment frame to the child segment frame.
    pub fn transform(&self, angle: f64) -> Pose {
        self.parent_anchor
            .compose(&Pose::from_rotation(axis_angle(&self.axis, angle)))
            .compose(&self.child_anchor.inverse())
    }

    fn reversed(&self) -> Joint {
        Joint {
            name: self.name.clone(),
            axis: self.axis,
            parent_anchor: self.child_anchor,
            child_anchor: self.parent_anchor,
            lower: -self.upper,
            upper: -self.lower,
            torque_limit: self.torque_limit,
            velocity_limit: self.velocity_limit,
        }
    }
}

/// The arm: eight segments, seven joints and the two end mounts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KinematicChain {
    segments: Vec<Segment>,
    joints: Vec<Joint>,
    /// Base end frame in the first segment's frame.
    base_mount: Pose,
    /// Tip end frame in the last segment's frame.
    tip_mount: Pose,
    /// Which physical end is the base of this description.
    #[serde(default = "default_base_end")]
    base_end: End,
}

fn default_base_end() -> End {
    End::B
}

/// Result of a forward-kinematics evaluation, all poses in the base frame.
#[derive(Clone, Debug)]
pub struct ForwardKinematics {
    pub tip: Pose,
    /// One pose per segment.
    pub segment_poses: [Pose; SEGMENT_COUNT],
    /// Joint frame (before rotation) for each joint.
    pub joint_frames: [Pose; JOINT_COUNT],
}

impl ForwardKinematics {
    /// Joint axis expressed in the base frame.
    pub fn joint_axis(&self, chain: &KinematicChain, i: usize) -> Vector3<f64> {
        self.joint_frames[i].transform_vector(&chain.joints[i].axis)
    }
}

impl KinematicChain {
    pub fn new(
        segments: Vec<Segment>,
        joints: Vec<Joint>,
        base_mount: Pose,
        tip_mount: Pose,
    ) -> Result<Self, KinematicsError> {
        let chain = KinematicChain {
            segments,
            joints,
            base_mount,
            tip_mount,
            base_end: End::B,
        };
        chain.validate()?;
        Ok(chain)
    }

    /// Checks structural invariants; used after deserialization as well.
    pub fn validate(&self) -> Result<(), KinematicsError> {
        let bad = |m: String| Err(KinematicsError::InvalidModel(m));
        if self.joints.len() != JOINT_COUNT {
            return bad(format!(
                "expected {JOINT_COUNT} joints, got {}",
                self.joints.len()
            ));
        }
        if self.segments.len() != SEGMENT_COUNT {
            return bad(format!(
                "expected {SEGMENT_COUNT} segments, got {}",
                self.segments.len()
            ));
        }
        for (i, s) in self.segments.iter().enumerate() {
            if !(s.mass >= 0.0) || !s.mass.is_finite() {
                return bad(format!("segments[{i}].mass must be a finite value >= 0"));
            }
            if !(s.collision.radius > 0.0) {
                return bad(format!("segments[{i}].collision.radius must be > 0"));
            }
        }
        for (i, j) in self.joints.iter().enumerate() {
            if ((j.axis.norm()) - 1.0).abs() > 1e-9 {
                return bad(format!("joints[{i}].axis must be a unit vector"));
            }
            if !(j.torque_limit > 0.0) {
                return bad(format!("joints[{i}].torque_limit must be > 0"));
            }
            if !(j.velocity_limit > 0.0) {
                return bad(format!("joints[{i}].velocity_limit must be > 0"));
            }
            if !(j.lower < j.upper) {
                return bad(format!("joints[{i}] requires lower < upper"));
            }
        }
        Ok(())
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn joints_mut(&mut self) -> &mut [Joint] {
        &mut self.joints
    }

    pub fn base_mount(&self) -> &Pose {
        &self.base_mount
    }

    pub fn tip_mount(&self) -> &Pose {
        &self.tip_mount
    }

    /// Physical end that acts as the base of this description.
    pub fn base_end(&self) -> End {
        self.base_end
    }

    pub fn total_mass(&self) -> f64 {
        self.segments.iter().map(|s| s.mass).sum()
    }

    pub fn velocity_limits(&self) -> [f64; JOINT_COUNT] {
        std::array::from_fn(|i| self.joints[i].velocity_limit)
    }

    pub fn torque_limits(&self) -> [f64; JOINT_COUNT] {
        std::array::from_fn(|i| self.joints[i].torque_limit)
    }

    /// Clamps every angle into its joint's limits.
    pub fn clamp(&self, q: &JointConfig) -> JointConfig {
        JointConfig(std::array::from_fn(|i| {
            q[i].clamp(self.joints[i].lower, self.joints[i].upper)
        }))
    }

    pub fn within_limits(&self, q: &JointConfig) -> bool {
        (0..JOINT_COUNT).all(|i| q[i] >= self.joints[i].lower && q[i] <= self.joints[i].upper)
    }

    /// Upper bound on the base-to-tip distance over all configurations: the
    /// summed lengths of the fixed offsets between consecutive joint origins.
    pub fn reach_bound(&self) -> f64 {
        let mut total = self
            .base_mount
            .inverse()
            .compose(&self.joints[0].parent_anchor)
            .translation
            .norm();
        for i in 0..JOINT_COUNT - 1 {
            total += self.joints[i]
                .child_anchor
                .inverse()
                .compose(&self.joints[i + 1].parent_anchor)
                .translation
                .norm();
        }
        total += self.joints[JOINT_COUNT - 1]
            .child_anchor
            .inverse()
            .compose(&self.tip_mount)
            .translation
            .norm();
        total
    }

    /// Forward kinematics in the base frame.
    pub fn forward_kinematics(&self, q: &JointConfig) -> ForwardKinematics {
        let mut segment_poses = [Pose::identity(); SEGMENT_COUNT];
        let mut joint_frames = [Pose::identity(); JOINT_COUNT];
        let mut current = self.base_mount.inverse();
        segment_poses[0] = current;
        for (i, joint) in self.joints.iter().enumerate() {
            let frame = current.compose(&joint.parent_anchor);
            joint_frames[i] = frame;
            current = frame
                .compose(&Pose::from_rotation(axis_angle(&joint.axis, q[i])))
                .compose(&joint.child_anchor.inverse());
            segment_poses[i + 1] = current;
        }
        let tip = current.compose(&self.tip_mount);
        ForwardKinematics {
            tip,
            segment_poses,
            joint_frames,
        }
    }

    /// Tip pose only.
    pub fn tip_pose(&self, q: &JointConfig) -> Pose {
        self.forward_kinematics(q).tip
    }

    /// Geometric Jacobian of the tip in the base frame, referenced at the tip origin.
    pub fn jacobian(&self, q: &JointConfig) -> Jacobian {
        let fk = self.forward_kinematics(q);
        self.jacobian_from_fk(&fk)
    }

    pub fn jacobian_from_fk(&self, fk: &ForwardKinematics) -> Jacobian {
        let mut jac = Jacobian::zeros();
        let tip = fk.tip.translation;
        for i in 0..JOINT_COUNT {
            let axis = fk.joint_axis(self, i);
            let origin = fk.joint_frames[i].translation;
            let linear = axis.cross(&(tip - origin));
            jac.fixed_view_mut::<3, 1>(0, i).copy_from(&linear);
            jac.fixed_view_mut::<3, 1>(3, i).copy_from(&axis);
        }
        jac
    }

    /// The same physical arm described with the opposite end as base.
    ///
    /// Pair with [`JointConfig::reversed`]: the rerooted tip pose at the
    /// reversed configuration is the inverse of this chain's tip pose.
    pub fn reroot(&self) -> KinematicChain {
        KinematicChain {
            segments: self.segments.iter().rev().cloned().collect(),
            joints: self.joints.iter().rev().map(Joint::reversed).collect(),
            base_mount: self.tip_mount,
            tip_mount: self.base_mount,
            base_end: self.base_end.other(),
        }
    }

    /// Maps a configuration of this chain to the equivalent configuration of
    /// `self.reroot()`.
    pub fn reverse_map(&self, q: &JointConfig) -> JointConfig {
        q.reversed()
    }

    /// Index in the rerooted chain of segment `i` of this chain.
    pub fn rerooted_segment_index(i: usize) -> usize {
        SEGMENT_COUNT - 1 - i
    }

    /// Chain whose base is the physical end `end`.
    pub fn rooted_at(&self, end: End) -> KinematicChain {
        if self.base_end == end {
            self.clone()
        } else {
            self.reroot()
        }
    }
}

/// World poses of the two end frames.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EndPoses {
    pub base: Pose,
    pub tip: Pose,
}

/// Goal pose for the planner, expressed in the base frame `B`.
///
/// In [`DockingMode::Regular`] `goal_world` is the desired world pose of `E`
/// and the result is `T_WB⁻¹ ∘ T_WÊ`. In [`DockingMode::Inverted`]
/// `goal_world` is the desired world pose of `B` and the result is
/// `T_WB̂⁻¹ ∘ T_WE`: the tip pose, seen from the future base, that leaves the
/// docked end where it is once the base arrives.
pub fn goal_in_planning_frame(
    mode: DockingMode,
    world: &EndPoses,
    goal_world: &Pose,
) -> Result<Pose, KinematicsError> {
    match mode {
        DockingMode::Regular => Ok(world.base.inverse().compose(goal_world)),
        DockingMode::Inverted => Ok(goal_world.inverse().compose(&world.tip)),
        DockingMode::Transition => Err(KinematicsError::ModeError(mode)),
    }
}

/// Joint origins of the default model, measured from `B` along the extended arm.
const DEFAULT_JOINT_OFFSETS: [f64; JOINT_COUNT] = [0.12, 0.20, 0.40, 0.60, 0.80, 1.00, 1.08];
/// Extended length from `B` to `E`.
pub const DEFAULT_REACH: f64 = 1.20;

/// Default arm model: 1.20 m extended, 10.40 kg, alternating roll/pitch
/// joints, the last two joints being the lighter wrist actuators.
///
/// Segment lengths, axis layout and mass split are a reconstruction; only
/// the totals are fixed.
pub fn default_chain() -> KinematicChain {
    let roll = Vector3::z();
    let pitch = Vector3::y();
    let axes = [roll, pitch, roll, pitch, roll, pitch, roll];
    let names = [
        "shoulder_roll",
        "shoulder_pitch",
        "upper_roll",
        "elbow_pitch",
        "lower_roll",
        "wrist_pitch",
        "wrist_roll",
    ];
    // 30 N·m for the large actuators, 12 N·m for the two wrist actuators.
    let torque = [30.0, 30.0, 30.0, 30.0, 30.0, 12.0, 12.0];
    let velocity = [0.8, 0.8, 0.8, 0.8, 0.8, 1.0, 1.0];

    let mut joints = Vec::with_capacity(JOINT_COUNT);
    let mut previous = 0.0;
    for i in 0..JOINT_COUNT {
        let offset = DEFAULT_JOINT_OFFSETS[i] - previous;
        previous = DEFAULT_JOINT_OFFSETS[i];
        joints.push(Joint {
            name: names[i].to_string(),
            axis: axes[i],
            parent_anchor: Pose::from_translation(0.0, 0.0, offset),
            child_anchor: Pose::identity(),
            lower: -2.0 * std::f64::consts::PI,
            upper: 2.0 * std::f64::consts::PI,
            torque_limit: torque[i],
            velocity_limit: velocity[i],
        });
    }

    let seg = |name: &str, mass: f64, com_z: f64, z0: f64, z1: f64, radius: f64| Segment {
        name: name.to_string(),
        mass,
        com: Vector3::new(0.0, 0.0, com_z),
        collision: Capsule {
            p0: Vector3::new(0.0, 0.0, z0),
            p1: Vector3::new(0.0, 0.0, z1),
            radius,
        },
    };
    let segments = vec![
        seg("base_end", 2.0, 0.06, 0.05, 0.09, 0.05),
        seg("shoulder", 0.8, 0.04, 0.04, 0.04, 0.045),
        seg("upper_arm", 1.1, 0.10, 0.05, 0.17, 0.04),
        seg("elbow_upper", 1.2, 0.10, 0.03, 0.17, 0.04),
        seg("elbow_lower", 1.2, 0.10, 0.03, 0.17, 0.04),
        seg("forearm", 1.1, 0.10, 0.03, 0.15, 0.04),
        seg("wrist", 0.6, 0.04, 0.04, 0.04, 0.04),
        seg("tip_end", 2.4, 0.06, 0.03, 0.07, 0.05),
    ];

    // E faces back along the arm so that both end frames point out of the
    // surface they dock to.
    let tip_mount = Pose::new(
        Vector3::new(
            0.0,
            0.0,
            DEFAULT_REACH - DEFAULT_JOINT_OFFSETS[JOINT_COUNT - 1],
        ),
        axis_angle(&Vector3::x(), std::f64::consts::PI),
    );

    KinematicChain::new(segments, joints, Pose::identity(), tip_mount)
        .expect("default chain is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix4;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_q(rng: &mut ChaCha8Rng) -> JointConfig {
        JointConfig(std::array::from_fn(|_| {
            rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)
        }))
    }

    /// Straight chain of `n` identical links along +z, for closed-form checks.
    fn stacked_chain(link: f64) -> KinematicChain {
        let mut chain = default_chain();
        for j in chain.joints.iter_mut() {
            j.parent_anchor = Pose::from_translation(0.0, 0.0, link);
        }
        chain.joints[0].parent_anchor = Pose::identity();
        chain.tip_mount = Pose::from_translation(0.0, 0.0, link);
        chain
    }

    // Independent oracle: plain 4x4 homogeneous products with Rodrigues rotations.
    fn rodrigues(axis: &Vector3<f64>, angle: f64) -> Matrix4<f64> {
        let k = axis.normalize();
        let (s, c) = angle.sin_cos();
        let kx = nalgebra::Matrix3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0);
        let r = nalgebra::Matrix3::identity() + kx * s + kx * kx * (1.0 - c);
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
        m
    }

    fn oracle_tip(chain: &KinematicChain, q: &JointConfig) -> Matrix4<f64> {
        let inv = |p: &Pose| p.to_homogeneous().try_inverse().unwrap();
        let mut m = inv(chain.base_mount());
        for (i, j) in chain.joints().iter().enumerate() {
            m = m
                * j.parent_anchor.to_homogeneous()
                * rodrigues(&j.axis, q[i])
                * inv(&j.child_anchor);
        }
        m * chain.tip_mount().to_homogeneous()
    }

    #[test]
    fn zero_configuration_of_stacked_chain_is_straight() {
        let chain = stacked_chain(0.1);
        let tip = chain.tip_pose(&JointConfig::zeros());
        assert!((tip.translation - Vector3::new(0.0, 0.0, 0.7)).norm() < 1e-12);
        assert!(tip.rotation.angle() < 1e-12);
    }

    #[test]
    fn default_model_totals() {
        let chain = default_chain();
        assert_eq!(chain.total_mass(), 10.40);
        let tip = chain.tip_pose(&JointConfig::zeros());
        assert!((tip.translation.norm() - 1.20).abs() < 1e-6);
        assert!((chain.reach_bound() - 1.20).abs() < 1e-12);
        assert_eq!(chain.segments().len(), 8);
        assert_eq!(chain.joints().len(), 7);
    }

    #[test]
    fn fk_matches_homogeneous_oracle() {
        let chain = default_chain();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let q = random_q(&mut rng);
            let fk = chain.tip_pose(&q).to_homogeneous();
            let oracle = oracle_tip(&chain, &q);
            assert!(
                (fk - oracle).abs().max() < 1e-12,
                "{}",
                (fk - oracle).abs().max()
            );
        }
    }

    #[test]
    fn config_from_slice_checks_dimension() {
        assert!(matches!(
            JointConfig::from_slice(&[0.0; 6]),
            Err(KinematicsError::InvalidConfig(_))
        ));
        assert!(JointConfig::from_slice(&[0.0; 7]).is_ok());
        assert!(JointConfig::from_slice(&[0.0, 0.0, 0.0, f64::NAN, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn single_link_jacobian_is_textbook() {
        // One z joint with a 0.5 m link along x; the other joints sit after the tip.
        let l = 0.5;
        let mut chain = default_chain();
        for j in chain.joints.iter_mut() {
            j.parent_anchor = Pose::identity();
            j.axis = Vector3::z();
        }
        chain.tip_mount = Pose::from_translation(l, 0.0, 0.0);
        let jac = chain.jacobian(&JointConfig::zeros());
        let col = jac.column(0);
        assert!((col[0]).abs() < 1e-15);
        assert!((col[1] - l).abs() < 1e-15);
        assert!((col[2]).abs() < 1e-15);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let chain = default_chain();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let h = 1e-6;
        for _ in 0..100 {
            let q = random_q(&mut rng);
            let jac = chain.jacobian(&q);
            let tip = chain.tip_pose(&q);
            for i in 0..JOINT_COUNT {
                let mut qp = q;
                let mut qm = q;
                qp[i] += h;
                qm[i] -= h;
                let tp = chain.tip_pose(&qp);
                let tm = chain.tip_pose(&qm);
                let lin = (tp.translation - tm.translation) / (2.0 * h);
                // Angular velocity from the relative rotation of the two samples.
                let rel = tp.rotation * tm.rotation.inverse();
                let ang = rel.scaled_axis() / (2.0 * h);
                for k in 0..3 {
                    assert!((jac[(k, i)] - lin[k]).abs() < 1e-6);
                    assert!((jac[(k + 3, i)] - ang[k]).abs() < 1e-6);
                }
            }
            let _ = tip;
        }
    }

    #[test]
    fn angular_columns_are_joint_axes() {
        let chain = default_chain();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let q = random_q(&mut rng);
        let fk = chain.forward_kinematics(&q);
        let jac = chain.jacobian_from_fk(&fk);
        for i in 0..JOINT_COUNT {
            let axis = fk.joint_frames[i].rotation * chain.joints()[i].axis;
            for k in 0..3 {
                assert!((jac[(k + 3, i)] - axis[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reroot_is_an_involution() {
        let chain = default_chain();
        assert_eq!(chain.reroot().reroot(), chain);
        assert_ne!(chain.reroot(), chain);
        assert_eq!(chain.reroot().base_end(), End::E);
    }

    #[test]
    fn rerooted_single_joint_gives_inverse_rotation() {
        let mut chain = default_chain();
        for j in chain.joints.iter_mut() {
            j.parent_anchor = Pose::identity();
        }
        chain.tip_mount = Pose::identity();
        let mut q = JointConfig::zeros();
        q[0] = 0.7;
        let forward = chain.tip_pose(&q);
        let back = chain.reroot().tip_pose(&chain.reverse_map(&q));
        assert!(back.rotation_distance(&forward.inverse()) < 1e-15);
        assert!((back.rotation.angle() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn rerooted_fk_is_inverse_fk() {
        let chain = default_chain();
        let rerooted = chain.reroot();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..1000 {
            let q = random_q(&mut rng);
            let tip = chain.tip_pose(&q);
            let back = rerooted.tip_pose(&chain.reverse_map(&q));
            let inv = tip.inverse();
            assert!(back.translation_distance(&inv) < 1e-10);
            assert!(back.rotation_distance(&inv) < 1e-10);
        }
    }

    #[test]
    fn rerooted_segments_occupy_the_same_space() {
        let chain = default_chain();
        let rerooted = chain.reroot();
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let q = random_q(&mut rng);
        let fk = chain.forward_kinematics(&q);
        let rfk = rerooted.forward_kinematics(&chain.reverse_map(&q));
        // Express the rerooted poses in B: B←E ∘ E←segment.
        for i in 0..SEGMENT_COUNT {
            let j = KinematicChain::rerooted_segment_index(i);
            let p = fk.tip.compose(&rfk.segment_poses[j]);
            let com_a = fk.segment_poses[i].transform_point(&chain.segments()[i].com);
            let com_b = p.transform_point(&rerooted.segments()[j].com);
            assert!((com_a - com_b).norm() < 1e-12);
        }
    }

    #[test]
    fn goal_frame_identity_base_passes_through() {
        let world = EndPoses {
            base: Pose::identity(),
            tip: Pose::from_translation(1.0, 2.0, 3.0),
        };
        let goal = Pose::new(Vector3::new(0.3, -0.2, 0.5), axis_angle(&Vector3::x(), 0.4));
        let g = goal_in_planning_frame(DockingMode::Regular, &world, &goal).unwrap();
        assert!(g.translation_distance(&goal) < 1e-15);
        assert!(g.rotation_distance(&goal) < 1e-15);
    }

    #[test]
    fn inverted_goal_at_current_base_is_current_tip() {
        let chain = default_chain();
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let q = random_q(&mut rng);
        let t_we = Pose::new(Vector3::new(0.2, 0.1, 0.4), axis_angle(&Vector3::y(), 1.0));
        let fk_tip = chain.tip_pose(&q);
        let t_wb = t_we.compose(&fk_tip.inverse());
        let world = EndPoses {
            base: t_wb,
            tip: t_we,
        };
        let g = goal_in_planning_frame(DockingMode::Inverted, &world, &t_wb).unwrap();
        assert!(g.translation_distance(&fk_tip) < 1e-12);
        assert!(g.rotation_distance(&fk_tip) < 1e-12);
    }

    #[test]
    fn transition_has_no_planning_goal() {
        let world = EndPoses {
            base: Pose::identity(),
            tip: Pose::identity(),
        };
        assert_eq!(
            goal_in_planning_frame(DockingMode::Transition, &world, &Pose::identity()),
            Err(KinematicsError::ModeError(DockingMode::Transition))
        );
    }

    #[test]
    fn docking_mode_from_ends() {
        assert_eq!(
            DockingMode::from_docked(true, true),
            Some(DockingMode::Transition)
        );
        assert_eq!(
            DockingMode::from_docked(true, false),
            Some(DockingMode::Regular)
        );
        assert_eq!(
            DockingMode::from_docked(false, true),
            Some(DockingMode::Inverted)
        );
        assert_eq!(DockingMode::from_docked(false, false), None);
    }
}
