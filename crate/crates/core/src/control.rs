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

//! Cartesian control through a virtual forward-dynamics model.
//!
//! A steering wrench `f` drives a virtual copy of the arm whose joint-space
//! inertia is the identity:
//!
//! ```text
//! q̇_v ← (1 − damping)·q̇_v + h·Jᵀ(q)·f
//! q_d ← clamp(q + h·q̇_v)
//! ```
//!
//! `q_d` is what the joint servos are asked to follow. The motion controller
//! closes the loop on pose error by using a scaled error twist as `f`; the
//! inverse-kinematics solver simply iterates the motion controller.

use nalgebra::{SMatrix, SVector, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{DockingMode, Jacobian, JointConfig, KinematicChain, JOINT_COUNT};
use crate::planning::Trajectory;
use crate::pose::Pose;
use crate::statics::{gravity_torques, TorqueVector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("invalid controller input: {0}")]
    InvalidInput(String),
    #[error(
        "inverse kinematics did not converge (residual {translation:.3e} m, {rotation:.3e} rad)"
    )]
    NotConverged {
        best: JointConfig,
        translation: f64,
        rotation: f64,
    },
}

/// Six-axis steering signal `[fx, fy, fz, mx, my, mz]` in the base frame.
/// Only used to push the virtual model; it is not a contact force.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct SteeringWrench(pub [f64; 6]);

impl SteeringWrench {
    pub fn zero() -> Self {
        SteeringWrench([0.0; 6])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, s: f64) -> Self {
        SteeringWrench(self.0.map(|v| v * s))
    }

    fn to_vector(self) -> Vector6<f64> {
        Vector6::from_row_slice(&self.0)
    }
}

/// Desired tip pose in the base frame of the current docking.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CartesianTarget {
    pub pose: Pose,
}

/// Desired joint positions for the servos.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointCommand {
    pub q_d: JointConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseTolerance {
    /// m
    pub translation: f64,
    /// rad
    pub rotation: f64,
}

impl PoseTolerance {
    pub fn new(translation: f64, rotation: f64) -> Self {
        PoseTolerance {
            translation,
            rotation,
        }
    }

    pub fn accepts(&self, a: &Pose, b: &Pose) -> bool {
        a.translation_distance(b) <= self.translation && a.rotation_distance(b) <= self.rotation
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    /// Virtual integration step, s.
    pub step: f64,
    /// Error gains, translational then rotational.
    pub kp: [f64; 6],
    /// Fraction of virtual joint velocity removed per step.
    pub damping: f64,
    /// Error twist is clipped to these magnitudes (m, rad) before scaling.
    pub max_error: [f64; 2],
    pub max_iterations: usize,
    pub tolerance: PoseTolerance,
    /// Virtual joint-space inertia is `I` when zero, otherwise
    /// `JᵀJ + conditioning·I`, which keeps progress even along directions the
    /// Jacobian barely moves.
    pub conditioning: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            step: 0.1,
            kp: [120.0, 120.0, 120.0, 30.0, 30.0, 30.0],
            damping: 0.9,
            max_error: [0.2, 1.0],
            max_iterations: 50_000,
            tolerance: PoseTolerance::new(1e-4, 1e-3),
            conditioning: 0.0,
        }
    }
}

impl SolverParams {
    /// Profile for offline goal solving to near machine precision. The
    /// conditioned inertia behaves like damped least squares, so goals close
    /// to full extension still converge.
    pub fn precise() -> Self {
        SolverParams {
            kp: [15.0; 6],
            damping: 0.5,
            max_iterations: 3_000,
            tolerance: PoseTolerance::new(1e-11, 1e-11),
            conditioning: 3e-5,
            ..SolverParams::default()
        }
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        if !(self.step > 0.0) {
            return Err(ControlError::InvalidInput("solver step must be > 0".into()));
        }
        if self.kp.iter().any(|k| !(*k > 0.0)) {
            return Err(ControlError::InvalidInput("gains must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.damping) {
            return Err(ControlError::InvalidInput(
                "damping must lie in [0, 1]".into(),
            ));
        }
        if !(self.conditioning >= 0.0 && self.conditioning.is_finite()) {
            return Err(ControlError::InvalidInput(
                "conditioning must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Virtual joint velocity carried between solver steps.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct VirtualState {
    pub velocity: [f64; JOINT_COUNT],
}

impl VirtualState {
    pub fn reset(&mut self) {
        self.velocity = [0.0; JOINT_COUNT];
    }
}

/// One step of the virtual model under steering wrench `f`.
pub fn solver_step(
    chain: &KinematicChain,
    q: &JointConfig,
    f: &SteeringWrench,
    params: &SolverParams,
    state: &mut VirtualState,
) -> Result<JointCommand, ControlError> {
    if !f.is_finite() {
        return Err(ControlError::InvalidInput(
            "steering wrench is not finite".into(),
        ));
    }
    if !q.is_finite() {
        return Err(ControlError::InvalidInput(
            "joint state is not finite".into(),
        ));
    }
    let jac = chain.jacobian(q);
    Ok(integrate(
        chain,
        q,
        &acceleration(&jac, f, params),
        params,
        state,
    ))
}

/// Virtual joint acceleration `M⁻¹ Jᵀ f`.
fn acceleration(
    jac: &Jacobian,
    f: &SteeringWrench,
    params: &SolverParams,
) -> SVector<f64, JOINT_COUNT> {
    let drive = jac.transpose() * f.to_vector();
    if params.conditioning > 0.0 {
        let m = jac.transpose() * jac
            + SMatrix::<f64, JOINT_COUNT, JOINT_COUNT>::identity() * params.conditioning;
        if let Some(chol) = m.cholesky() {
            return chol.solve(&drive);
        }
    }
    drive
}

fn integrate(
    chain: &KinematicChain,
    q: &JointConfig,
    drive: &SVector<f64, JOINT_COUNT>,
    params: &SolverParams,
    state: &mut VirtualState,
) -> JointCommand {
    let keep = 1.0 - params.damping;
    let mut next = *q;
    for i in 0..JOINT_COUNT {
        let v = state.velocity[i] * keep + params.step * drive[i];
        state.velocity[i] = v;
        next[i] = q[i] + params.step * v;
    }
    let clamped = chain.clamp(&next);
    // A joint pinned at its limit loses its virtual velocity.
    for i in 0..JOINT_COUNT {
        if clamped[i] != next[i] {
            state.velocity[i] = 0.0;
        }
    }
    JointCommand { q_d: clamped }
}

/// Pose error twist `[Δp; Δθ]` in the base frame, from `current` to `target`.
///
/// The rotational part is the log map of `current⁻¹ ∘ target` rotated back
/// into the base frame.
pub fn pose_error(current: &Pose, target: &Pose) -> Vector6<f64> {
    let dp = target.translation - current.translation;
    let local = (current.rotation.inverse() * target.rotation).scaled_axis();
    let dr = current.rotation * local;
    Vector6::new(dp.x, dp.y, dp.z, dr.x, dr.y, dr.z)
}

fn clip(v: Vector3<f64>, max: f64) -> Vector3<f64> {
    let n = v.norm();
    if n > max {
        v * (max / n)
    } else {
        v
    }
}

/// Steering wrench the motion controller applies for a pose error.
pub fn error_wrench(error: &Vector6<f64>, params: &SolverParams) -> SteeringWrench {
    let dp = clip(error.fixed_rows::<3>(0).into_owned(), params.max_error[0]);
    let dr = clip(error.fixed_rows::<3>(3).into_owned(), params.max_error[1]);
    SteeringWrench([
        params.kp[0] * dp.x,
        params.kp[1] * dp.y,
        params.kp[2] * dp.z,
        params.kp[3] * dr.x,
        params.kp[4] * dr.y,
        params.kp[5] * dr.z,
    ])
}

/// One step of the Cartesian motion controller toward `target`.
pub fn motion_controller_step(
    chain: &KinematicChain,
    q: &JointConfig,
    target: &CartesianTarget,
    params: &SolverParams,
    state: &mut VirtualState,
) -> Result<JointCommand, ControlError> {
    if !target.pose.is_finite() {
        return Err(ControlError::InvalidInput(
            "target pose is not finite".into(),
        ));
    }
    if !q.is_finite() {
        return Err(ControlError::InvalidInput(
            "joint state is not finite".into(),
        ));
    }
    let fk = chain.forward_kinematics(q);
    let error = pose_error(&fk.tip, &target.pose);
    if error.iter().all(|e| *e == 0.0) && state.velocity.iter().all(|v| *v == 0.0) {
        return Ok(JointCommand { q_d: *q });
    }
    let f = error_wrench(&error, params);
    let jac = chain.jacobian_from_fk(&fk);
    Ok(integrate(
        chain,
        q,
        &acceleration(&jac, &f, params),
        params,
        state,
    ))
}

/// Iterates the motion controller on the virtual model until the tip is
/// within tolerance of `goal`.
pub fn ik_solve(
    chain: &KinematicChain,
    seed: &JointConfig,
    goal: &Pose,
    params: &SolverParams,
) -> Result<JointConfig, ControlError> {
    params.validate()?;
    let target = CartesianTarget { pose: *goal };
    let mut state = VirtualState::default();
    let mut q = chain.clamp(seed);
    let residual = |q: &JointConfig| {
        let tip = chain.tip_pose(q);
        (tip.translation_distance(goal), tip.rotation_distance(goal))
    };
    let mut best = (q, residual(&q));
    for _ in 0..params.max_iterations {
        let (t, r) = best.1;
        if t <= params.tolerance.translation && r <= params.tolerance.rotation {
            return Ok(best.0);
        }
        q = motion_controller_step(chain, &q, &target, params, &mut state)?.q_d;
        let res = residual(&q);
        if res.0 / params.tolerance.translation + res.1 / params.tolerance.rotation
            < best.1 .0 / params.tolerance.translation + best.1 .1 / params.tolerance.rotation
        {
            best = (q, res);
        }
    }
    let (t, r) = best.1;
    if t <= params.tolerance.translation && r <= params.tolerance.rotation {
        return Ok(best.0);
    }
    Err(ControlError::NotConverged {
        best: best.0,
        translation: t,
        rotation: r,
    })
}

/// Joint command from a trajectory at time `t` (held at the end afterwards).
pub fn trajectory_controller_tick(traj: &Trajectory, t: f64) -> JointCommand {
    JointCommand {
        q_d: traj.sample(t.max(0.0)),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ServoOutput {
    pub q: JointConfig,
    /// Rough joint torque estimate (quasi-static gravity load).
    pub torques: TorqueVector,
}

/// Simulated position servo: first-order tracking with a velocity clamp.
///
/// `gravity` is expressed in the supporting end's frame for `mode`.
pub fn servo_tick(
    chain: &KinematicChain,
    q: &JointConfig,
    cmd: &JointCommand,
    dt: f64,
    gravity: &Vector3<f64>,
    mode: DockingMode,
) -> ServoOutput {
    let q_new = servo_step(q, &cmd.q_d, dt, &chain.velocity_limits());
    ServoOutput {
        q: q_new,
        torques: gravity_torques(chain, &q_new, gravity, mode),
    }
}

/// Position update of [`servo_tick`] without the torque estimate.
pub fn servo_step(
    q: &JointConfig,
    q_d: &JointConfig,
    dt: f64,
    velocity_limits: &[f64; JOINT_COUNT],
) -> JointConfig {
    JointConfig(std::array::from_fn(|i| {
        let max = velocity_limits[i] * dt;
        let delta = q_d[i] - q[i];
        if delta.abs() <= max {
            q_d[i]
        } else {
            q[i] + delta.signum() * max
        }
    }))
}
