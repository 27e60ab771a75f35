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

//! Walking: release one end, plan and execute its motion to a new
//! interface, and dock it there.
//!
//! Moving `E` is planned with the environment fixed to the docked base.
//! Moving `B` keeps `B` as the planning reference and attaches the
//! environment to the docked tip instead, with `T_EW` frozen at plan time;
//! the goal becomes the tip pose seen from the future base.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collision::{AttachMode, CollisionChecker, CollisionEnv};
use crate::control::PoseTolerance;
use crate::docking::{DockingError, DockingEvent};
use crate::kinematics::{
    goal_in_planning_frame, DockingMode, End, JointConfig, KinematicChain, KinematicsError,
};
use crate::planning::{
    plan_rrt_star, PlanRequest, PlanResult, PlanStats, PlannerParams, PlanningError, Trajectory,
};
use crate::rig::{Motion, Rig, RigError, RigEvent, CONTROL_PERIOD};
use crate::statics::feasibility_from_torques;
use crate::statics::gravity_torques;
use crate::statics::supporting_end;

/// One locomotion step: move `moved_end` to interface `target`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepGoal {
    pub moved_end: End,
    pub target: String,
    /// Requested execution time, s.
    pub duration: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepOptions {
    /// Planning budget per step, s.
    pub budget: f64,
    pub seed: u64,
    /// Pose tolerance handed to the planner's goal solver.
    pub pose_tolerance: PoseTolerance,
}

impl Default for StepOptions {
    fn default() -> Self {
        StepOptions {
            budget: 5.0,
            seed: 0,
            pose_tolerance: PoseTolerance::new(1e-11, 1e-11),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LocomotionError {
    #[error("invalid step goal: {0}")]
    InvalidGoal(String),
    #[error("planning failed: {0}")]
    PlanningFailed(PlanningError),
    #[error("docking failed: {0}")]
    DockingFailed(String),
    #[error("joint {joint} would need {torque:.2} N·m (limit {limit:.2} N·m)")]
    InfeasibleTorque {
        joint: usize,
        torque: f64,
        limit: f64,
    },
    #[error(transparent)]
    Rig(#[from] RigError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

impl From<DockingError> for LocomotionError {
    fn from(e: DockingError) -> Self {
        LocomotionError::Rig(RigError::Docking(e))
    }
}

/// Everything needed to run one planning episode, detached from the rig.
#[derive(Clone, Debug)]
pub struct PlanJob {
    pub chain: KinematicChain,
    pub env: CollisionEnv,
    pub request: PlanRequest,
    pub params: PlannerParams,
}

impl PlanJob {
    pub fn run(&self) -> Result<PlanResult, PlanningError> {
        plan_rrt_star(&self.request, &self.env, &self.chain, &self.params)
    }
}

/// Outcome and measurements of one step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub moved_end: End,
    pub from: String,
    pub target: String,
    /// `Regular` when `E` moved, `Inverted` when `B` moved.
    pub mode: DockingMode,
    pub seed: u64,
    pub stats: Option<PlanStats>,
    pub cost: Option<f64>,
    /// Wall-clock planning time, s.
    pub planning_time: Option<f64>,
    pub trajectory_duration: Option<f64>,
    /// World positions of the moving end, one per control tick.
    pub endpoint_trace: Vec<[f64; 3]>,
    pub min_clearance: f64,
    pub max_torque: f64,
    pub start_time: f64,
    pub end_time: f64,
    pub success: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
enum Phase {
    Opening,
    AwaitingPlan,
    Executing,
    Closing,
    /// Re-docking at the origin after the step was abandoned.
    Recovering(LocomotionError),
    Done,
    Failed(LocomotionError),
}

/// State machine for one step, advanced once per rig tick.
#[derive(Clone, Debug)]
pub struct StepExecutor {
    goal: StepGoal,
    options: StepOptions,
    phase: Phase,
    job_pending: bool,
    record: StepRecord,
    checker: Option<CollisionChecker>,
    trajectory_end: Option<JointConfig>,
}

impl StepExecutor {
    /// Validates the goal and starts releasing the moved end (unless it is
    /// already free).
    pub fn start(
        rig: &mut Rig,
        goal: &StepGoal,
        options: &StepOptions,
    ) -> Result<StepExecutor, LocomotionError> {
        let docking = rig.docking();
        let target = docking.interface(&goal.target).ok_or_else(|| {
            LocomotionError::InvalidGoal(format!("unknown interface {}", goal.target))
        })?;
        let current = docking.icu(goal.moved_end).interface.clone();
        if current.as_deref() == Some(goal.target.as_str()) {
            return Err(LocomotionError::InvalidGoal(format!(
                "end {} is already at {}",
                goal.moved_end, goal.target
            )));
        }
        if target.occupied_by.is_some() {
            return Err(LocomotionError::InvalidGoal(format!(
                "{} is occupied",
                goal.target
            )));
        }
        if docking.docked_interface(goal.moved_end.other()).is_none() {
            return Err(LocomotionError::InvalidGoal(format!(
                "end {} must be docked to move end {}",
                goal.moved_end.other(),
                goal.moved_end
            )));
        }
        if !(goal.duration > 0.0) {
            return Err(LocomotionError::InvalidGoal("duration must be > 0".into()));
        }
        if !matches!(rig.motion(), Motion::Idle) {
            return Err(RigError::Busy("robot is moving".into()).into());
        }
        let from = current.clone().unwrap_or_default();
        let moving_docked = docking.docked_interface(goal.moved_end).is_some();
        let phase = if moving_docked {
            rig.request_undock(goal.moved_end)?;
            Phase::Opening
        } else {
            Phase::AwaitingPlan
        };
        Ok(StepExecutor {
            goal: goal.clone(),
            options: *options,
            phase,
            job_pending: false,
            record: StepRecord {
                moved_end: goal.moved_end,
                from,
                target: goal.target.clone(),
                mode: DockingMode::moving(goal.moved_end),
                seed: options.seed,
                stats: None,
                cost: None,
                planning_time: None,
                trajectory_duration: None,
                endpoint_trace: Vec::new(),
                min_clearance: f64::INFINITY,
                max_torque: 0.0,
                start_time: rig.time(),
                end_time: rig.time(),
                success: false,
                error: None,
            },
            checker: None,
            trajectory_end: None,
        })
    }

    pub fn goal(&self) -> &StepGoal {
        &self.goal
    }

    pub fn is_finished(&self) -> bool {
        matches!(self.phase, Phase::Done | Phase::Failed(_))
    }

    pub fn is_awaiting_plan(&self) -> bool {
        matches!(self.phase, Phase::AwaitingPlan) && self.job_pending
    }

    pub fn phase_name(&self) -> &'static str {
        match self.phase {
            Phase::Opening => "opening",
            Phase::AwaitingPlan => "planning",
            Phase::Executing => "executing",
            Phase::Closing => "closing",
            Phase::Recovering(_) => "recovering",
            Phase::Done => "done",
            Phase::Failed(_) => "failed",
        }
    }

    pub fn record(&self) -> &StepRecord {
        &self.record
    }

    /// Final result once [`is_finished`](Self::is_finished).
    pub fn outcome(&self) -> Option<Result<StepRecord, (StepRecord, LocomotionError)>> {
        match &self.phase {
            Phase::Done => Some(Ok(self.record.clone())),
            Phase::Failed(e) => Some(Err((self.record.clone(), e.clone()))),
            _ => None,
        }
    }

    /// Builds the planning problem for the current stance.
    fn plan_job(&mut self, rig: &Rig) -> Result<PlanJob, LocomotionError> {
        let moved = self.goal.moved_end;
        let target = rig
            .docking()
            .interface(&self.goal.target)
            .expect("validated at start")
            .pose;
        let poses = rig.end_poses();
        let mode = DockingMode::moving(moved);
        let goal_pose = goal_in_planning_frame(mode, &poses, &target)?;
        let env = rig.collision_env(&[(moved, target.translation)]);
        let checker = rig.checker_for(moved, env.clone());
        let attach = *checker.mode();
        self.checker = Some(checker);
        Ok(PlanJob {
            chain: rig.chain().clone(),
            env,
            request: PlanRequest {
                start: rig.q(),
                goal_pose,
                mode: attach,
                budget: self.options.budget,
                seed: self.options.seed,
                pose_tolerance: self.options.pose_tolerance,
                duration: self.goal.duration,
            },
            params: rig.config().planner,
        })
    }

    /// Advances the step after a rig tick. Returns a planning job when one
    /// has to be run; hand its result to [`deliver_plan`](Self::deliver_plan).
    pub fn advance(&mut self, rig: &mut Rig, events: &[RigEvent]) -> Option<PlanJob> {
        let moved = self.goal.moved_end;
        if matches!(self.phase, Phase::Executing) {
            let pose = rig.world_pose(moved);
            let p = pose.translation;
            self.record.endpoint_trace.push([p.x, p.y, p.z]);
            if let Some(checker) = &self.checker {
                let report = checker.check(&rig.q());
                self.record.min_clearance = self.record.min_clearance.min(report.min_clearance);
            }
            self.record.max_torque = self.record.max_torque.max(rig.torques().max_abs());
        }
        for ev in events {
            if let RigEvent::Docking(DockingEvent::Fault { end, reason }) = ev {
                if !self.is_finished() {
                    let _ = rig.set_motion(Motion::Idle);
                    self.fail(
                        rig,
                        LocomotionError::DockingFailed(format!("end {end} faulted: {reason:?}")),
                    );
                    return None;
                }
            }
        }
        match self.phase.clone() {
            Phase::Opening => {
                let released = events.iter().any(|e| {
                    matches!(e, RigEvent::Docking(DockingEvent::Undocked { end, .. }) if *end == moved)
                });
                if released {
                    self.phase = Phase::AwaitingPlan;
                }
            }
            Phase::AwaitingPlan if !self.job_pending => match self.plan_job(rig) {
                Ok(job) => {
                    self.job_pending = true;
                    return Some(job);
                }
                Err(e) => self.recover(rig, e),
            },
            Phase::Executing => {
                if events
                    .iter()
                    .any(|e| matches!(e, RigEvent::TrajectoryFinished))
                {
                    let end_q = self.trajectory_end.expect("set when executing");
                    debug_assert_eq!(rig.q(), end_q);
                    match rig.request_dock(moved, Some(&self.goal.target)) {
                        Ok(_) => self.phase = Phase::Closing,
                        Err(e) => self.fail(rig, LocomotionError::DockingFailed(e.to_string())),
                    }
                } else if events
                    .iter()
                    .any(|e| matches!(e, RigEvent::MotionStopped { .. }))
                {
                    self.fail(
                        rig,
                        LocomotionError::DockingFailed("motion was interrupted".into()),
                    );
                }
            }
            Phase::Closing => {
                let docked = events.iter().any(|e| {
                    matches!(e, RigEvent::Docking(DockingEvent::Docked { end, .. }) if *end == moved)
                });
                if docked {
                    self.record.success = true;
                    self.record.end_time = rig.time();
                    self.phase = Phase::Done;
                }
            }
            Phase::Recovering(err) => {
                let docked = events.iter().any(|e| {
                    matches!(e, RigEvent::Docking(DockingEvent::Docked { end, .. }) if *end == moved)
                });
                if docked {
                    self.fail(rig, err);
                }
            }
            Phase::AwaitingPlan | Phase::Done | Phase::Failed(_) => {}
        }
        None
    }

    /// Accepts the planner's answer and starts executing it.
    pub fn deliver_plan(&mut self, rig: &mut Rig, result: Result<PlanResult, PlanningError>) {
        if !matches!(self.phase, Phase::AwaitingPlan) || !self.job_pending {
            return;
        }
        self.job_pending = false;
        let plan = match result {
            Ok(plan) => plan,
            Err(e) => {
                self.recover(rig, LocomotionError::PlanningFailed(e));
                return;
            }
        };
        self.record.stats = Some(plan.stats.clone());
        self.record.cost = Some(plan.cost);
        self.record.planning_time = Some(plan.wall_time);
        self.record.trajectory_duration = Some(plan.trajectory.duration);
        if let Err(e) = self.check_torques(rig, &plan.trajectory) {
            self.recover(rig, e);
            return;
        }
        self.trajectory_end = Some(plan.trajectory.end());
        match rig.start_trajectory(plan.trajectory) {
            Ok(()) => self.phase = Phase::Executing,
            Err(e) => self.recover(rig, e.into()),
        }
    }

    fn check_torques(&self, rig: &Rig, traj: &Trajectory) -> Result<(), LocomotionError> {
        let config = rig.config();
        if !config.enforce_torque_limits || config.gravity == Vector3::zeros() {
            return Ok(());
        }
        let mode = DockingMode::moving(self.goal.moved_end);
        let support = rig.world_pose(supporting_end(mode));
        let g = support.rotation.inverse() * config.gravity;
        let steps = (traj.duration / CONTROL_PERIOD).ceil() as usize;
        for k in 0..=steps {
            let q = traj.sample(k as f64 * CONTROL_PERIOD);
            let report =
                feasibility_from_torques(rig.chain(), gravity_torques(rig.chain(), &q, &g, mode));
            if !report.feasible {
                let j = report.worst_joint;
                return Err(LocomotionError::InfeasibleTorque {
                    joint: j,
                    torque: report.torques.0[j],
                    limit: rig.chain().joints()[j].torque_limit,
                });
            }
        }
        Ok(())
    }

    /// Abandons the step and docks the moved end back where it came from.
    fn recover(&mut self, rig: &mut Rig, err: LocomotionError) {
        let moved = self.goal.moved_end;
        if rig.docking().docked_interface(moved).is_some() || self.record.from.is_empty() {
            self.fail(rig, err);
            return;
        }
        match rig.request_dock(moved, Some(&self.record.from.clone())) {
            Ok(_) => self.phase = Phase::Recovering(err),
            Err(e) => self.fail(
                rig,
                LocomotionError::DockingFailed(format!("{err}; re-docking failed: {e}")),
            ),
        }
    }

    /// Marks the step as failed without touching the rig.
    pub fn fail(&mut self, rig: &Rig, err: LocomotionError) {
        self.record.success = false;
        self.record.error = Some(err.to_string());
        self.record.end_time = rig.time();
        self.phase = Phase::Failed(err);
    }
}

/// Snapshot of the walking robot's stance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocomotionState {
    pub mode: DockingMode,
    pub base_world: crate::pose::Pose,
    pub tip_world: crate::pose::Pose,
    pub base_interface: Option<String>,
    pub tip_interface: Option<String>,
    pub q: JointConfig,
}

impl LocomotionState {
    pub fn capture(rig: &Rig) -> Self {
        let poses = rig.end_poses();
        LocomotionState {
            mode: rig.mode(),
            base_world: poses.base,
            tip_world: poses.tip,
            base_interface: rig.docking().docked_interface(End::B).map(str::to_string),
            tip_interface: rig.docking().docked_interface(End::E).map(str::to_string),
            q: rig.q(),
        }
    }
}

/// Upper bound on ticks for a single step, so a stuck step cannot hang.
pub fn tick_limit(rig: &Rig, goal: &StepGoal) -> u64 {
    let d = rig.config().docking;
    let vmin = rig
        .chain()
        .velocity_limits()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    // Worst case: a 2π move of one joint at its limit on top of the request.
    let motion = goal.duration + 4.0 * std::f64::consts::PI / vmin;
    ((d.open_duration + 2.0 * d.close_duration + motion + 10.0) / CONTROL_PERIOD) as u64
}

/// Runs one step to completion, planning inline. `on_tick` sees every tick.
pub fn locomotion_step_with<F>(
    rig: &mut Rig,
    goal: &StepGoal,
    options: &StepOptions,
    mut on_tick: F,
) -> Result<StepRecord, (StepRecord, LocomotionError)>
where
    F: FnMut(&Rig, &[RigEvent]),
{
    let mut exec = match StepExecutor::start(rig, goal, options) {
        Ok(e) => e,
        Err(e) => {
            let record = StepRecord {
                moved_end: goal.moved_end,
                from: rig
                    .docking()
                    .icu(goal.moved_end)
                    .interface
                    .clone()
                    .unwrap_or_default(),
                target: goal.target.clone(),
                mode: DockingMode::moving(goal.moved_end),
                seed: options.seed,
                stats: None,
                cost: None,
                planning_time: None,
                trajectory_duration: None,
                endpoint_trace: Vec::new(),
                min_clearance: f64::INFINITY,
                max_torque: 0.0,
                start_time: rig.time(),
                end_time: rig.time(),
                success: false,
                error: Some(e.to_string()),
            };
            return Err((record, e));
        }
    };
    let limit = rig.tick_count() + tick_limit(rig, goal);
    let mut pending: Option<PlanJob> = exec.advance(rig, &[]);
    while !exec.is_finished() {
        if let Some(job) = pending.take() {
            let result = job.run();
            exec.deliver_plan(rig, result);
        }
        let events = rig.tick();
        on_tick(rig, &events);
        pending = exec.advance(rig, &events);
        if rig.tick_count() > limit {
            let _ = rig.set_motion(Motion::Idle);
            exec.fail(rig, LocomotionError::DockingFailed("step timed out".into()));
        }
    }
    exec.outcome().expect("finished")
}

pub fn locomotion_step(
    rig: &mut Rig,
    goal: &StepGoal,
    options: &StepOptions,
) -> Result<StepRecord, (StepRecord, LocomotionError)> {
    locomotion_step_with(rig, goal, options, |_, _| {})
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaitReport {
    pub records: Vec<StepRecord>,
    /// Index of the failing step and its error.
    pub error: Option<(usize, LocomotionError)>,
}

impl GaitReport {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }
}

/// Runs the steps in order, stopping at the first failure. Step `i` plans
/// with seed `options.seed + i`.
pub fn run_gait(rig: &mut Rig, goals: &[StepGoal], options: &StepOptions) -> GaitReport {
    run_gait_with(rig, goals, options, |_, _| {})
}

pub fn run_gait_with<F>(
    rig: &mut Rig,
    goals: &[StepGoal],
    options: &StepOptions,
    mut on_tick: F,
) -> GaitReport
where
    F: FnMut(&Rig, &[RigEvent]),
{
    let mut records = Vec::new();
    for (i, goal) in goals.iter().enumerate() {
        let opts = StepOptions {
            seed: options.seed.wrapping_add(i as u64),
            ..*options
        };
        match locomotion_step_with(rig, goal, &opts, &mut on_tick) {
            Ok(r) => records.push(r),
            Err((r, e)) => {
                records.push(r);
                return GaitReport {
                    records,
                    error: Some((i, e)),
                };
            }
        }
    }
    GaitReport {
        records,
        error: None,
    }
}

/// Collision-free check of an executed joint path under `attach`.
pub fn path_is_free(checker: &CollisionChecker, qs: &[JointConfig]) -> bool {
    qs.iter().all(|q| !checker.is_colliding(q))
}

/// The attachment used when `moved` is the moving end.
pub fn attach_mode_for(rig: &Rig, moved: End) -> AttachMode {
    *rig.checker_for(moved, CollisionEnv::empty()).mode()
}
