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

//! The simulated robot: joint state, both ICUs and the 100 Hz control loop.
//!
//! One end is the anchor whose world pose is fixed; every other world pose
//! follows from forward kinematics. When the anchor end is released the
//! anchor moves to the other (docked) end.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collision::{
    AttachMode, CollisionChecker, CollisionEnv, CollisionShape, Exemption,
    DEFAULT_DOCKING_EXEMPTION_RADIUS, DEFAULT_SAFETY_MARGIN,
};
use crate::control::servo_step;
use crate::control::{
    motion_controller_step, solver_step, trajectory_controller_tick, CartesianTarget, ControlError,
    SolverParams, SteeringWrench, VirtualState,
};
use crate::docking::{
    alignment_check, DockingError, DockingEvent, DockingParams, DockingSystem, IcuPhase, Interface,
};
use crate::kinematics::{DockingMode, End, EndPoses, JointConfig, KinematicChain, SEGMENT_COUNT};
use crate::planning::{PlannerParams, Trajectory};
use crate::pose::Pose;
use crate::statics::{gravity_torques, supporting_end, TorqueVector};

pub const CONTROL_PERIOD: f64 = 0.01;

/// Static description of the robot and its surroundings.
#[derive(Clone, Debug, PartialEq)]
pub struct RigConfig {
    /// Chain rooted at `B`.
    pub chain: KinematicChain,
    /// Obstacles in world coordinates.
    pub obstacles: Vec<CollisionShape>,
    /// World frame, m/s².
    pub gravity: Vector3<f64>,
    pub docking: DockingParams,
    pub solver: SolverParams,
    pub planner: PlannerParams,
    pub safety_margin: f64,
    pub exemption_radius: f64,
    /// Refuse trajectories whose quasi-static torques exceed the limits.
    pub enforce_torque_limits: bool,
}

impl RigConfig {
    pub fn new(
        chain: KinematicChain,
        obstacles: Vec<CollisionShape>,
        gravity: Vector3<f64>,
    ) -> Self {
        RigConfig {
            chain,
            obstacles,
            gravity,
            docking: DockingParams::default(),
            solver: SolverParams::default(),
            planner: PlannerParams::default(),
            safety_margin: DEFAULT_SAFETY_MARGIN,
            exemption_radius: DEFAULT_DOCKING_EXEMPTION_RADIUS,
            enforce_torque_limits: false,
        }
    }
}

/// Initial stance: `anchor` docked at `interface` with joint angles `q0`,
/// optionally with the other end docked as well.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialStance {
    pub end: End,
    pub interface: String,
    pub q0: JointConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub also_docked: Option<String>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RigError {
    #[error(transparent)]
    Docking(#[from] DockingError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error("unknown interface {0}")]
    UnknownInterface(String),
    #[error("{0}")]
    Busy(String),
    #[error("no free end to move while both ends are docked")]
    NoFreeEnd,
    #[error("a docking unit is in fault")]
    Faulted,
    #[error("initial stance is inconsistent: {0}")]
    InvalidStance(String),
}

/// What the joint controller is following.
#[derive(Clone, Debug, PartialEq)]
pub enum Motion {
    Idle,
    Trajectory {
        trajectory: Trajectory,
        start_tick: u64,
    },
    /// Steering wrench applied to the free end, world frame.
    Jog {
        wrench: SteeringWrench,
    },
    /// World pose for the free end.
    Target {
        pose: Pose,
    },
}

impl Motion {
    pub fn name(&self) -> &'static str {
        match self {
            Motion::Idle => "idle",
            Motion::Trajectory { .. } => "trajectory",
            Motion::Jog { .. } => "jog",
            Motion::Target { .. } => "target",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RigEvent {
    Docking(DockingEvent),
    TrajectoryFinished,
    AnchorChanged { end: End },
    MotionStopped { reason: String },
}

#[derive(Clone, Debug)]
pub struct Rig {
    config: RigConfig,
    rerooted: KinematicChain,
    q: JointConfig,
    q_d: JointConfig,
    docking: DockingSystem,
    anchor: End,
    anchor_pose: Pose,
    motion: Motion,
    virtual_state: VirtualState,
    /// Chain the virtual state belongs to.
    virtual_root: End,
    tick: u64,
    torques: TorqueVector,
    /// Events produced by requests since the last tick.
    queued: Vec<RigEvent>,
}

impl Rig {
    pub fn new(
        config: RigConfig,
        interfaces: Vec<Interface>,
        stance: &InitialStance,
    ) -> Result<Rig, RigError> {
        config
            .chain
            .validate()
            .map_err(|e| RigError::InvalidStance(e.to_string()))?;
        if config.chain.base_end() != End::B {
            return Err(RigError::InvalidStance("chain must be rooted at B".into()));
        }
        if !stance.q0.is_finite() || !config.chain.within_limits(&stance.q0) {
            return Err(RigError::InvalidStance("q0 outside joint limits".into()));
        }
        let mut docking = DockingSystem::new(interfaces, config.docking);
        let anchor_pose = docking
            .interface(&stance.interface)
            .ok_or_else(|| RigError::UnknownInterface(stance.interface.clone()))?
            .pose;
        docking.set_docked(stance.end, &stance.interface)?;
        let rerooted = config.chain.reroot();
        let mut rig = Rig {
            rerooted,
            q: stance.q0,
            q_d: stance.q0,
            docking,
            anchor: stance.end,
            anchor_pose,
            motion: Motion::Idle,
            virtual_state: VirtualState::default(),
            virtual_root: End::B,
            tick: 0,
            torques: TorqueVector([0.0; 7]),
            queued: Vec::new(),
            config,
        };
        if let Some(other) = &stance.also_docked {
            let iface = rig
                .docking
                .interface(other)
                .ok_or_else(|| RigError::UnknownInterface(other.clone()))?
                .clone();
            let pose = rig.world_pose(stance.end.other());
            let check = alignment_check(&pose, &iface, &rig.config.docking.tolerance);
            if !check.aligned {
                return Err(RigError::InvalidStance(format!(
                    "end {} is {:.4} m / {:.4} rad away from {}",
                    stance.end.other(),
                    check.translation_offset,
                    check.rotation_offset,
                    other
                )));
            }
            rig.docking.set_docked(stance.end.other(), other)?;
        }
        rig.torques = rig.estimate_torques();
        Ok(rig)
    }

    pub fn config(&self) -> &RigConfig {
        &self.config
    }

    pub fn chain(&self) -> &KinematicChain {
        &self.config.chain
    }

    pub fn q(&self) -> JointConfig {
        self.q
    }

    pub fn q_d(&self) -> JointConfig {
        self.q_d
    }

    pub fn tick_count(&self) -> u64 {
        self.tick
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * CONTROL_PERIOD
    }

    pub fn docking(&self) -> &DockingSystem {
        &self.docking
    }

    pub fn motion(&self) -> &Motion {
        &self.motion
    }

    pub fn anchor(&self) -> End {
        self.anchor
    }

    pub fn torques(&self) -> TorqueVector {
        self.torques
    }

    pub fn mode(&self) -> DockingMode {
        self.docking
            .mode()
            .unwrap_or(DockingMode::moving(self.anchor.other()))
    }

    pub fn end_poses(&self) -> EndPoses {
        let tip = self.config.chain.tip_pose(&self.q);
        match self.anchor {
            End::B => EndPoses {
                base: self.anchor_pose,
                tip: self.anchor_pose.compose(&tip),
            },
            End::E => EndPoses {
                base: self.anchor_pose.compose(&tip.inverse()),
                tip: self.anchor_pose,
            },
        }
    }

    pub fn world_pose(&self, end: End) -> Pose {
        let poses = self.end_poses();
        match end {
            End::B => poses.base,
            End::E => poses.tip,
        }
    }

    /// World pose of every segment frame, base segment first.
    pub fn segment_world_poses(&self) -> [Pose; SEGMENT_COUNT] {
        let base = self.world_pose(End::B);
        let fk = self.config.chain.forward_kinematics(&self.q);
        fk.segment_poses.map(|p| base.compose(&p))
    }

    fn support_gravity(&self, mode: DockingMode) -> Vector3<f64> {
        let support = self.world_pose(supporting_end(mode));
        support.rotation.inverse() * self.config.gravity
    }

    fn estimate_torques(&self) -> TorqueVector {
        let mode = self.mode();
        gravity_torques(
            &self.config.chain,
            &self.q,
            &self.support_gravity(mode),
            mode,
        )
    }

    /// Collision environment for the current stance, with docking
    /// exemptions at the interfaces the ends currently sit on and at
    /// `extra` (e.g. a docking target).
    pub fn collision_env(&self, extra: &[(End, Vector3<f64>)]) -> CollisionEnv {
        let mut env =
            CollisionEnv::new(self.config.obstacles.clone()).with_margin(self.config.safety_margin);
        for end in [End::B, End::E] {
            env = env.with_exemption(Exemption {
                end,
                point: self.world_pose(end).translation,
                radius: self.config.exemption_radius,
            });
        }
        for (end, point) in extra {
            env = env.with_exemption(Exemption {
                end: *end,
                point: *point,
                radius: self.config.exemption_radius,
            });
        }
        env
    }

    /// Collision checker in the planning frame used to move `moving`.
    pub fn checker_for(&self, moving: End, env: CollisionEnv) -> CollisionChecker {
        let poses = self.end_poses();
        let mode = match moving {
            End::E => AttachMode::EnvFixedToBase {
                base_world: poses.base,
            },
            End::B => AttachMode::EnvAttachedToTip {
                tip_from_world: poses.tip.inverse(),
            },
        };
        CollisionChecker::new(
            self.config.chain.clone(),
            env,
            mode,
            self.config.planner.self_collision,
        )
    }

    fn any_fault(&self) -> bool {
        [End::B, End::E]
            .iter()
            .any(|e| matches!(self.docking.icu(*e).phase, IcuPhase::Fault { .. }))
    }

    fn clutch_busy(&self) -> bool {
        [End::B, End::E].iter().any(|e| {
            matches!(
                self.docking.icu(*e).phase,
                IcuPhase::Closing { .. } | IcuPhase::Opening { .. }
            )
        })
    }

    /// Replaces the current motion. Cartesian motions need a free end and
    /// no docking unit in fault; nothing may move while a clutch is moving.
    pub fn set_motion(&mut self, motion: Motion) -> Result<(), RigError> {
        match &motion {
            Motion::Idle => {}
            Motion::Jog { wrench } => {
                if !wrench.is_finite() {
                    return Err(
                        ControlError::InvalidInput("steering wrench is not finite".into()).into(),
                    );
                }
                self.check_movable()?;
            }
            Motion::Target { pose } => {
                if !pose.is_finite() {
                    return Err(
                        ControlError::InvalidInput("target pose is not finite".into()).into(),
                    );
                }
                self.check_movable()?;
            }
            Motion::Trajectory { trajectory, .. } => {
                self.check_movable()?;
                if trajectory.start().max_abs_diff(&self.q) > 1e-6 {
                    return Err(RigError::Busy(
                        "trajectory does not start at the current configuration".into(),
                    ));
                }
            }
        }
        self.motion = motion;
        Ok(())
    }

    /// Starts following `trajectory` from the next tick.
    pub fn start_trajectory(&mut self, trajectory: Trajectory) -> Result<(), RigError> {
        self.set_motion(Motion::Trajectory {
            trajectory,
            start_tick: self.tick,
        })
    }

    fn check_movable(&self) -> Result<(), RigError> {
        if self.any_fault() {
            return Err(RigError::Faulted);
        }
        if self.clutch_busy() {
            return Err(RigError::Busy("a clutch is moving".into()));
        }
        if self.mode().free_end().is_none() {
            return Err(RigError::NoFreeEnd);
        }
        Ok(())
    }

    /// Closes `end` on `iface`, or on the interface it is aligned with.
    pub fn request_dock(
        &mut self,
        end: End,
        iface: Option<&str>,
    ) -> Result<DockingEvent, RigError> {
        if !matches!(self.motion, Motion::Idle) {
            return Err(RigError::Busy(format!(
                "cannot dock during {} motion",
                self.motion.name()
            )));
        }
        let pose = self.world_pose(end);
        let id = match iface {
            Some(id) => id.to_string(),
            None => self
                .docking
                .interfaces()
                .iter()
                .filter(|i| i.occupied_by.is_none())
                .min_by(|a, b| {
                    pose.translation_distance(&a.pose)
                        .total_cmp(&pose.translation_distance(&b.pose))
                })
                .map(|i| i.id.clone())
                .ok_or_else(|| RigError::UnknownInterface("<nearest>".into()))?,
        };
        let event = self.docking.request_close(end, &pose, &id)?;
        self.queued.push(RigEvent::Docking(event.clone()));
        Ok(event)
    }

    pub fn request_undock(&mut self, end: End) -> Result<DockingEvent, RigError> {
        if !matches!(self.motion, Motion::Idle) {
            return Err(RigError::Busy(format!(
                "cannot undock during {} motion",
                self.motion.name()
            )));
        }
        let event = self.docking.request_open(end)?;
        self.queued.push(RigEvent::Docking(event.clone()));
        Ok(event)
    }

    pub fn inject(&mut self, end: End, injection: crate::docking::Injection) {
        self.docking.inject(end, injection);
    }

    pub fn reset_fault(&mut self, end: End) -> Result<DockingEvent, RigError> {
        let event = self.docking.reset(end)?;
        self.queued.push(RigEvent::Docking(event.clone()));
        Ok(event)
    }

    /// Desired joint positions for this tick.
    fn command(&mut self, events: &mut Vec<RigEvent>) -> JointConfig {
        match self.motion.clone() {
            Motion::Idle => self.q,
            Motion::Trajectory {
                trajectory,
                start_tick,
            } => {
                let t = (self.tick + 1 - start_tick) as f64 * CONTROL_PERIOD;
                trajectory_controller_tick(&trajectory, t).q_d
            }
            Motion::Jog { wrench } => self.cartesian(events, |rig, chain, q, base, state| {
                let r = base.rotation.inverse();
                let f = Vector3::new(wrench.0[0], wrench.0[1], wrench.0[2]);
                let m = Vector3::new(wrench.0[3], wrench.0[4], wrench.0[5]);
                let (f, m) = (r * f, r * m);
                let local = SteeringWrench([f.x, f.y, f.z, m.x, m.y, m.z]);
                solver_step(chain, q, &local, &rig.config.solver, state)
            }),
            Motion::Target { pose } => self.cartesian(events, |rig, chain, q, base, state| {
                let target = CartesianTarget {
                    pose: base.inverse().compose(&pose),
                };
                motion_controller_step(chain, q, &target, &rig.config.solver, state)
            }),
        }
    }

    /// Runs a Cartesian controller on the chain rooted at the docked end.
    fn cartesian<F>(&mut self, events: &mut Vec<RigEvent>, step: F) -> JointConfig
    where
        F: Fn(
            &Rig,
            &KinematicChain,
            &JointConfig,
            &Pose,
            &mut VirtualState,
        ) -> Result<crate::control::JointCommand, ControlError>,
    {
        let Some(free) = self.mode().free_end() else {
            self.stop(events, "no free end");
            return self.q;
        };
        let root = free.other();
        if self.virtual_root != root {
            self.virtual_state.reset();
            self.virtual_root = root;
        }
        let base = self.world_pose(root);
        let mut state = self.virtual_state;
        let result = if root == End::B {
            step(self, &self.config.chain, &self.q, &base, &mut state).map(|c| c.q_d)
        } else {
            let q = self.config.chain.reverse_map(&self.q);
            step(self, &self.rerooted, &q, &base, &mut state)
                .map(|c| self.rerooted.reverse_map(&c.q_d))
        };
        self.virtual_state = state;
        match result {
            Ok(q_d) => q_d,
            Err(e) => {
                self.stop(events, &e.to_string());
                self.q
            }
        }
    }

    fn stop(&mut self, events: &mut Vec<RigEvent>, reason: &str) {
        self.motion = Motion::Idle;
        self.virtual_state.reset();
        events.push(RigEvent::MotionStopped {
            reason: reason.to_string(),
        });
    }

    /// One control period: controller, servo, docking units, torque estimate.
    pub fn tick(&mut self) -> Vec<RigEvent> {
        let mut events = std::mem::take(&mut self.queued);
        if !matches!(self.motion, Motion::Idle | Motion::Trajectory { .. })
            && (self.any_fault() || self.mode().free_end().is_none())
        {
            self.stop(&mut events, "free end lost or unit in fault");
        }
        let q_d = self.command(&mut events);
        self.q_d = q_d;
        self.q = servo_step(
            &self.q,
            &q_d,
            CONTROL_PERIOD,
            &self.config.chain.velocity_limits(),
        );

        if let Motion::Trajectory {
            trajectory,
            start_tick,
        } = &self.motion
        {
            let t = (self.tick + 1 - start_tick) as f64 * CONTROL_PERIOD;
            if t >= trajectory.duration && self.q == trajectory.end() {
                self.motion = Motion::Idle;
                events.push(RigEvent::TrajectoryFinished);
            }
        }

        for end in [End::B, End::E] {
            let pose = self.world_pose(end);
            self.docking.observe_alignment(end, &pose);
        }
        let anchor_other_pose = self.world_pose(self.anchor.other());
        for ev in self.docking.tick(CONTROL_PERIOD) {
            if let DockingEvent::Undocked { end, .. } = &ev {
                if *end == self.anchor {
                    self.anchor = end.other();
                    self.anchor_pose = anchor_other_pose;
                    events.push(RigEvent::Docking(ev));
                    events.push(RigEvent::AnchorChanged { end: self.anchor });
                    continue;
                }
            }
            events.push(RigEvent::Docking(ev));
        }
        self.tick += 1;
        self.torques = self.estimate_torques();
        events
    }
}
