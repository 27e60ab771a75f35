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

//! The simulation loop: a rig, the locomotion step in progress, the gait
//! around it and the command interface on top.

use std::sync::mpsc::{self, Receiver, TryRecvError};
use std::thread;

use inchworm_core::control::SteeringWrench;
use inchworm_core::docking::IcuPhase;
use inchworm_core::locomotion::{
    tick_limit, LocomotionError, PlanJob, StepExecutor, StepGoal, StepOptions, StepRecord,
};
use inchworm_core::planning::{PlanResult, PlanningError};
use inchworm_core::rig::{Motion, Rig, RigEvent};
use inchworm_core::{DockingMode, End, JointConfig, Pose};
use serde::{Deserialize, Serialize};

use crate::command::{Command, CommandError, ErrorCode};
use crate::metrics::{Metrics, StepMetrics};
use crate::scenario::{Scenario, ScenarioError, StepSettings};
use crate::trace::{DockState, TraceEvent, TraceRecord};

/// Where planning episodes run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Planning {
    /// Inside the tick that asks for the plan. Runs are reproducible.
    Inline,
    /// On a worker thread while the loop keeps ticking. Used by the live
    /// service so that planning never holds up the control loop.
    Background,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepStatus {
    pub index: usize,
    pub moved_end: End,
    pub target: String,
    pub phase: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaitStatus {
    /// Index of the next step to start within the gait.
    pub next: usize,
    pub total: usize,
    pub stopping: bool,
}

/// Full state published to live clients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub tick: u64,
    pub t: f64,
    pub q: JointConfig,
    pub q_d: JointConfig,
    pub mode: DockingMode,
    pub anchor: End,
    pub motion: String,
    pub base: Pose,
    pub tip: Pose,
    /// World pose of every segment frame, base segment first.
    pub segments: Vec<Pose>,
    pub docks: [DockState; 2],
    /// N·m
    pub torques: [f64; 7],
    /// N·m
    pub torque_limits: [f64; 7],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<StepStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gait: Option<GaitStatus>,
}

struct ActiveStep {
    index: usize,
    exec: StepExecutor,
    deadline: u64,
    worker: Option<Receiver<Result<PlanResult, PlanningError>>>,
}

struct GaitRun {
    steps: Vec<StepGoal>,
    next: usize,
    seed: u64,
    budget: f64,
    stopping: bool,
}

pub struct Simulation {
    name: String,
    rig: Rig,
    defaults: StepSettings,
    scenario_gait: Option<Vec<StepGoal>>,
    planning: Planning,
    step: Option<ActiveStep>,
    gait: Option<GaitRun>,
    steps_started: usize,
    metrics: Vec<StepMetrics>,
    pending: Vec<TraceEvent>,
    max_torque: f64,
}

fn dock_states(rig: &Rig) -> [DockState; 2] {
    [End::B, End::E].map(|e| DockState::from(rig.docking().icu(e)))
}

fn rig_event(e: RigEvent) -> TraceEvent {
    match e {
        RigEvent::Docking(event) => TraceEvent::Docking { event },
        RigEvent::TrajectoryFinished => TraceEvent::TrajectoryFinished,
        RigEvent::AnchorChanged { end } => TraceEvent::AnchorChanged { end },
        RigEvent::MotionStopped { reason } => TraceEvent::MotionStopped { reason },
    }
}

fn positive(value: Option<f64>, default: f64, what: &str) -> Result<f64, CommandError> {
    let v = value.unwrap_or(default);
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CommandError::new(
            ErrorCode::InvalidArgument,
            format!("{what} must be > 0"),
        ))
    }
}

impl Simulation {
    pub fn new(scenario: &Scenario, planning: Planning) -> Result<Simulation, ScenarioError> {
        Ok(Simulation {
            name: scenario.name.clone(),
            rig: scenario.build_rig()?,
            defaults: scenario.step,
            scenario_gait: scenario.gait.clone(),
            planning,
            step: None,
            gait: None,
            steps_started: 0,
            metrics: Vec::new(),
            pending: Vec::new(),
            max_torque: 0.0,
        })
    }

    pub fn rig(&self) -> &Rig {
        &self.rig
    }

    pub fn tick_count(&self) -> u64 {
        self.rig.tick_count()
    }

    pub fn seed(&self) -> u64 {
        self.defaults.seed
    }

    /// Overrides the scenario's step defaults (seed, budget, duration).
    pub fn set_step_defaults(&mut self, defaults: StepSettings) {
        self.defaults = defaults;
    }

    /// Nothing scheduled and nothing moving.
    pub fn is_idle(&self) -> bool {
        let clutch_moving = [End::B, End::E].iter().any(|e| {
            matches!(
                self.rig.docking().icu(*e).phase,
                IcuPhase::Closing { .. } | IcuPhase::Opening { .. }
            )
        });
        self.step.is_none()
            && self.gait.is_none()
            && matches!(self.rig.motion(), Motion::Idle)
            && !clutch_moving
    }

    /// Applies one command. The command and, on failure, the refusal are
    /// recorded in the trace.
    pub fn apply(
        &mut self,
        source: &str,
        id: Option<u64>,
        command: Command,
    ) -> Result<(), CommandError> {
        self.pending.push(TraceEvent::Command {
            source: source.to_string(),
            id,
            command: command.clone(),
        });
        let result = self.execute(command);
        if let Err(error) = &result {
            self.pending.push(TraceEvent::CommandRejected {
                source: source.to_string(),
                id,
                error: error.clone(),
            });
        }
        result
    }

    fn ensure_no_step(&self) -> Result<(), CommandError> {
        match &self.step {
            Some(s) => Err(CommandError::new(
                ErrorCode::Busy,
                format!(
                    "locomotion step {} to {} is in progress",
                    s.index,
                    s.exec.goal().target
                ),
            )),
            None => Ok(()),
        }
    }

    fn execute(&mut self, command: Command) -> Result<(), CommandError> {
        match command {
            Command::Jog { wrench } => {
                self.ensure_no_step()?;
                self.rig.set_motion(Motion::Jog {
                    wrench: SteeringWrench(wrench),
                })?;
            }
            Command::SetTarget { pose } => {
                self.ensure_no_step()?;
                self.rig.set_motion(Motion::Target { pose })?;
            }
            Command::Stop => {
                self.ensure_no_step()?;
                self.rig.set_motion(Motion::Idle)?;
            }
            Command::Dock { end, interface } => {
                self.ensure_no_step()?;
                self.rig.request_dock(end, interface.as_deref())?;
            }
            Command::Undock { end } => {
                self.ensure_no_step()?;
                self.rig.request_undock(end)?;
            }
            Command::PlanTo {
                end,
                interface,
                seed,
                budget_s,
                duration_s,
            } => {
                self.ensure_no_step()?;
                let budget = positive(budget_s, self.defaults.budget_s, "budget_s")?;
                let duration = positive(duration_s, self.defaults.duration_s, "duration_s")?;
                let goal = StepGoal {
                    moved_end: end,
                    target: interface,
                    duration,
                };
                self.start_step(&goal, seed.unwrap_or(self.defaults.seed), budget)?;
            }
            Command::StartGait { steps } => {
                self.ensure_no_step()?;
                let steps = steps
                    .or_else(|| self.scenario_gait.clone())
                    .ok_or_else(|| {
                        CommandError::new(ErrorCode::InvalidArgument, "the scenario has no gait")
                    })?;
                if steps.is_empty() {
                    return Err(CommandError::new(
                        ErrorCode::InvalidArgument,
                        "gait has no steps",
                    ));
                }
                for s in &steps {
                    if self.rig.docking().interface(&s.target).is_none() {
                        return Err(CommandError::new(
                            ErrorCode::UnknownInterface,
                            format!("unknown interface {}", s.target),
                        ));
                    }
                }
                let first = steps[0].clone();
                let seed = self.defaults.seed;
                let budget = self.defaults.budget_s;
                self.start_step(&first, seed, budget)?;
                self.pending
                    .push(TraceEvent::GaitStarted { steps: steps.len() });
                self.gait = Some(GaitRun {
                    steps,
                    next: 1,
                    seed,
                    budget,
                    stopping: false,
                });
            }
            Command::StopGait => match self.gait.as_mut() {
                Some(g) => g.stopping = true,
                None => return Err(CommandError::new(ErrorCode::State, "no gait is running")),
            },
            Command::Inject { end, injection } => self.rig.inject(end, injection),
            Command::ResetFault { end } => {
                self.rig.reset_fault(end)?;
            }
        }
        Ok(())
    }

    fn start_step(&mut self, goal: &StepGoal, seed: u64, budget: f64) -> Result<(), CommandError> {
        let options = StepOptions {
            budget,
            seed,
            pose_tolerance: self.defaults.pose_tolerance,
        };
        let mut exec = StepExecutor::start(&mut self.rig, goal, &options)?;
        let index = self.steps_started;
        self.steps_started += 1;
        self.pending.push(TraceEvent::StepStarted {
            index,
            moved_end: goal.moved_end,
            from: exec.record().from.clone(),
            target: goal.target.clone(),
            mode: DockingMode::moving(goal.moved_end),
            seed,
        });
        let job = exec.advance(&mut self.rig, &[]);
        let mut step = ActiveStep {
            index,
            exec,
            deadline: self.rig.tick_count() + tick_limit(&self.rig, goal),
            worker: None,
        };
        if let Some(job) = job {
            self.dispatch(&mut step, job);
        }
        self.step = Some(step);
        Ok(())
    }

    fn dispatch(&mut self, step: &mut ActiveStep, job: PlanJob) {
        self.pending.push(TraceEvent::PlanStarted {
            moved_end: step.exec.goal().moved_end,
            target: step.exec.goal().target.clone(),
            seed: job.request.seed,
            budget_s: job.request.budget,
        });
        match self.planning {
            Planning::Inline => {
                let result = job.run();
                self.deliver(step, result);
            }
            Planning::Background => {
                let (tx, rx) = mpsc::channel();
                thread::spawn(move || {
                    let _ = tx.send(job.run());
                });
                step.worker = Some(rx);
            }
        }
    }

    fn deliver(&mut self, step: &mut ActiveStep, result: Result<PlanResult, PlanningError>) {
        let goal = step.exec.goal();
        self.pending.push(TraceEvent::PlanFinished {
            moved_end: goal.moved_end,
            target: goal.target.clone(),
            success: result.is_ok(),
            iterations: result.as_ref().ok().map(|r| r.stats.iterations),
            cost: result.as_ref().ok().map(|r| r.cost),
            error: result.as_ref().err().map(|e| e.to_string()),
        });
        step.exec.deliver_plan(&mut self.rig, result);
    }

    /// Advances one control period and returns the resulting record.
    pub fn tick(&mut self) -> TraceRecord {
        if let Some(mut step) = self.step.take() {
            let ready = match step.worker.as_ref().map(|rx| rx.try_recv()) {
                Some(Ok(result)) => Some(result),
                Some(Err(TryRecvError::Disconnected)) => Some(Err(PlanningError::InvalidRequest(
                    "planner worker stopped".into(),
                ))),
                Some(Err(TryRecvError::Empty)) | None => None,
            };
            if let Some(result) = ready {
                step.worker = None;
                self.deliver(&mut step, result);
            }
            self.step = Some(step);
        }

        let events = self.rig.tick();
        self.pending.extend(events.iter().cloned().map(rig_event));

        if let Some(mut step) = self.step.take() {
            if let Some(job) = step.exec.advance(&mut self.rig, &events) {
                self.dispatch(&mut step, job);
            }
            if !step.exec.is_finished()
                && self.rig.tick_count() > step.deadline
                && step.worker.is_none()
            {
                let _ = self.rig.set_motion(Motion::Idle);
                step.exec.fail(
                    &self.rig,
                    LocomotionError::DockingFailed("step timed out".into()),
                );
            }
            match step.exec.outcome() {
                Some(outcome) => self.finish_step(step.index, outcome),
                None => self.step = Some(step),
            }
        }

        self.max_torque = self.max_torque.max(self.rig.torques().max_abs());
        self.record()
    }

    fn finish_step(
        &mut self,
        index: usize,
        outcome: Result<StepRecord, (StepRecord, LocomotionError)>,
    ) {
        let (record, success) = match outcome {
            Ok(r) => (r, true),
            Err((r, _)) => (r, false),
        };
        self.pending.push(TraceEvent::StepFinished {
            index,
            moved_end: record.moved_end,
            target: record.target.clone(),
            success,
            error: record.error.clone(),
        });
        self.metrics.push(StepMetrics::from_record(index, &record));

        let Some(mut gait) = self.gait.take() else {
            return;
        };
        if !success || gait.stopping || gait.next >= gait.steps.len() {
            let finished = success && gait.next >= gait.steps.len();
            self.pending
                .push(TraceEvent::GaitFinished { success: finished });
            return;
        }
        let goal = gait.steps[gait.next].clone();
        let seed = gait.seed.wrapping_add(gait.next as u64);
        gait.next += 1;
        match self.start_step(&goal, seed, gait.budget) {
            Ok(()) => self.gait = Some(gait),
            Err(e) => {
                let index = self.steps_started;
                self.steps_started += 1;
                self.pending.push(TraceEvent::StepFinished {
                    index,
                    moved_end: goal.moved_end,
                    target: goal.target.clone(),
                    success: false,
                    error: Some(e.message.clone()),
                });
                self.pending
                    .push(TraceEvent::GaitFinished { success: false });
            }
        }
    }

    /// Current state with the events gathered since the previous record.
    pub fn record(&mut self) -> TraceRecord {
        let poses = self.rig.end_poses();
        TraceRecord {
            tick: self.rig.tick_count(),
            t: self.rig.time(),
            q: self.rig.q(),
            tip: poses.tip,
            base: poses.base,
            mode: self.rig.mode(),
            anchor: self.rig.anchor(),
            motion: self.rig.motion().name().to_string(),
            docks: dock_states(&self.rig),
            torques: self.rig.torques().0,
            events: std::mem::take(&mut self.pending),
        }
    }

    pub fn snapshot(&self) -> Snapshot {
        let poses = self.rig.end_poses();
        Snapshot {
            tick: self.rig.tick_count(),
            t: self.rig.time(),
            q: self.rig.q(),
            q_d: self.rig.q_d(),
            mode: self.rig.mode(),
            anchor: self.rig.anchor(),
            motion: self.rig.motion().name().to_string(),
            base: poses.base,
            tip: poses.tip,
            segments: self.rig.segment_world_poses().to_vec(),
            docks: dock_states(&self.rig),
            torques: self.rig.torques().0,
            torque_limits: self.rig.chain().torque_limits(),
            step: self.step.as_ref().map(|s| StepStatus {
                index: s.index,
                moved_end: s.exec.goal().moved_end,
                target: s.exec.goal().target.clone(),
                phase: s.exec.phase_name().to_string(),
            }),
            gait: self.gait.as_ref().map(|g| GaitStatus {
                next: g.next,
                total: g.steps.len(),
                stopping: g.stopping,
            }),
        }
    }

    pub fn step_metrics(&self) -> &[StepMetrics] {
        &self.metrics
    }

    pub fn metrics(&self, truncated: bool) -> Metrics {
        Metrics {
            scenario: self.name.clone(),
            seed: self.defaults.seed,
            ticks: self.rig.tick_count(),
            duration_s: self.rig.time(),
            steps: self.metrics.clone(),
            max_torque_nm: self.max_torque,
            truncated,
        }
    }
}
