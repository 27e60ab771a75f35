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

//! Static checks of a scenario: stance torques and clearance, interface
//! reach, and whether every gait step has a collision-free docked goal
//! configuration within the torque limits.

use inchworm_core::collision::{
    AttachMode, CollisionChecker, CollisionEnv, Exemption, DEFAULT_DOCKING_EXEMPTION_RADIUS,
};
use inchworm_core::kinematics::{goal_in_planning_frame, EndPoses};
use inchworm_core::planning::ik_goal_samples;
use inchworm_core::statics::{
    feasibility_from_torques, gravity_torques, supporting_end, FeasibilityReport,
};
use inchworm_core::{DockingMode, End, JointConfig, Pose};
use serde::{Deserialize, Serialize};

use crate::scenario::{Scenario, ScenarioError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StanceCheck {
    pub mode: DockingMode,
    pub docked: Vec<(End, String)>,
    pub feasibility: FeasibilityReport,
    /// m; absent when nothing was close enough to measure.
    pub min_clearance_m: Option<f64>,
    pub colliding: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterfaceReach {
    pub id: String,
    /// Distance from each end's current position, m.
    pub distance_from_b: f64,
    pub distance_from_e: f64,
    /// Ends whose current position is within reach of the interface,
    /// leaving out an end that already sits on it.
    pub within_reach_of: Vec<End>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaitStepCheck {
    pub index: usize,
    pub moved_end: End,
    pub target: String,
    /// Interface holding the other end during the step.
    pub support: String,
    pub distance_m: f64,
    pub within_reach: bool,
    /// Collision-free docked goal configurations found.
    pub goal_configs: usize,
    /// Torques at the goal configuration with the largest torque margin.
    pub best: Option<FeasibilityReport>,
    pub feasible: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub scenario: String,
    pub interfaces: usize,
    pub blocks: usize,
    pub stance: StanceCheck,
    pub reach: Vec<InterfaceReach>,
    pub gait: Vec<GaitStepCheck>,
    pub feasible: bool,
}

fn min_margin(r: &FeasibilityReport) -> f64 {
    r.margins.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Validates `scenario` and evaluates it without simulating.
pub fn check_scenario(scenario: &Scenario) -> Result<CheckReport, ScenarioError> {
    scenario.validate()?;
    let rig = scenario.build_rig()?;
    let chain = rig.chain();
    let reach = chain.reach_bound();
    let gravity = scenario.gravity();

    let mode = rig.mode();
    let support = rig.world_pose(supporting_end(mode));
    let g = support.rotation.inverse() * gravity;
    let feasibility = feasibility_from_torques(chain, gravity_torques(chain, &rig.q(), &g, mode));
    let moving = mode.free_end().unwrap_or(End::E);
    let report = rig
        .checker_for(moving, rig.collision_env(&[]))
        .check(&rig.q());
    let docked: Vec<(End, String)> = [End::B, End::E]
        .into_iter()
        .filter_map(|e| {
            rig.docking()
                .docked_interface(e)
                .map(|i| (e, i.to_string()))
        })
        .collect();
    let stance = StanceCheck {
        mode,
        docked: docked.clone(),
        feasibility,
        min_clearance_m: report
            .min_clearance
            .is_finite()
            .then_some(report.min_clearance),
        colliding: report.colliding,
    };

    let b = rig.world_pose(End::B);
    let e = rig.world_pose(End::E);
    let reach_table = scenario
        .interfaces
        .iter()
        .map(|i| {
            let db = b.translation_distance(&i.pose);
            let de = e.translation_distance(&i.pose);
            let mut from = Vec::new();
            for (end, d) in [(End::B, db), (End::E, de)] {
                if d <= reach && d > 1e-9 {
                    from.push(end);
                }
            }
            InterfaceReach {
                id: i.id.clone(),
                distance_from_b: db,
                distance_from_e: de,
                within_reach_of: from,
            }
        })
        .collect();

    let mut gait = Vec::new();
    if let Some(steps) = &scenario.gait {
        let mut at: [Option<String>; 2] = [None, None];
        for (end, id) in &docked {
            at[end.index()] = Some(id.clone());
        }
        let mut q_prev = rig.q();
        for (index, step) in steps.iter().enumerate() {
            let stay = step.moved_end.other();
            let check = match at[stay.index()].clone() {
                Some(support_id) => {
                    let c = check_step(
                        scenario,
                        index,
                        step.moved_end,
                        &support_id,
                        &step.target,
                        &q_prev,
                    );
                    if let Some(q) = c.1 {
                        q_prev = q;
                    }
                    c.0
                }
                None => GaitStepCheck {
                    index,
                    moved_end: step.moved_end,
                    target: step.target.clone(),
                    support: String::new(),
                    distance_m: f64::NAN,
                    within_reach: false,
                    goal_configs: 0,
                    best: None,
                    feasible: false,
                },
            };
            gait.push(check);
            at[step.moved_end.index()] = Some(step.target.clone());
        }
    }

    let feasible =
        stance.feasibility.feasible && !stance.colliding && gait.iter().all(|s| s.feasible);
    Ok(CheckReport {
        scenario: scenario.name.clone(),
        interfaces: scenario.interfaces.len(),
        blocks: scenario.blocks.len(),
        stance,
        reach: reach_table,
        gait,
        feasible,
    })
}

fn check_step(
    scenario: &Scenario,
    index: usize,
    moved: End,
    support_id: &str,
    target_id: &str,
    seed_q: &JointConfig,
) -> (GaitStepCheck, Option<JointConfig>) {
    let chain = &scenario.robot;
    let support = scenario.interface(support_id).expect("validated").pose;
    let target = scenario.interface(target_id).expect("validated").pose;
    let distance = support.translation_distance(&target);
    let within_reach = distance <= chain.reach_bound();
    let mode = DockingMode::moving(moved);
    let ends = match moved {
        End::E => EndPoses {
            base: support,
            tip: Pose::identity(),
        },
        End::B => EndPoses {
            base: Pose::identity(),
            tip: support,
        },
    };
    let mut out = GaitStepCheck {
        index,
        moved_end: moved,
        target: target_id.to_string(),
        support: support_id.to_string(),
        distance_m: distance,
        within_reach,
        goal_configs: 0,
        best: None,
        feasible: false,
    };
    if !within_reach {
        return (out, None);
    }
    let goal = goal_in_planning_frame(mode, &ends, &target).expect("single-docked mode");
    let attach = match moved {
        End::E => AttachMode::EnvFixedToBase {
            base_world: support,
        },
        End::B => AttachMode::EnvAttachedToTip {
            tip_from_world: support.inverse(),
        },
    };
    let mut env = CollisionEnv::new(scenario.blocks.iter().map(|b| b.shape()).collect())
        .with_margin(scenario.safety_margin);
    for (end, point) in [
        (moved.other(), support.translation),
        (moved, target.translation),
    ] {
        env = env.with_exemption(Exemption {
            end,
            point,
            radius: DEFAULT_DOCKING_EXEMPTION_RADIUS,
        });
    }
    let checker =
        CollisionChecker::new(chain.clone(), env, attach, scenario.planner.self_collision);
    let mut ik = scenario.planner.ik;
    ik.tolerance = scenario.step.pose_tolerance;
    let configs: Vec<JointConfig> = ik_goal_samples(
        chain,
        &goal,
        scenario.planner.goal_samples,
        scenario.step.seed,
        &[*seed_q],
        &ik,
    )
    .into_iter()
    .filter(|q| !checker.is_colliding(q))
    .collect();
    out.goal_configs = configs.len();

    // The docked end frame coincides with its interface frame.
    let g = support.rotation.inverse() * scenario.gravity();
    let best = configs
        .iter()
        .map(|q| {
            (
                *q,
                feasibility_from_torques(chain, gravity_torques(chain, q, &g, mode)),
            )
        })
        .max_by(|a, b| min_margin(&a.1).total_cmp(&min_margin(&b.1)));
    match best {
        Some((q, report)) => {
            out.feasible = report.feasible;
            out.best = Some(report);
            (out, Some(q))
        }
        None => (out, None),
    }
}
