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

use inchworm_core::collision::CollisionShape;
use inchworm_core::docking::{Interface, InterfaceKind};
use inchworm_core::kinematics::default_chain;
use inchworm_core::locomotion::{
    locomotion_step, locomotion_step_with, run_gait, LocomotionError, StepGoal, StepOptions,
};
use inchworm_core::mockup::{self, arch};
use inchworm_core::rig::{InitialStance, Rig, RigConfig};
use inchworm_core::{DockingMode, End, Pose};
use nalgebra::Vector3;

const EARTH: Vector3<f64> = Vector3::new(0.0, 0.0, -9.81);

fn mockup_rig() -> Rig {
    let config = RigConfig::new(default_chain(), mockup::blocks(), EARTH);
    Rig::new(config, mockup::interfaces(), &mockup::initial_stance()).unwrap()
}

/// A straight strip of floor with interfaces `P0`..`P4` every 0.30 m along
/// `-x`, starting at `x = 1.20`. `B` sits on `P0` and `E` on `P1`.
fn strip_rig() -> Rig {
    let xs = [1.20, 0.90, 0.60, 0.30, 0.00];
    let interfaces = xs
        .iter()
        .enumerate()
        .map(|(i, x)| Interface {
            id: format!("P{i}"),
            pose: Pose::from_translation(*x, 0.0, 0.0),
            kind: InterfaceKind::Passive,
            occupied_by: None,
        })
        .collect();
    let blocks = xs
        .iter()
        .map(|x| CollisionShape::Box {
            pose: Pose::from_translation(*x, 0.0, -0.15),
            half_extents: Vector3::new(0.15, 0.15, 0.15),
        })
        .collect();
    let stance = InitialStance {
        end: End::B,
        interface: "P0".into(),
        q0: arch(0.30),
        also_docked: Some("P1".into()),
    };
    Rig::new(
        RigConfig::new(default_chain(), blocks, EARTH),
        interfaces,
        &stance,
    )
    .unwrap()
}

fn goal(moved_end: End, target: &str) -> StepGoal {
    StepGoal {
        moved_end,
        target: target.into(),
        duration: 6.0,
    }
}

fn interface_pose(rig: &Rig, id: &str) -> Pose {
    rig.docking().interface(id).unwrap().pose
}

fn both_docked(rig: &Rig) -> bool {
    rig.docking().mode() == Some(DockingMode::Transition)
}

#[test]
fn tip_moves_to_the_adjacent_interface() {
    let mut rig = mockup_rig();
    let base_before = rig.world_pose(End::B);
    let mut anchor_drift: f64 = 0.0;
    let record = locomotion_step_with(
        &mut rig,
        &goal(End::E, "F3"),
        &StepOptions::default(),
        |rig, _| {
            let base = rig.world_pose(End::B);
            anchor_drift = anchor_drift
                .max(base.translation_distance(&base_before))
                .max(base.rotation_distance(&base_before));
        },
    )
    .unwrap();
    assert!(record.success);
    assert_eq!(record.mode, DockingMode::Regular);
    assert!(
        anchor_drift < 1e-12,
        "anchored base drifted by {anchor_drift}"
    );
    let tol = rig.config().docking.tolerance;
    let tip = rig.world_pose(End::E);
    let target = interface_pose(&rig, "F3");
    assert!(tip.translation_distance(&target) <= tol.translation);
    assert!(tip.rotation_distance(&target) <= tol.rotation);
    assert!(both_docked(&rig));
    assert_eq!(rig.docking().icu(End::E).interface.as_deref(), Some("F3"));
    assert!(!record.endpoint_trace.is_empty());
}

#[test]
fn goal_at_the_current_interface_is_rejected() {
    let mut rig = mockup_rig();
    let q = rig.q();
    let (record, err) =
        locomotion_step(&mut rig, &goal(End::E, "F1"), &StepOptions::default()).unwrap_err();
    assert!(matches!(err, LocomotionError::InvalidGoal(_)), "{err:?}");
    assert!(!record.success);
    assert_eq!(rig.q(), q);
    assert_eq!(rig.tick_count(), 0);
}

#[test]
fn goal_at_an_occupied_interface_is_rejected() {
    let mut rig = mockup_rig();
    let (_, err) =
        locomotion_step(&mut rig, &goal(End::E, "F2"), &StepOptions::default()).unwrap_err();
    assert!(matches!(err, LocomotionError::InvalidGoal(_)), "{err:?}");
    let (_, err) =
        locomotion_step(&mut rig, &goal(End::E, "W9"), &StepOptions::default()).unwrap_err();
    assert!(matches!(err, LocomotionError::InvalidGoal(_)), "{err:?}");
}

#[test]
fn empty_gait_leaves_the_state_unchanged() {
    let mut rig = mockup_rig();
    let before = (rig.q(), rig.end_poses(), rig.tick_count());
    let report = run_gait(&mut rig, &[], &StepOptions::default());
    assert!(report.succeeded());
    assert!(report.records.is_empty());
    assert_eq!((rig.q(), rig.end_poses(), rig.tick_count()), before);
}

#[test]
fn four_steps_along_a_strip_move_the_base_sixty_centimetres() {
    let mut rig = strip_rig();
    let start = rig.world_pose(End::B);
    let goals = [
        goal(End::E, "P2"),
        goal(End::B, "P1"),
        goal(End::E, "P3"),
        goal(End::B, "P2"),
    ];
    let options = StepOptions {
        seed: 3,
        ..StepOptions::default()
    };
    for (i, g) in goals.iter().enumerate() {
        assert!(
            both_docked(&rig),
            "step {i} must start with both ends docked"
        );
        let opts = StepOptions {
            seed: options.seed + i as u64,
            ..options
        };
        let record =
            locomotion_step(&mut rig, g, &opts).unwrap_or_else(|(_, e)| panic!("step {i}: {e}"));
        assert!(record.success);
        assert!(both_docked(&rig));
        if g.moved_end == End::B {
            // The base pose follows from the docked tip through the final
            // joint angles and must land on the target.
            let target = interface_pose(&rig, &g.target);
            let base = rig.world_pose(End::B);
            assert!(base.translation_distance(&target) < 1e-9, "step {i}");
            assert!(base.rotation_distance(&target) < 1e-9, "step {i}");
        }
    }
    let moved = start.translation - rig.world_pose(End::B).translation;
    assert!((moved.norm() - 0.60).abs() < 1e-9, "base moved {moved:?}");
}

#[test]
fn world_poses_stay_consistent_with_kinematics() {
    let mut rig = mockup_rig();
    let report = run_gait(
        &mut rig,
        &mockup::switch_in_place_gait(6.0),
        &StepOptions::default(),
    );
    assert!(report.succeeded(), "{:?}", report.error);
    let poses = rig.end_poses();
    let fk = rig.chain().tip_pose(&rig.q());
    let recomposed = poses.base.compose(&fk);
    assert!(recomposed.translation_distance(&poses.tip) < 1e-9);
    assert!(recomposed.rotation_distance(&poses.tip) < 1e-9);
    let w2 = interface_pose(&rig, "W2");
    assert!(poses.tip.translation_distance(&w2) <= rig.config().docking.tolerance.translation);
}
