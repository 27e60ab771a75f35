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

//! Primitive collision geometry and configuration checks.
//!
//! The arm is a chain of capsules; the satellite is a set of spheres,
//! capsules and boxes. Planning always happens in the arm's base frame. When
//! the arm hangs from its tip ([`AttachMode::EnvAttachedToTip`]) the
//! environment is carried along with the tip, so a shape with world pose
//! `T_WO` sits at `FK(q) ∘ T_EW ∘ T_WO` in the planning frame.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::kinematics::{End, JointConfig, KinematicChain, SEGMENT_COUNT};
use crate::pose::Pose;

/// Default clearance below which two bodies count as colliding, m.
pub const DEFAULT_SAFETY_MARGIN: f64 = 0.005;
/// Maximum per-joint step between samples when checking a joint-space segment, rad.
pub const DEFAULT_PATH_RESOLUTION: f64 = 0.01;
/// Radius around a docking interface inside which the docking end is not checked, m.
pub const DEFAULT_DOCKING_EXEMPTION_RADIUS: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Capsule {
    pub p0: Vector3<f64>,
    pub p1: Vector3<f64>,
    pub radius: f64,
}

impl Capsule {
    pub fn transformed(&self, pose: &Pose) -> Capsule {
        Capsule {
            p0: pose.transform_point(&self.p0),
            p1: pose.transform_point(&self.p1),
            radius: self.radius,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CollisionShape {
    Sphere {
        center: Vector3<f64>,
        radius: f64,
    },
    Capsule(Capsule),
    Box {
        pose: Pose,
        half_extents: Vector3<f64>,
    },
}

impl CollisionShape {
    pub fn is_valid(&self) -> bool {
        match self {
            CollisionShape::Sphere { radius, .. } => *radius > 0.0,
            CollisionShape::Capsule(c) => c.radius > 0.0,
            CollisionShape::Box { half_extents, .. } => half_extents.iter().all(|h| *h > 0.0),
        }
    }

    pub fn transformed(&self, pose: &Pose) -> CollisionShape {
        match self {
            CollisionShape::Sphere { center, radius } => CollisionShape::Sphere {
                center: pose.transform_point(center),
                radius: *radius,
            },
            CollisionShape::Capsule(c) => CollisionShape::Capsule(c.transformed(pose)),
            CollisionShape::Box {
                pose: p,
                half_extents,
            } => CollisionShape::Box {
                pose: pose.compose(p),
                half_extents: *half_extents,
            },
        }
    }

    /// Center and radius of a sphere enclosing the shape.
    pub fn bounding_sphere(&self) -> (Vector3<f64>, f64) {
        match self {
            CollisionShape::Sphere { center, radius } => (*center, *radius),
            CollisionShape::Capsule(c) => {
                ((c.p0 + c.p1) * 0.5, (c.p1 - c.p0).norm() * 0.5 + c.radius)
            }
            CollisionShape::Box { pose, half_extents } => (pose.translation, half_extents.norm()),
        }
    }
}

/// Closest points between segments `[p1, q1]` and `[p2, q2]`; returns the
/// parameters along each segment and the two points.
pub fn closest_points_segments(
    p1: &Vector3<f64>,
    q1: &Vector3<f64>,
    p2: &Vector3<f64>,
    q2: &Vector3<f64>,
) -> (f64, f64, Vector3<f64>, Vector3<f64>) {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.dot(&d1);
    let e = d2.dot(&d2);
    let f = d2.dot(&r);
    let eps = 1e-18;
    let (s, t);
    if a <= eps && e <= eps {
        return (0.0, 0.0, *p1, *p2);
    }
    if a <= eps {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= eps {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > eps * a * e {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    (s, t, p1 + d1 * s, p2 + d2 * t)
}

pub fn point_segment_distance(p: &Vector3<f64>, a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(&ab);
    let t = if len2 > 0.0 {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (a + ab * t - p).norm()
}

/// Signed distance from a point to an oriented box (negative inside).
pub fn box_signed_distance(pose: &Pose, half: &Vector3<f64>, p: &Vector3<f64>) -> f64 {
    let local = pose
        .rotation
        .inverse_transform_vector(&(p - pose.translation));
    let q = local.abs() - half;
    let outside = q.sup(&Vector3::zeros()).norm();
    let inside = q.x.max(q.y).max(q.z).min(0.0);
    outside + inside
}

/// Lower bound on the signed distance from segment `[a, b]` to a box.
///
/// The signed distance of a convex set is convex along the segment, so a
/// golden-section search brackets the minimizer; the result is reduced by
/// the remaining bracket width times the segment length, which bounds how
/// far the true minimum can lie below the best sample.
pub fn segment_box_distance(
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    pose: &Pose,
    half: &Vector3<f64>,
) -> f64 {
    let len = (b - a).norm();
    let f = |t: f64| box_signed_distance(pose, half, &(a + (b - a) * t));
    if len < 1e-15 {
        return f(0.0);
    }
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (hi - lo) * len > 1e-11 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    let best = f1.min(f2).min(f(0.0)).min(f(1.0));
    best - (hi - lo) * len
}

/// Separating-axis lower bound on the signed distance between two boxes.
pub fn box_box_distance(pa: &Pose, ha: &Vector3<f64>, pb: &Pose, hb: &Vector3<f64>) -> f64 {
    let ra = pa.rotation.to_rotation_matrix();
    let rb = pb.rotation.to_rotation_matrix();
    let axes_a: [Vector3<f64>; 3] = std::array::from_fn(|i| ra.matrix().column(i).into_owned());
    let axes_b: [Vector3<f64>; 3] = std::array::from_fn(|i| rb.matrix().column(i).into_owned());
    let d = pb.translation - pa.translation;
    let gap = |axis: &Vector3<f64>| {
        let proj_a: f64 = (0..3).map(|i| ha[i] * axes_a[i].dot(axis).abs()).sum();
        let proj_b: f64 = (0..3).map(|i| hb[i] * axes_b[i].dot(axis).abs()).sum();
        d.dot(axis).abs() - proj_a - proj_b
    };
    let mut best = f64::NEG_INFINITY;
    for axis in axes_a.iter().chain(axes_b.iter()) {
        best = best.max(gap(axis));
    }
    for a in &axes_a {
        for b in &axes_b {
            let c = a.cross(b);
            let n = c.norm();
            if n > 1e-9 {
                best = best.max(gap(&(c / n)));
            }
        }
    }
    best
}

/// Signed distance between two shapes (negative means penetration).
///
/// Exact for sphere/sphere, sphere/capsule, capsule/capsule and sphere/box.
/// Capsule/box and box/box return a lower bound on the true distance.
pub fn shape_distance(a: &CollisionShape, b: &CollisionShape) -> f64 {
    use CollisionShape::*;
    match (a, b) {
        (
            Sphere {
                center: c1,
                radius: r1,
            },
            Sphere {
                center: c2,
                radius: r2,
            },
        ) => (c1 - c2).norm() - r1 - r2,
        (Sphere { center, radius }, Capsule(c)) | (Capsule(c), Sphere { center, radius }) => {
            point_segment_distance(center, &c.p0, &c.p1) - radius - c.radius
        }
        (Capsule(c1), Capsule(c2)) => {
            let (_, _, x1, x2) = closest_points_segments(&c1.p0, &c1.p1, &c2.p0, &c2.p1);
            (x1 - x2).norm() - c1.radius - c2.radius
        }
        (Sphere { center, radius }, Box { pose, half_extents })
        | (Box { pose, half_extents }, Sphere { center, radius }) => {
            box_signed_distance(pose, half_extents, center) - radius
        }
        (Capsule(c), Box { pose, half_extents }) | (Box { pose, half_extents }, Capsule(c)) => {
            segment_box_distance(&c.p0, &c.p1, pose, half_extents) - c.radius
        }
        (
            Box {
                pose: pa,
                half_extents: ha,
            },
            Box {
                pose: pb,
                half_extents: hb,
            },
        ) => box_box_distance(pa, ha, pb, hb),
    }
}

fn capsule_distance_to(capsule: &Capsule, shape: &CollisionShape) -> f64 {
    shape_distance(&CollisionShape::Capsule(*capsule), shape)
}

/// How the environment relates to the planning frame (the chain's base frame).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AttachMode {
    /// The base is docked; the environment is fixed relative to it.
    /// `base_world` is the docked base pose `T_WB`.
    EnvFixedToBase { base_world: Pose },
    /// The tip is docked; the environment moves with the tip. `tip_from_world`
    /// is `T_EW`, frozen when planning starts.
    EnvAttachedToTip { tip_from_world: Pose },
}

impl AttachMode {
    /// Transform from world into the planning frame for a given tip pose.
    pub fn planning_from_world(&self, tip: &Pose) -> Pose {
        match self {
            AttachMode::EnvFixedToBase { base_world } => base_world.inverse(),
            AttachMode::EnvAttachedToTip { tip_from_world } => tip.compose(tip_from_world),
        }
    }
}

/// Skip checks between a docking end and the environment while that end's
/// frame is within `radius` of `point` (world frame).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Exemption {
    pub end: End,
    pub point: Vector3<f64>,
    pub radius: f64,
}

/// Static obstacles for one planning episode, in world coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct CollisionEnv {
    pub shapes: Vec<CollisionShape>,
    pub exemptions: Vec<Exemption>,
    pub safety_margin: f64,
}

impl CollisionEnv {
    pub fn new(shapes: Vec<CollisionShape>) -> Self {
        CollisionEnv {
            shapes,
            exemptions: Vec::new(),
            safety_margin: DEFAULT_SAFETY_MARGIN,
        }
    }

    pub fn empty() -> Self {
        CollisionEnv::new(Vec::new())
    }

    pub fn with_margin(mut self, margin: f64) -> Self {
        self.safety_margin = margin;
        self
    }

    pub fn with_exemption(mut self, exemption: Exemption) -> Self {
        self.exemptions.push(exemption);
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Witness {
    /// Segment index of the checked chain and index into the environment list.
    Environment {
        segment: usize,
        shape: usize,
    },
    SelfCollision {
        a: usize,
        b: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CollisionReport {
    pub colliding: bool,
    /// Smallest distance among checked pairs; `+∞` when nothing was checked.
    pub min_clearance: f64,
    /// Closest pair.
    pub witness: Option<Witness>,
    /// Name of the segment in the closest pair, when one exists.
    pub segment_name: Option<String>,
}

/// Collision queries for one chain, environment and attachment.
#[derive(Clone, Debug)]
pub struct CollisionChecker {
    chain: KinematicChain,
    env: CollisionEnv,
    mode: AttachMode,
    self_collision: bool,
    /// Environment in the planning frame when it does not depend on `q`.
    fixed: Option<Vec<CollisionShape>>,
    resolution: f64,
}

struct Placed {
    capsules: [Capsule; SEGMENT_COUNT],
    shapes: Vec<(CollisionShape, Vector3<f64>, f64)>,
    exempt: [bool; 2],
}

impl CollisionChecker {
    pub fn new(
        chain: KinematicChain,
        env: CollisionEnv,
        mode: AttachMode,
        self_collision: bool,
    ) -> Self {
        let fixed = match mode {
            AttachMode::EnvFixedToBase { base_world } => {
                let inv = base_world.inverse();
                Some(env.shapes.iter().map(|s| s.transformed(&inv)).collect())
            }
            AttachMode::EnvAttachedToTip { .. } => None,
        };
        CollisionChecker {
            chain,
            env,
            mode,
            self_collision,
            fixed,
            resolution: DEFAULT_PATH_RESOLUTION,
        }
    }

    pub fn with_resolution(mut self, resolution: f64) -> Self {
        self.resolution = resolution;
        self
    }

    pub fn chain(&self) -> &KinematicChain {
        &self.chain
    }

    pub fn env(&self) -> &CollisionEnv {
        &self.env
    }

    pub fn mode(&self) -> &AttachMode {
        &self.mode
    }

    fn place(&self, q: &JointConfig) -> Placed {
        let fk = self.chain.forward_kinematics(q);
        let capsules: [Capsule; SEGMENT_COUNT] = std::array::from_fn(|i| {
            self.chain.segments()[i]
                .collision
                .transformed(&fk.segment_poses[i])
        });
        let to_plan = self.mode.planning_from_world(&fk.tip);
        let shapes = match &self.fixed {
            Some(fixed) => fixed
                .iter()
                .map(|s| {
                    let (c, r) = s.bounding_sphere();
                    (*s, c, r)
                })
                .collect(),
            None => self
                .env
                .shapes
                .iter()
                .map(|s| {
                    let t = s.transformed(&to_plan);
                    let (c, r) = t.bounding_sphere();
                    (t, c, r)
                })
                .collect(),
        };
        let mut exempt = [false; 2];
        for ex in &self.env.exemptions {
            let point = to_plan.transform_point(&ex.point);
            let end_origin = if ex.end == self.chain.base_end() {
                Vector3::zeros()
            } else {
                fk.tip.translation
            };
            if (point - end_origin).norm() <= ex.radius {
                exempt[ex.end.index()] = true;
            }
        }
        Placed {
            capsules,
            shapes,
            exempt,
        }
    }

    fn segment_exempt(&self, segment: usize, exempt: &[bool; 2]) -> bool {
        let base = self.chain.base_end();
        (segment == 0 && exempt[base.index()])
            || (segment == SEGMENT_COUNT - 1 && exempt[base.other().index()])
    }

    /// Full report, computing the minimum clearance over all checked pairs.
    pub fn check(&self, q: &JointConfig) -> CollisionReport {
        self.evaluate(q, false)
    }

    /// Fast boolean query; stops at the first pair under the margin.
    pub fn is_colliding(&self, q: &JointConfig) -> bool {
        self.evaluate(q, true).colliding
    }

    fn evaluate(&self, q: &JointConfig, early_exit: bool) -> CollisionReport {
        let placed = self.place(q);
        let margin = self.env.safety_margin;
        let mut best = f64::INFINITY;
        let mut witness = None;
        for (i, cap) in placed.capsules.iter().enumerate() {
            if self.segment_exempt(i, &placed.exempt) {
                continue;
            }
            let cap_center = (cap.p0 + cap.p1) * 0.5;
            let cap_radius = (cap.p1 - cap.p0).norm() * 0.5 + cap.radius;
            for (k, (shape, center, radius)) in placed.shapes.iter().enumerate() {
                let bound = (cap_center - center).norm() - cap_radius - radius;
                let threshold = if early_exit { margin } else { best };
                if bound >= threshold {
                    continue;
                }
                let d = capsule_distance_to(cap, shape);
                if d < best {
                    best = d;
                    witness = Some(Witness::Environment {
                        segment: i,
                        shape: k,
                    });
                    if early_exit && d < margin {
                        return self.report(best, witness);
                    }
                }
            }
        }
        if self.self_collision {
            for i in 0..SEGMENT_COUNT {
                for j in (i + 2)..SEGMENT_COUNT {
                    let a = &placed.capsules[i];
                    let b = &placed.capsules[j];
                    let (_, _, x1, x2) = closest_points_segments(&a.p0, &a.p1, &b.p0, &b.p1);
                    let d = (x1 - x2).norm() - a.radius - b.radius;
                    if d < best {
                        best = d;
                        witness = Some(Witness::SelfCollision { a: i, b: j });
                        if early_exit && d < margin {
                            return self.report(best, witness);
                        }
                    }
                }
            }
        }
        self.report(best, witness)
    }

    fn report(&self, best: f64, witness: Option<Witness>) -> CollisionReport {
        let segment_name = match &witness {
            Some(Witness::Environment { segment, .. }) => {
                Some(self.chain.segments()[*segment].name.clone())
            }
            Some(Witness::SelfCollision { a, .. }) => Some(self.chain.segments()[*a].name.clone()),
            None => None,
        };
        CollisionReport {
            colliding: best < self.env.safety_margin,
            min_clearance: best,
            witness,
            segment_name,
        }
    }

    /// Whether the straight joint-space segment hits anything.
    ///
    /// Samples a dyadic subdivision fine enough that no joint moves more than
    /// the resolution between samples; halving the resolution therefore only
    /// ever adds samples.
    pub fn path_in_collision(&self, from: &JointConfig, to: &JointConfig) -> bool {
        let span = from.max_abs_diff(to);
        let mut n: u64 = 1;
        while span / (n as f64) > self.resolution {
            n *= 2;
        }
        if self.is_colliding(from) || self.is_colliding(to) {
            return true;
        }
        // Coarse-to-fine order finds collisions in the middle early.
        let mut step = n;
        while step > 1 {
            let half = step / 2;
            let mut k = half;
            while k < n {
                let t = k as f64 / n as f64;
                if self.is_colliding(&from.lerp(to, t)) {
                    return true;
                }
                k += step;
            }
            step = half;
        }
        false
    }
}

/// One-shot configuration check.
pub fn config_in_collision(
    chain: &KinematicChain,
    q: &JointConfig,
    env: &CollisionEnv,
    mode: &AttachMode,
    self_collision: bool,
) -> CollisionReport {
    CollisionChecker::new(chain.clone(), env.clone(), *mode, self_collision).check(q)
}

/// One-shot joint-space segment check at the default resolution.
pub fn path_in_collision(
    chain: &KinematicChain,
    from: &JointConfig,
    to: &JointConfig,
    env: &CollisionEnv,
    mode: &AttachMode,
) -> bool {
    CollisionChecker::new(chain.clone(), env.clone(), *mode, true).path_in_collision(from, to)
}
