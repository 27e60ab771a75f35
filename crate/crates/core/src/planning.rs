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

//! Joint-space RRT* toward a set of inverse-kinematics goal configurations,
//! shortcut smoothing and spline time parameterization.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collision::{AttachMode, CollisionChecker, CollisionEnv};
use crate::control::{ik_solve, PoseTolerance, SolverParams};
use crate::kinematics::{JointConfig, KinematicChain, JOINT_COUNT};
use crate::pose::Pose;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanningError {
    #[error("no collision-free inverse kinematics solution for the goal")]
    NoGoalConfig,
    #[error("no path found within {iterations} iterations")]
    PlanningFailed { iterations: usize },
    #[error("start configuration is in collision")]
    StartInCollision,
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("invalid plan request: {0}")]
    InvalidRequest(String),
}

/// Tunables shared by all planning episodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerParams {
    /// Steering step, rad (joint-space L2).
    pub eta: f64,
    /// Probability of sampling a goal configuration.
    pub goal_bias: f64,
    /// Iterations granted per second of budget. The budget is converted to
    /// an iteration count so that runs are reproducible on any machine.
    pub iterations_per_second: f64,
    /// Number of inverse-kinematics goal configurations to look for.
    pub goal_samples: usize,
    /// Half-width of the sampling box per joint around the start, rad.
    pub sampling_bound: f64,
    pub shortcut_iterations: usize,
    pub self_collision: bool,
    pub ik: SolverParams,
}

impl Default for PlannerParams {
    fn default() -> Self {
        PlannerParams {
            eta: 0.3,
            goal_bias: 0.05,
            iterations_per_second: 2000.0,
            goal_samples: 16,
            sampling_bound: PI,
            shortcut_iterations: 100,
            self_collision: true,
            ik: SolverParams::precise(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlanRequest {
    pub start: JointConfig,
    /// Tip goal in the planning (base) frame.
    pub goal_pose: Pose,
    pub mode: AttachMode,
    /// Planning budget, s.
    pub budget: f64,
    pub seed: u64,
    pub pose_tolerance: PoseTolerance,
    /// Requested execution duration, s.
    pub duration: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanStats {
    pub iterations: usize,
    pub nodes: usize,
    /// Budget time at which the first solution appeared (iterations divided
    /// by the iteration rate), s.
    pub first_solution_time: Option<f64>,
    pub final_cost: f64,
    pub goal_configs: usize,
    /// `(iteration, best cost)` each time the best solution changed.
    pub best_cost_history: Vec<(usize, f64)>,
    /// Cost of the tree path before shortcutting.
    pub tree_cost: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanResult {
    pub trajectory: Trajectory,
    pub path: Vec<JointConfig>,
    /// Joint-space length of `path`, rad.
    pub cost: f64,
    pub stats: PlanStats,
    /// Wall-clock time spent, s. Not deterministic.
    pub wall_time: f64,
}

/// Sum of L2 distances between consecutive waypoints.
pub fn path_cost(path: &[JointConfig]) -> f64 {
    path.windows(2).map(|w| w[0].distance(&w[1])).sum()
}

fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

/// Chooses for every joint the 2π-equivalent angle closest to `reference`
/// that stays inside the joint limits.
pub fn nearest_equivalent(
    chain: &KinematicChain,
    q: &JointConfig,
    reference: &JointConfig,
) -> JointConfig {
    JointConfig(std::array::from_fn(|i| {
        let joint = &chain.joints()[i];
        let mut a = reference[i] + wrap_angle(q[i] - reference[i]);
        if a > joint.upper {
            a -= 2.0 * PI;
        } else if a < joint.lower {
            a += 2.0 * PI;
        }
        if a < joint.lower || a > joint.upper {
            q[i]
        } else {
            a
        }
    }))
}

/// Up to `k` distinct configurations whose tip reaches `goal_pose`.
///
/// `seeds` are tried first, then uniformly random seeds in `±π`, for at
/// most `50·k` attempts overall. Solutions are expressed nearest to the
/// first seed (or wrapped into `±π` when there is none).
pub fn ik_goal_samples(
    chain: &KinematicChain,
    goal_pose: &Pose,
    k: usize,
    seed: u64,
    seeds: &[JointConfig],
    params: &SolverParams,
) -> Vec<JointConfig> {
    let mut found: Vec<JointConfig> = Vec::new();
    if k == 0 || goal_pose.translation.norm() > chain.reach_bound() {
        return found;
    }
    let reference = seeds.first().copied();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let attempts = 50 * k;
    for attempt in 0..attempts {
        if found.len() >= k {
            break;
        }
        let start = if attempt < seeds.len() {
            seeds[attempt]
        } else {
            JointConfig(std::array::from_fn(|_| rng.random_range(-PI..PI)))
        };
        let Ok(q) = ik_solve(chain, &start, goal_pose, params) else {
            continue;
        };
        let q = match reference {
            Some(r) => nearest_equivalent(chain, &q, &r),
            None => JointConfig(q.0.map(wrap_angle)),
        };
        if !chain.within_limits(&q) {
            continue;
        }
        let tip = chain.tip_pose(&q);
        if !params.tolerance.accepts(&tip, goal_pose) {
            continue;
        }
        if found.iter().all(|f| f.max_abs_diff(&q) > 1e-2) {
            found.push(q);
        }
    }
    found
}

/// `γ·(log n / n)^{1/d}` with the RRT* constant for the sampling box.
fn rewire_radius(n: usize, eta: f64, bound: f64) -> f64 {
    let d = JOINT_COUNT as f64;
    // Volume of the unit 7-ball: 16π³/105.
    let unit_ball = 16.0 * PI.powi(3) / 105.0;
    let volume = (2.0 * bound).powi(JOINT_COUNT as i32);
    let gamma = 2.0 * (1.0 + 1.0 / d).powf(1.0 / d) * (volume / unit_ball).powf(1.0 / d);
    let n = n.max(2) as f64;
    eta.min(gamma * (n.ln() / n).powf(1.0 / d))
}

struct Tree {
    q: Vec<JointConfig>,
    parent: Vec<usize>,
    cost: Vec<f64>,
    children: Vec<Vec<usize>>,
}

impl Tree {
    fn new(root: JointConfig) -> Self {
        Tree {
            q: vec![root],
            parent: vec![usize::MAX],
            cost: vec![0.0],
            children: vec![Vec::new()],
        }
    }

    fn len(&self) -> usize {
        self.q.len()
    }

    fn push(&mut self, q: JointConfig, parent: usize, cost: f64) -> usize {
        let id = self.q.len();
        self.q.push(q);
        self.parent.push(parent);
        self.cost.push(cost);
        self.children.push(Vec::new());
        self.children[parent].push(id);
        id
    }

    fn nearest(&self, q: &JointConfig) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, n) in self.q.iter().enumerate() {
            let d = n.distance(q);
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    fn near(&self, q: &JointConfig, radius: f64) -> Vec<(usize, f64)> {
        self.q
            .iter()
            .enumerate()
            .filter_map(|(i, n)| {
                let d = n.distance(q);
                (d <= radius).then_some((i, d))
            })
            .collect()
    }

    fn reparent(&mut self, node: usize, parent: usize, cost: f64) {
        let old = self.parent[node];
        self.children[old].retain(|c| *c != node);
        self.children[parent].push(node);
        self.parent[node] = parent;
        let delta = self.cost[node] - cost;
        self.cost[node] = cost;
        let mut stack = self.children[node].clone();
        while let Some(c) = stack.pop() {
            self.cost[c] -= delta;
            stack.extend(self.children[c].iter().copied());
        }
    }

    fn path_to(&self, node: usize) -> Vec<JointConfig> {
        let mut path = vec![self.q[node]];
        let mut n = node;
        while self.parent[n] != usize::MAX {
            n = self.parent[n];
            path.push(self.q[n]);
        }
        path.reverse();
        path
    }
}

fn steer(from: &JointConfig, to: &JointConfig, eta: f64) -> JointConfig {
    let d = from.distance(to);
    if d <= eta {
        *to
    } else {
        from.lerp(to, eta / d)
    }
}

/// Connection from a tree node straight to a goal configuration.
#[derive(Clone, Copy)]
struct GoalLink {
    node: usize,
    goal: usize,
    length: f64,
}

fn best_link(tree: &Tree, links: &[GoalLink]) -> Option<(GoalLink, f64)> {
    links
        .iter()
        .map(|l| (*l, tree.cost[l.node] + l.length))
        .fold(None, |acc: Option<(GoalLink, f64)>, cur| match acc {
            Some(a) if a.1 <= cur.1 => Some(a),
            _ => Some(cur),
        })
}

/// RRT* from `request.start` to any collision-free IK solution of
/// `request.goal_pose`, followed by shortcutting and time parameterization.
///
/// `env` is given in world coordinates; `chain` is the chain whose base is
/// the planning frame.
pub fn plan_rrt_star(
    request: &PlanRequest,
    env: &CollisionEnv,
    chain: &KinematicChain,
    params: &PlannerParams,
) -> Result<PlanResult, PlanningError> {
    let started = Instant::now();
    if !(request.budget > 0.0) || !(request.duration > 0.0) {
        return Err(PlanningError::InvalidRequest(
            "budget and duration must be > 0".into(),
        ));
    }
    if !(request.pose_tolerance.translation > 0.0 && request.pose_tolerance.rotation > 0.0) {
        return Err(PlanningError::InvalidRequest(
            "tolerances must be > 0".into(),
        ));
    }
    if !request.start.is_finite() || !request.goal_pose.is_finite() {
        return Err(PlanningError::InvalidRequest("non-finite input".into()));
    }
    let checker = CollisionChecker::new(
        chain.clone(),
        env.clone(),
        request.mode,
        params.self_collision,
    );
    if checker.is_colliding(&request.start) {
        return Err(PlanningError::StartInCollision);
    }

    let mut ik = params.ik;
    ik.tolerance = request.pose_tolerance;
    let goals: Vec<JointConfig> = ik_goal_samples(
        chain,
        &request.goal_pose,
        params.goal_samples.max(1),
        request.seed,
        &[request.start],
        &ik,
    )
    .into_iter()
    .filter(|g| !checker.is_colliding(g))
    .collect();
    if goals.is_empty() {
        return Err(PlanningError::NoGoalConfig);
    }

    let budget = (request.budget * params.iterations_per_second).ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(request.seed ^ 0x5e_ed0f_7ee5);
    let mut tree = Tree::new(request.start);
    let mut links: Vec<GoalLink> = Vec::new();
    let mut history: Vec<(usize, f64)> = Vec::new();
    let mut first_solution = None;

    let try_link = |tree: &Tree, node: usize, links: &mut Vec<GoalLink>| {
        for (gi, g) in goals.iter().enumerate() {
            let length = tree.q[node].distance(g);
            if length <= params.eta && !checker.path_in_collision(&tree.q[node], g) {
                links.push(GoalLink {
                    node,
                    goal: gi,
                    length,
                });
            }
        }
    };
    // A straight connection is the optimum whenever it is free.
    for (gi, g) in goals.iter().enumerate() {
        if !checker.path_in_collision(&request.start, g) {
            links.push(GoalLink {
                node: 0,
                goal: gi,
                length: request.start.distance(g),
            });
        }
    }
    if let Some((_, c)) = best_link(&tree, &links) {
        history.push((0, c));
        first_solution = Some(0.0);
    }

    // Every joint turns continuously, so a window of ±bound around the start
    // covers each angle once and contains the goals, which are expressed
    // nearest to the start.
    let bound = params.sampling_bound;
    let limits: Vec<(f64, f64)> = chain
        .joints()
        .iter()
        .enumerate()
        .map(|(i, j)| {
            (
                j.lower.max(request.start[i] - bound),
                j.upper.min(request.start[i] + bound),
            )
        })
        .collect();
    let mut iterations = 0;
    while iterations < budget {
        iterations += 1;
        let sample = if rng.random::<f64>() < params.goal_bias {
            goals[rng.random_range(0..goals.len())]
        } else {
            JointConfig(std::array::from_fn(|i| {
                rng.random_range(limits[i].0..limits[i].1)
            }))
        };
        let nearest = tree.nearest(&sample);
        let q_new = steer(&tree.q[nearest], &sample, params.eta);
        if checker.is_colliding(&q_new) {
            continue;
        }
        let radius = rewire_radius(tree.len() + 1, params.eta, bound);
        let mut near = tree.near(&q_new, radius);
        if near.iter().all(|(i, _)| *i != nearest) {
            near.push((nearest, tree.q[nearest].distance(&q_new)));
        }
        near.sort_by(|a, b| {
            (tree.cost[a.0] + a.1)
                .total_cmp(&(tree.cost[b.0] + b.1))
                .then(a.0.cmp(&b.0))
        });
        let mut parent = None;
        let mut free = vec![None; near.len()];
        for (k, (i, d)) in near.iter().enumerate() {
            let ok = !checker.path_in_collision(&tree.q[*i], &q_new);
            free[k] = Some(ok);
            if ok {
                parent = Some((*i, tree.cost[*i] + d));
                break;
            }
        }
        let Some((p, cost)) = parent else {
            continue;
        };
        let id = tree.push(q_new, p, cost);
        for (k, (i, d)) in near.iter().enumerate() {
            if *i == p || tree.cost[id] + d >= tree.cost[*i] {
                continue;
            }
            let ok = match free[k] {
                Some(v) => v,
                None => !checker.path_in_collision(&q_new, &tree.q[*i]),
            };
            if ok && !is_ancestor(&tree, *i, id) {
                let c = tree.cost[id] + d;
                tree.reparent(*i, id, c);
            }
        }
        try_link(&tree, id, &mut links);
        if let Some((_, c)) = best_link(&tree, &links) {
            if history.last().is_none_or(|(_, last)| *last != c) {
                history.push((iterations, c));
            }
            if first_solution.is_none() {
                first_solution = Some(iterations as f64 / params.iterations_per_second);
            }
        }
    }

    let Some((link, tree_cost)) = best_link(&tree, &links) else {
        return Err(PlanningError::PlanningFailed { iterations });
    };
    let mut path = tree.path_to(link.node);
    path.push(goals[link.goal]);
    path.dedup_by(|a, b| a == b);

    let path = shortcut(&path, &checker, params.shortcut_iterations, request.seed);
    let trajectory = collision_free_trajectory(&path, request.duration, chain, &checker)?;
    let cost = path_cost(&path);
    Ok(PlanResult {
        stats: PlanStats {
            iterations,
            nodes: tree.len(),
            first_solution_time: first_solution,
            final_cost: cost,
            goal_configs: goals.len(),
            best_cost_history: history,
            tree_cost,
        },
        trajectory,
        path,
        cost,
        wall_time: started.elapsed().as_secs_f64(),
    })
}

fn is_ancestor(tree: &Tree, candidate: usize, mut node: usize) -> bool {
    while node != usize::MAX {
        if node == candidate {
            return true;
        }
        node = tree.parent[node];
    }
    false
}

/// Random shortcutting between waypoints; never increases cost and keeps
/// every edge collision-free.
pub fn shortcut(
    path: &[JointConfig],
    checker: &CollisionChecker,
    iterations: usize,
    seed: u64,
) -> Vec<JointConfig> {
    let mut path = path.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x5107));
    for _ in 0..iterations {
        if path.len() < 3 {
            break;
        }
        let i = rng.random_range(0..path.len() - 2);
        let j = rng.random_range(i + 2..path.len());
        let direct = path[i].distance(&path[j]);
        let current = path_cost(&path[i..=j]);
        if direct < current && !checker.path_in_collision(&path[i], &path[j]) {
            path.drain(i + 1..j);
        }
    }
    path
}

/// Time parameterization that is verified against `checker` at 100 Hz.
///
/// Tries the smooth spline through the path, then through progressively
/// densified copies of it, and finally falls back to stopping at every
/// waypoint, which follows the collision-checked straight edges exactly.
fn collision_free_trajectory(
    path: &[JointConfig],
    duration: f64,
    chain: &KinematicChain,
    checker: &CollisionChecker,
) -> Result<Trajectory, PlanningError> {
    let limits = chain.velocity_limits();
    let mut dense = path.to_vec();
    for _ in 0..3 {
        let mut traj = time_parameterize(&dense, duration, &limits)?;
        traj.path = path.to_vec();
        if trajectory_is_free(&traj, checker) {
            return Ok(traj);
        }
        dense = densify(&dense);
    }
    let mut traj = time_parameterize_stop_and_go(path, duration, &limits)?;
    traj.path = path.to_vec();
    Ok(traj)
}

fn densify(path: &[JointConfig]) -> Vec<JointConfig> {
    let mut out = Vec::with_capacity(path.len() * 2);
    for w in path.windows(2) {
        out.push(w[0]);
        out.push(w[0].lerp(&w[1], 0.5));
    }
    out.extend(path.last().copied());
    out
}

/// Whether every 100 Hz sample of `traj` is collision-free.
pub fn trajectory_is_free(traj: &Trajectory, checker: &CollisionChecker) -> bool {
    let steps = (traj.duration / 0.01).ceil() as usize;
    (0..=steps).all(|k| !checker.is_colliding(&traj.sample(k as f64 * 0.01)))
}

/// Per-joint piecewise cubic Hermite trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Effective duration, s (after any stretching for velocity limits).
    pub duration: f64,
    /// Duration that was asked for, s.
    pub requested_duration: f64,
    /// Knot times, starting at 0 and ending at `duration`.
    pub times: Vec<f64>,
    pub positions: Vec<JointConfig>,
    /// Joint velocities at the knots, rad/s.
    pub velocities: Vec<JointConfig>,
    /// Waypoints the trajectory was built from.
    pub path: Vec<JointConfig>,
}

impl Trajectory {
    /// Trajectory that holds `q` for `duration`.
    pub fn constant(q: JointConfig, duration: f64) -> Trajectory {
        Trajectory {
            duration,
            requested_duration: duration,
            times: vec![0.0, duration],
            positions: vec![q, q],
            velocities: vec![JointConfig::zeros(); 2],
            path: vec![q],
        }
    }

    pub fn start(&self) -> JointConfig {
        self.positions[0]
    }

    pub fn end(&self) -> JointConfig {
        *self.positions.last().expect("trajectory has knots")
    }

    fn segment(&self, t: f64) -> usize {
        let idx = self.times.partition_point(|k| *k <= t);
        idx.saturating_sub(1).min(self.times.len() - 2)
    }

    /// Position at `t`, clamped to `[0, duration]`.
    pub fn sample(&self, t: f64) -> JointConfig {
        if !(t > 0.0) {
            return self.start();
        }
        if t >= self.duration {
            return self.end();
        }
        let k = self.segment(t);
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let (p0, p1) = (&self.positions[k], &self.positions[k + 1]);
        let (v0, v1) = (&self.velocities[k], &self.velocities[k + 1]);
        let s2 = s * s;
        let s3 = s2 * s;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        JointConfig(std::array::from_fn(|j| {
            p0[j] + h01 * (p1[j] - p0[j]) + h10 * h * v0[j] + h11 * h * v1[j]
        }))
    }

    /// Velocity at `t`; zero outside `(0, duration)`.
    pub fn velocity(&self, t: f64) -> JointConfig {
        if !(t > 0.0) || t >= self.duration {
            return JointConfig::zeros();
        }
        let k = self.segment(t);
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let (p0, p1) = (&self.positions[k], &self.positions[k + 1]);
        let (v0, v1) = (&self.velocities[k], &self.velocities[k + 1]);
        let s2 = s * s;
        JointConfig(std::array::from_fn(|j| {
            let dp = (6.0 * s2 - 6.0 * s) * (p0[j] - p1[j]) / h;
            dp + (3.0 * s2 - 4.0 * s + 1.0) * v0[j] + (3.0 * s2 - 2.0 * s) * v1[j]
        }))
    }

    /// Largest absolute velocity of each joint over the whole trajectory.
    pub fn peak_velocities(&self) -> [f64; JOINT_COUNT] {
        let mut peak = [0.0f64; JOINT_COUNT];
        for k in 0..self.times.len() - 1 {
            let h = self.times[k + 1] - self.times[k];
            if h <= 0.0 {
                continue;
            }
            for (j, pj) in peak.iter_mut().enumerate() {
                let v = segment_peak(
                    self.positions[k][j],
                    self.positions[k + 1][j],
                    self.velocities[k][j],
                    self.velocities[k + 1][j],
                    h,
                );
                *pj = pj.max(v);
            }
        }
        peak
    }

    fn stretch(&mut self, factor: f64) {
        for t in &mut self.times {
            *t *= factor;
        }
        for v in &mut self.velocities {
            *v = JointConfig(v.0.map(|x| x / factor));
        }
        self.duration = *self.times.last().expect("trajectory has knots");
    }
}

/// Max |derivative| of one Hermite segment. The derivative is quadratic in
/// the normalized time, so the extremum is at an end or at its vertex.
fn segment_peak(p0: f64, p1: f64, v0: f64, v1: f64, h: f64) -> f64 {
    let dp = (p1 - p0) / h;
    // d/dt = a s² + b s + c
    let a = -6.0 * dp + 3.0 * v0 + 3.0 * v1;
    let b = 6.0 * dp - 4.0 * v0 - 2.0 * v1;
    let c = v0;
    let mut peak = v0.abs().max(v1.abs());
    if a != 0.0 {
        let s = -b / (2.0 * a);
        if s > 0.0 && s < 1.0 {
            peak = peak.max((a * s * s + b * s + c).abs());
        }
    }
    peak
}

fn validate_path(path: &[JointConfig], duration: f64) -> Result<(), PlanningError> {
    if path.is_empty() {
        return Err(PlanningError::InvalidPath("path is empty".into()));
    }
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(PlanningError::InvalidPath("duration must be > 0".into()));
    }
    if path.iter().any(|q| !q.is_finite()) {
        return Err(PlanningError::InvalidPath("non-finite waypoint".into()));
    }
    Ok(())
}

/// Knot times proportional to joint-space chord length; `None` if the path
/// does not move.
fn chord_times(path: &[JointConfig], duration: f64) -> Option<Vec<f64>> {
    let total = path_cost(path);
    if total == 0.0 {
        return None;
    }
    let mut times = Vec::with_capacity(path.len());
    let mut acc = 0.0;
    times.push(0.0);
    for w in path.windows(2) {
        acc += w[0].distance(&w[1]);
        times.push(duration * acc / total);
    }
    *times.last_mut().expect("non-empty") = duration;
    Some(times)
}

fn without_repeats(path: &[JointConfig]) -> Vec<JointConfig> {
    let mut out = path.to_vec();
    out.dedup_by(|a, b| a == b);
    out
}

fn stretch_to_limits(mut traj: Trajectory, velocity_limits: &[f64; JOINT_COUNT]) -> Trajectory {
    let peak = traj.peak_velocities();
    let factor = (0..JOINT_COUNT)
        .map(|j| peak[j] / velocity_limits[j])
        .fold(1.0, f64::max);
    if factor > 1.0 {
        traj.stretch(factor);
    }
    traj
}

/// Clamped cubic spline through `path` (zero end velocities, chord-length
/// knots), stretched uniformly if a joint would exceed its velocity limit.
pub fn time_parameterize(
    path: &[JointConfig],
    duration: f64,
    velocity_limits: &[f64; JOINT_COUNT],
) -> Result<Trajectory, PlanningError> {
    validate_path(path, duration)?;
    let pts = without_repeats(path);
    let Some(times) = chord_times(&pts, duration) else {
        let mut traj = Trajectory::constant(pts[0], duration);
        traj.path = path.to_vec();
        return Ok(traj);
    };
    let velocities = clamped_spline_velocities(&pts, &times);
    let traj = Trajectory {
        duration,
        requested_duration: duration,
        times,
        positions: pts,
        velocities,
        path: path.to_vec(),
    };
    Ok(stretch_to_limits(traj, velocity_limits))
}

/// Like [`time_parameterize`] but comes to rest at every waypoint, so the
/// motion stays exactly on the straight edges.
pub fn time_parameterize_stop_and_go(
    path: &[JointConfig],
    duration: f64,
    velocity_limits: &[f64; JOINT_COUNT],
) -> Result<Trajectory, PlanningError> {
    validate_path(path, duration)?;
    let pts = without_repeats(path);
    let Some(times) = chord_times(&pts, duration) else {
        let mut traj = Trajectory::constant(pts[0], duration);
        traj.path = path.to_vec();
        return Ok(traj);
    };
    let n = pts.len();
    let traj = Trajectory {
        duration,
        requested_duration: duration,
        times,
        positions: pts,
        velocities: vec![JointConfig::zeros(); n],
        path: path.to_vec(),
    };
    Ok(stretch_to_limits(traj, velocity_limits))
}

/// Knot velocities of the C² cubic spline with zero end slopes.
fn clamped_spline_velocities(pts: &[JointConfig], times: &[f64]) -> Vec<JointConfig> {
    let n = pts.len();
    let mut out = vec![JointConfig::zeros(); n];
    if n <= 2 {
        return out;
    }
    let h: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    // Interior rows: h_k v_{k-1} + 2(h_{k-1}+h_k) v_k + h_{k-1} v_{k+1}
    //   = 3[h_k/h_{k-1} (p_k − p_{k-1}) + h_{k-1}/h_k (p_{k+1} − p_k)]
    let m = n - 2;
    for j in 0..JOINT_COUNT {
        let mut lower = vec![0.0; m];
        let mut diag = vec![0.0; m];
        let mut upper = vec![0.0; m];
        let mut rhs = vec![0.0; m];
        for r in 0..m {
            let k = r + 1;
            lower[r] = h[k];
            diag[r] = 2.0 * (h[k - 1] + h[k]);
            upper[r] = h[k - 1];
            rhs[r] = 3.0
                * (h[k] / h[k - 1] * (pts[k][j] - pts[k - 1][j])
                    + h[k - 1] / h[k] * (pts[k + 1][j] - pts[k][j]));
        }
        let v = solve_tridiagonal(&lower, &diag, &upper, &rhs);
        for r in 0..m {
            out[r + 1][j] = v[r];
        }
    }
    out
}

/// Thomas algorithm; `lower[0]` and `upper[m-1]` are ignored.
fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let m = diag.len();
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..m {
        let denom = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / denom;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; m];
    x[m - 1] = d[m - 1];
    for i in (0..m - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}
