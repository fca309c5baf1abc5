//! Quasi-static tabletop world: a disc end effector moving in the plane at a
//! fixed height among upright cylinders that tip or slide when pushed.
//!
//! Contact rule: when the end effector penetrates an object's footprint by
//! `d` along the contact normal, a fraction `κ` of the penetration goes into
//! tipping, `Δθ = asin(min(κ d / h, 1))`, and the rest, `(1 − κ) d`, into
//! translating the object along the normal. A tipped object leans away from
//! the contact, so its contact footprint is offset by the arc length `h θ`.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::Vector3;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Pose, Quaternion};
use crate::object_model::ObjectId;

/// Substeps per `max_step` of travel during contact resolution.
const SUBSTEPS_PER_MAX_STEP: f64 = 10.0;
const OVERLAP_PASSES: usize = 16;
const STEP_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("target ({0}, {1}) is outside the workspace")]
    OutOfBounds(f64, f64),
    #[error("step of {length} m exceeds the maximum of {max_step} m")]
    StepTooLarge { length: f64, max_step: f64 },
    #[error("invalid scene: {0}")]
    InvalidScene(String),
}

/// Closed axis-aligned rectangle in the table plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Rect {
    pub fn new(min: [f64; 2], max: [f64; 2]) -> Self {
        Rect { min, max }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.min[0] && p[0] <= self.max[0] && p[1] >= self.min[1] && p[1] <= self.max[1]
    }

    pub fn center(&self) -> [f64; 2] {
        [0.5 * (self.min[0] + self.max[0]), 0.5 * (self.min[1] + self.max[1])]
    }

    pub fn closest_point(&self, p: [f64; 2]) -> [f64; 2] {
        [p[0].clamp(self.min[0], self.max[0]), p[1].clamp(self.min[1], self.max[1])]
    }

    pub fn distance(&self, p: [f64; 2]) -> f64 {
        let c = self.closest_point(p);
        (p[0] - c[0]).hypot(p[1] - c[1])
    }

    pub fn is_valid(&self) -> bool {
        self.min[0] <= self.max[0] && self.min[1] <= self.max[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectParams {
    /// kg. Recorded for completeness; the contact rule does not use it.
    pub mass: f64,
    /// Centre-of-mass height h, m.
    pub com_height: f64,
    pub footprint_radius: f64,
    /// κ: share of contact displacement converted into tipping.
    pub tip_fraction: f64,
    pub fall_angle: f64,
}

impl ObjectParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let ok = (0.0..=1.0).contains(&self.tip_fraction)
            && self.footprint_radius > 0.0
            && self.com_height > 0.0
            && self.fall_angle > 0.0
            && self.fall_angle < std::f64::consts::FRAC_PI_2
            && self.mass >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(SimError::InvalidScene(format!("object parameters out of range: {self:?}")))
        }
    }

    /// Tip increment for a penetration of `depth` metres.
    pub fn tip_increment(&self, depth: f64) -> f64 {
        (self.tip_fraction * depth / self.com_height).min(1.0).asin()
    }

    /// Translation for a penetration of `depth` metres.
    pub fn push_distance(&self, depth: f64) -> f64 {
        (1.0 - self.tip_fraction) * depth
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    /// Base centre on the table.
    pub position: [f64; 3],
    /// Orientation of the upright object.
    pub base_orientation: Quaternion,
    pub params: ObjectParams,
    /// Direction of lean scaled by the tip angle; `|lean| = tip_angle`.
    pub lean: [f64; 2],
    pub tip_angle: f64,
    pub fallen: bool,
}

impl ObjectState {
    pub fn upright(position: [f64; 3], base_orientation: Quaternion, params: ObjectParams) -> Self {
        ObjectState {
            position,
            base_orientation,
            params,
            lean: [0.0, 0.0],
            tip_angle: 0.0,
            fallen: false,
        }
    }

    /// Current pose, including the tilt of a leaning object.
    pub fn pose(&self) -> Pose {
        let orientation = if self.tip_angle > 0.0 {
            let [lx, ly] = self.lean;
            // Tilting the z axis towards the lean direction u is a rotation about z × u.
            let tilt = Quaternion::from_axis_angle(Vector3::new(-ly, lx, 0.0), self.tip_angle);
            tilt.mul(&self.base_orientation)
        } else {
            self.base_orientation
        };
        Pose::new(self.position, orientation)
    }

    /// Centre of the footprint the end effector pushes against.
    fn contact_center(&self) -> [f64; 2] {
        let h = self.params.com_height;
        [self.position[0] + h * self.lean[0], self.position[1] + h * self.lean[1]]
    }

    fn set_lean(&mut self, lean: [f64; 2]) {
        self.lean = lean;
        self.tip_angle = lean[0].hypot(lean[1]);
        if self.tip_angle >= self.params.fall_angle {
            self.fallen = true;
            let s = self.params.fall_angle / self.tip_angle;
            self.lean = [lean[0] * s, lean[1] * s];
            self.tip_angle = self.params.fall_angle;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    /// Longest allowed end-effector move per step, m.
    pub max_step: f64,
    /// Per-step tip decay factor for objects out of contact.
    pub relax: f64,
    /// Standard deviation of tip-angle observation noise, rad.
    pub obs_noise_std: f64,
    /// End-effector disc radius, m.
    pub ee_radius: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            max_step: 0.02,
            relax: 0.5,
            obs_noise_std: 0.005,
            ee_radius: 0.015,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneState {
    /// End-effector pose; its height stays fixed.
    pub robot: Pose,
    pub objects: BTreeMap<ObjectId, ObjectState>,
    pub bounds: Rect,
    pub sim: SimParams,
}

impl SceneState {
    pub fn validate(&self) -> Result<(), SimError> {
        if !self.bounds.is_valid() {
            return Err(SimError::InvalidScene("workspace bounds are inverted".into()));
        }
        if !self.bounds.contains(self.robot.xy()) {
            return Err(SimError::InvalidScene("robot starts outside the workspace".into()));
        }
        let s = &self.sim;
        if !(s.max_step > 0.0 && s.ee_radius > 0.0 && (0.0..=1.0).contains(&s.relax) && s.obs_noise_std >= 0.0) {
            return Err(SimError::InvalidScene(format!("simulation parameters out of range: {s:?}")));
        }
        for obj in self.objects.values() {
            obj.params.validate()?;
        }
        Ok(())
    }

    pub fn robot_xy(&self) -> [f64; 2] {
        self.robot.xy()
    }

    pub fn object_poses(&self) -> BTreeMap<ObjectId, Pose> {
        self.objects.iter().map(|(id, o)| (*id, o.pose())).collect()
    }

    /// The robot pose moved to `(x, y)` at the current height and orientation.
    pub fn robot_at(&self, xy: [f64; 2]) -> Pose {
        Pose::new([xy[0], xy[1], self.robot.position[2]], self.robot.orientation)
    }

    /// Penetration of the end effector at `xy` into an object's footprint.
    pub fn penetration(&self, id: ObjectId, xy: [f64; 2]) -> f64 {
        let o = &self.objects[&id];
        let c = o.contact_center();
        o.params.footprint_radius + self.sim.ee_radius - (c[0] - xy[0]).hypot(c[1] - xy[1])
    }

    pub fn fallen_count(&self) -> usize {
        self.objects.values().filter(|o| o.fallen).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub new_state: SceneState,
    /// Noisy tip angle of every object.
    pub observations: BTreeMap<ObjectId, f64>,
    /// Largest true tip angle in the scene.
    pub max_tip: f64,
    /// Objects the end effector touched during the step.
    pub contacts: BTreeSet<ObjectId>,
}

/// Moves the end effector in a straight segment to `robot_target`.
pub fn step(state: &SceneState, robot_target: [f64; 2], rng_seed: u64) -> Result<StepResult, SimError> {
    if !state.bounds.contains(robot_target) || !robot_target.iter().all(|v| v.is_finite()) {
        return Err(SimError::OutOfBounds(robot_target[0], robot_target[1]));
    }
    let start = state.robot_xy();
    let delta = [robot_target[0] - start[0], robot_target[1] - start[1]];
    let length = delta[0].hypot(delta[1]);
    let max_step = state.sim.max_step;
    if length > max_step + STEP_SLACK {
        return Err(SimError::StepTooLarge { length, max_step });
    }

    let mut next = state.clone();
    let substep = max_step / SUBSTEPS_PER_MAX_STEP;
    let n_sub = ((length / substep).ceil() as usize).max(1);
    let motion_dir = if length > 0.0 {
        [delta[0] / length, delta[1] / length]
    } else {
        [1.0, 0.0]
    };
    let mut contacts = BTreeSet::new();
    let mut moved = BTreeSet::new();

    for s in 1..=n_sub {
        let t = s as f64 / n_sub as f64;
        let ee = if s == n_sub {
            robot_target
        } else {
            [start[0] + delta[0] * t, start[1] + delta[1] * t]
        };
        next.robot.position[0] = ee[0];
        next.robot.position[1] = ee[1];
        resolve_robot_contacts(&mut next, ee, motion_dir, &mut contacts);
        resolve_object_overlaps(&mut next, ee, &mut moved);
    }

    let ee = robot_target;
    let ids: Vec<ObjectId> = next.objects.keys().copied().collect();
    for id in ids {
        if contacts.contains(&id) || moved.contains(&id) {
            continue;
        }
        relax_object(&mut next, id, ee);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let noise = Normal::new(0.0, state.sim.obs_noise_std).expect("validated noise std");
    let mut observations = BTreeMap::new();
    let mut max_tip = 0.0f64;
    for (id, obj) in &next.objects {
        let eps = if state.sim.obs_noise_std > 0.0 {
            noise.sample(&mut rng)
        } else {
            0.0
        };
        observations.insert(*id, obj.tip_angle + eps);
        max_tip = max_tip.max(obj.tip_angle);
    }

    Ok(StepResult {
        new_state: next,
        observations,
        max_tip,
        contacts,
    })
}

fn resolve_robot_contacts(
    state: &mut SceneState,
    ee: [f64; 2],
    motion_dir: [f64; 2],
    contacts: &mut BTreeSet<ObjectId>,
) {
    let ee_radius = state.sim.ee_radius;
    for (id, obj) in state.objects.iter_mut() {
        if obj.fallen {
            continue;
        }
        let c = obj.contact_center();
        let diff = [c[0] - ee[0], c[1] - ee[1]];
        let dist = diff[0].hypot(diff[1]);
        let depth = obj.params.footprint_radius + ee_radius - dist;
        if depth <= 0.0 {
            continue;
        }
        let normal = if dist > 0.0 {
            [diff[0] / dist, diff[1] / dist]
        } else {
            motion_dir
        };
        contacts.insert(*id);
        let dtheta = obj.params.tip_increment(depth);
        let push = obj.params.push_distance(depth);
        obj.position[0] += push * normal[0];
        obj.position[1] += push * normal[1];
        obj.set_lean([obj.lean[0] + dtheta * normal[0], obj.lean[1] + dtheta * normal[1]]);
    }
}

/// Separates overlapping upright footprints by moving whichever object lies
/// farther from the end effector along the line between the two centres.
fn resolve_object_overlaps(state: &mut SceneState, ee: [f64; 2], moved: &mut BTreeSet<ObjectId>) {
    let ids: Vec<ObjectId> = state
        .objects
        .iter()
        .filter(|(_, o)| !o.fallen)
        .map(|(id, _)| *id)
        .collect();
    for _ in 0..OVERLAP_PASSES {
        let mut any = false;
        for (i, a) in ids.iter().enumerate() {
            for b in &ids[i + 1..] {
                let (pa, ra) = {
                    let o = &state.objects[a];
                    (o.position, o.params.footprint_radius)
                };
                let (pb, rb) = {
                    let o = &state.objects[b];
                    (o.position, o.params.footprint_radius)
                };
                let diff = [pb[0] - pa[0], pb[1] - pa[1]];
                let dist = diff[0].hypot(diff[1]);
                let overlap = ra + rb - dist;
                if overlap <= 0.0 {
                    continue;
                }
                any = true;
                let axis = if dist > 0.0 {
                    [diff[0] / dist, diff[1] / dist]
                } else {
                    [1.0, 0.0]
                };
                let da = (pa[0] - ee[0]).hypot(pa[1] - ee[1]);
                let db = (pb[0] - ee[0]).hypot(pb[1] - ee[1]);
                let (target, sign) = if db >= da { (*b, 1.0) } else { (*a, -1.0) };
                let o = state.objects.get_mut(&target).expect("id from map");
                o.position[0] += sign * overlap * axis[0];
                o.position[1] += sign * overlap * axis[1];
                moved.insert(target);
            }
        }
        if !any {
            break;
        }
    }
}

/// Decays the tip angle, stopping where the object would come to rest
/// against the end effector.
fn relax_object(state: &mut SceneState, id: ObjectId, ee: [f64; 2]) {
    let relax = state.sim.relax;
    let ee_radius = state.sim.ee_radius;
    let obj = state.objects.get_mut(&id).expect("id from map");
    if obj.fallen || obj.tip_angle == 0.0 {
        return;
    }
    let lean = obj.lean;
    let h = obj.params.com_height;
    let reach = obj.params.footprint_radius + ee_radius;
    let depth_at = |s: f64| {
        let c = [obj.position[0] + h * s * lean[0], obj.position[1] + h * s * lean[1]];
        reach - (c[0] - ee[0]).hypot(c[1] - ee[1])
    };
    let scale = if depth_at(relax) <= 0.0 || depth_at(1.0) > 0.0 {
        relax
    } else {
        let (mut lo, mut hi) = (relax, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if depth_at(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    };
    let scaled = [lean[0] * scale, lean[1] * scale];
    obj.lean = scaled;
    obj.tip_angle = scaled[0].hypot(scaled[1]);
}

/// Folds [`step`] over `waypoints`, drawing one noise seed per step.
pub fn probe_trajectory(
    state: &SceneState,
    waypoints: &[[f64; 2]],
    rng_seed: u64,
) -> Result<Vec<StepResult>, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut current = state.clone();
    let mut out = Vec::with_capacity(waypoints.len());
    for wp in waypoints {
        let result = step(&current, *wp, rng.next_u64())?;
        current = result.new_state.clone();
        out.push(result);
    }
    Ok(out)
}

/// Whether the end effector lies in the closed goal rectangle.
pub fn goal_reached(state: &SceneState, goal: &Rect) -> bool {
    goal.contains(state.robot_xy())
}

/// Straight-line waypoints from `from` through each of `via`, no leg longer
/// than `max_step`.
pub fn subdivide_path(from: [f64; 2], via: &[[f64; 2]], max_step: f64) -> Vec<[f64; 2]> {
    let mut out = Vec::new();
    let mut cur = from;
    for &p in via {
        let d = (p[0] - cur[0]).hypot(p[1] - cur[1]);
        let n = ((d / max_step).ceil() as usize).max(1);
        for k in 1..=n {
            let t = k as f64 / n as f64;
            out.push(if k == n {
                p
            } else {
                [cur[0] + (p[0] - cur[0]) * t, cur[1] + (p[1] - cur[1]) * t]
            });
        }
        cur = p;
    }
    out
}
