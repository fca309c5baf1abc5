//! Greedy receding-horizon planner that walks towards a goal while keeping
//! the learned worst-case tip angle `μ + βσ` below a threshold.
//!
//! Each call scores a fan of candidate headings. A candidate is feasible when
//! the composite upper bound at its end point is at most `theta_max`; among
//! feasible ones the planner minimises `distance_to_goal − w · σ`. When
//! nothing is feasible it takes a short information-gathering probe towards
//! the least risky uncertain candidate, and backs off afterwards if the touch
//! tipped something past half the threshold.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::object_model::{CompositePrediction, ModelError, ObjectCentricModel, ObjectId};
use crate::sim::{self, goal_reached, Rect, SceneState, SimError, StepResult};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("invalid planner config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    /// Largest admissible predicted upper bound on any tip angle, rad.
    pub theta_max: f64,
    pub beta: f64,
    /// Length of an advance step, m.
    pub candidate_step: f64,
    pub n_candidates: usize,
    /// Exploration bonus per unit of predicted std, m/rad.
    pub explore_weight: f64,
    pub max_steps: usize,
    pub goal: Rect,
    #[serde(default = "default_ring_count")]
    pub seed_ring_count: usize,
    /// Radius of the free-space seeding ring, m.
    #[serde(default = "default_ring_radius")]
    pub seed_ring_radius: f64,
    /// Probes only target candidates whose std exceeds this, rad.
    #[serde(default = "default_probe_std_floor")]
    pub probe_std_floor: f64,
}

fn default_ring_count() -> usize {
    8
}

fn default_ring_radius() -> f64 {
    0.01
}

fn default_probe_std_floor() -> f64 {
    0.01
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        let bad = |m: &str| Err(PlanError::InvalidConfig(m.to_string()));
        if !(self.theta_max >= 0.0) {
            return bad("theta_max must be >= 0");
        }
        if !(self.beta >= 0.0) {
            return bad("beta must be >= 0");
        }
        if !(self.candidate_step > 0.0) {
            return bad("candidate_step must be > 0");
        }
        if self.n_candidates == 0 {
            return bad("n_candidates must be >= 1");
        }
        if !(self.explore_weight >= 0.0) {
            return bad("explore_weight must be >= 0");
        }
        if !self.goal.is_valid() {
            return bad("goal rectangle is inverted");
        }
        Ok(())
    }

    pub fn probe_step(&self) -> f64 {
        0.25 * self.candidate_step
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepKind {
    Advance,
    Probe,
    Retreat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    pub target: [f64; 2],
    pub kind: StepKind,
    /// Composite prediction at `target` when the decision was made.
    pub predicted: CompositePrediction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EpisodeFailure {
    NoProgress,
}

/// Planner state carried between steps: only where to back off to after a
/// probe that tipped something.
#[derive(Debug, Clone)]
pub struct Planner {
    cfg: PlannerConfig,
    retreat_to: Option<[f64; 2]>,
}

struct Candidate {
    target: [f64; 2],
    heading: [f64; 2],
    prediction: CompositePrediction,
}

impl Planner {
    pub fn new(cfg: PlannerConfig) -> Result<Self, PlanError> {
        cfg.validate()?;
        Ok(Planner { cfg, retreat_to: None })
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.cfg
    }

    fn predict_at(
        &self,
        model: &ObjectCentricModel,
        state: &SceneState,
        poses: &BTreeMap<ObjectId, crate::geometry::Pose>,
        xy: [f64; 2],
    ) -> Result<CompositePrediction, PlanError> {
        Ok(model.composite_predict_with_beta(&state.robot_at(xy), poses, self.cfg.beta)?)
    }

    /// Chooses the next target for the end effector.
    pub fn plan_step(&self, model: &ObjectCentricModel, state: &SceneState) -> Result<PlanStep, PlanError> {
        let here = state.robot_xy();
        let poses = state.object_poses();
        let cfg = &self.cfg;

        if goal_reached(state, &cfg.goal) {
            return Ok(PlanStep {
                target: here,
                kind: StepKind::Advance,
                predicted: self.predict_at(model, state, &poses, here)?,
            });
        }
        if let Some(back) = self.retreat_to {
            return Ok(PlanStep {
                target: back,
                kind: StepKind::Retreat,
                predicted: self.predict_at(model, state, &poses, back)?,
            });
        }

        let candidates = self.candidates(model, state, &poses)?;
        let feasible = candidates
            .iter()
            .filter(|c| c.prediction.ucb <= cfg.theta_max)
            .map(|c| (c, cfg.goal.distance(c.target) - cfg.explore_weight * c.prediction.std))
            .fold(None::<(&Candidate, f64)>, |best, (c, score)| match best {
                Some((_, s)) if s <= score => best,
                _ => Some((c, score)),
            });
        if let Some((c, _)) = feasible {
            return Ok(PlanStep {
                target: c.target,
                kind: StepKind::Advance,
                predicted: c.prediction,
            });
        }

        // Nothing is safe enough: touch gently where the model is least sure
        // but the bound is lowest.
        let pick = |floor: f64| {
            candidates
                .iter()
                .filter(|c| c.prediction.std > floor)
                .fold(None::<&Candidate>, |best, c| match best {
                    Some(b) if b.prediction.ucb <= c.prediction.ucb => Some(b),
                    _ => Some(c),
                })
        };
        let chosen = pick(cfg.probe_std_floor)
            .or_else(|| pick(f64::NEG_INFINITY))
            .expect("at least one candidate");
        let step = cfg.probe_step();
        let target = state
            .bounds
            .closest_point([here[0] + step * chosen.heading[0], here[1] + step * chosen.heading[1]]);
        Ok(PlanStep {
            target,
            kind: StepKind::Probe,
            predicted: self.predict_at(model, state, &poses, target)?,
        })
    }

    fn candidates(
        &self,
        model: &ObjectCentricModel,
        state: &SceneState,
        poses: &BTreeMap<ObjectId, crate::geometry::Pose>,
    ) -> Result<Vec<Candidate>, PlanError> {
        let cfg = &self.cfg;
        let here = state.robot_xy();
        let goal_point = cfg.goal.closest_point(here);
        let to_goal = [goal_point[0] - here[0], goal_point[1] - here[1]];
        let goal_dist = to_goal[0].hypot(to_goal[1]);
        let base = to_goal[1].atan2(to_goal[0]);

        let raw: Vec<([f64; 2], [f64; 2])> = (0..cfg.n_candidates)
            .map(|k| {
                let angle = base + TAU * k as f64 / cfg.n_candidates as f64;
                let heading = [angle.cos(), angle.sin()];
                let target = if k == 0 && goal_dist <= cfg.candidate_step {
                    goal_point
                } else {
                    state.bounds.closest_point([
                        here[0] + cfg.candidate_step * heading[0],
                        here[1] + cfg.candidate_step * heading[1],
                    ])
                };
                (target, heading)
            })
            .filter(|(t, _)| (t[0] - here[0]).hypot(t[1] - here[1]) > 1e-9)
            .collect();

        raw.par_iter()
            .map(|&(target, heading)| {
                Ok(Candidate {
                    target,
                    heading,
                    prediction: self.predict_at(model, state, poses, target)?,
                })
            })
            .collect()
    }

    /// Updates the retreat memory after `step` was executed.
    pub fn record(&mut self, step: &PlanStep, from: [f64; 2], result: &StepResult) {
        self.retreat_to = match step.kind {
            StepKind::Probe => {
                let observed = result.observations.values().cloned().fold(f64::NEG_INFINITY, f64::max);
                (observed > 0.5 * self.cfg.theta_max).then_some(from)
            }
            StepKind::Advance | StepKind::Retreat => None,
        };
    }
}

/// Inserts zero-tip observations on a ring around the robot's start position
/// into every object's model.
pub fn seed_prior_space(
    model: &mut ObjectCentricModel,
    state: &SceneState,
    cfg: &PlannerConfig,
) -> Result<(), PlanError> {
    let poses = state.object_poses();
    for robot in ring_poses(state, cfg.seed_ring_count, cfg.seed_ring_radius) {
        for (id, pose) in &poses {
            let x = model.relative_input(&robot, pose)?;
            model.update_relative(*id, &x, 0.0)?;
        }
    }
    Ok(())
}

/// End-effector poses evenly spaced on a circle around the current position.
pub fn ring_poses(state: &SceneState, count: usize, radius: f64) -> Vec<crate::geometry::Pose> {
    let c = state.robot_xy();
    (0..count)
        .map(|k| {
            let a = TAU * k as f64 / count as f64;
            state.robot_at([c[0] + radius * a.cos(), c[1] + radius * a.sin()])
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStep {
    pub index: usize,
    /// `None` for scripted or baseline motion.
    pub plan: Option<PlanStep>,
    pub result: StepResult,
    /// Observations held per object after this step's update.
    pub model_sizes: BTreeMap<ObjectId, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub success: bool,
    pub failure: Option<EpisodeFailure>,
    pub steps: Vec<EpisodeStep>,
    /// Model sizes after seeding, before the first step.
    pub initial_model_sizes: BTreeMap<ObjectId, usize>,
    /// Largest true tip angle reached by each object.
    pub max_true_tip: BTreeMap<ObjectId, f64>,
    pub fallen: usize,
}

impl EpisodeReport {
    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    pub fn count_kind(&self, kind: StepKind) -> usize {
        self.steps
            .iter()
            .filter(|s| s.plan.map(|p| p.kind) == Some(kind))
            .count()
    }

    /// True tip angles per step.
    pub fn tip_history(&self) -> Vec<BTreeMap<ObjectId, f64>> {
        self.steps
            .iter()
            .map(|s| s.result.new_state.objects.iter().map(|(id, o)| (*id, o.tip_angle)).collect())
            .collect()
    }

    pub fn final_state<'a>(&'a self, initial: &'a SceneState) -> &'a SceneState {
        self.steps.last().map(|s| &s.result.new_state).unwrap_or(initial)
    }

    /// Advance steps whose predicted bound exceeded `theta_max`.
    pub fn safety_violations(&self, theta_max: f64) -> Vec<usize> {
        self.steps
            .iter()
            .filter_map(|s| match s.plan {
                Some(p) if p.kind == StepKind::Advance && p.predicted.ucb > theta_max => Some(s.index),
                _ => None,
            })
            .collect()
    }

    fn finish(initial: &SceneState, steps: Vec<EpisodeStep>, sizes: BTreeMap<ObjectId, usize>, goal: &Rect) -> Self {
        let mut max_true_tip: BTreeMap<ObjectId, f64> = initial.objects.iter().map(|(id, o)| (*id, o.tip_angle)).collect();
        for s in &steps {
            for (id, o) in &s.result.new_state.objects {
                let m = max_true_tip.entry(*id).or_insert(0.0);
                *m = m.max(o.tip_angle);
            }
        }
        let last = steps.last().map(|s| &s.result.new_state).unwrap_or(initial);
        let success = goal_reached(last, goal);
        EpisodeReport {
            success,
            failure: (!success).then_some(EpisodeFailure::NoProgress),
            fallen: last.fallen_count(),
            steps,
            initial_model_sizes: sizes,
            max_true_tip,
        }
    }
}

/// Plans, moves, and learns until the goal is reached or the step budget is
/// spent. The model should already be seeded.
pub fn run_episode(
    model: &mut ObjectCentricModel,
    state: &SceneState,
    cfg: &PlannerConfig,
    rng_seed: u64,
) -> Result<EpisodeReport, PlanError> {
    let mut planner = Planner::new(cfg.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let initial_sizes = model.sizes();
    let mut current = state.clone();
    let mut steps = Vec::new();

    while !goal_reached(&current, &cfg.goal) && steps.len() < cfg.max_steps {
        let plan = planner.plan_step(model, &current)?;
        let from = current.robot_xy();
        let result = sim::step(&current, plan.target, rng.next_u64())?;
        learn_from_step(model, &result)?;
        planner.record(&plan, from, &result);
        current = result.new_state.clone();
        steps.push(EpisodeStep {
            index: steps.len(),
            plan: Some(plan),
            result,
            model_sizes: model.sizes(),
        });
    }
    Ok(EpisodeReport::finish(state, steps, initial_sizes, &cfg.goal))
}

/// Feeds each object's own observed tip angle to its model.
pub fn learn_from_step(model: &mut ObjectCentricModel, result: &StepResult) -> Result<(), PlanError> {
    let robot = result.new_state.robot;
    for (id, obj) in &result.new_state.objects {
        model.update(*id, &robot, &obj.pose(), result.observations[id])?;
    }
    Ok(())
}

/// Baseline that ignores the objects and drives straight at the goal.
pub fn run_straight_line(state: &SceneState, cfg: &PlannerConfig, rng_seed: u64) -> Result<EpisodeReport, PlanError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut current = state.clone();
    let mut steps = Vec::new();
    while !goal_reached(&current, &cfg.goal) && steps.len() < cfg.max_steps {
        let here = current.robot_xy();
        let g = cfg.goal.closest_point(here);
        let d = (g[0] - here[0]).hypot(g[1] - here[1]);
        let target = if d <= cfg.candidate_step {
            g
        } else {
            let s = cfg.candidate_step / d;
            [here[0] + (g[0] - here[0]) * s, here[1] + (g[1] - here[1]) * s]
        };
        let result = sim::step(&current, target, rng.next_u64())?;
        current = result.new_state.clone();
        steps.push(EpisodeStep {
            index: steps.len(),
            plan: None,
            result,
            model_sizes: BTreeMap::new(),
        });
    }
    Ok(EpisodeReport::finish(state, steps, BTreeMap::new(), &cfg.goal))
}
