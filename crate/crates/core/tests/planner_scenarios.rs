use std::collections::BTreeMap;

use ocgp::geometry::{Pose, Quaternion};
use ocgp::gp::KernelParams;
use ocgp::object_model::{InputSpec, ObjectCentricModel, ObjectId};
use ocgp::planner::{self, EpisodeFailure, Planner, PlannerConfig, StepKind};
use ocgp::sim::{self, ObjectParams, ObjectState, Rect, SceneState, SimParams};

fn config(theta_max: f64) -> PlannerConfig {
    PlannerConfig {
        theta_max,
        beta: 2.0,
        candidate_step: 0.02,
        n_candidates: 16,
        explore_weight: 0.05,
        max_steps: 150,
        goal: Rect::new([0.0, 0.33], [0.6, 0.4]),
        seed_ring_count: 8,
        seed_ring_radius: 0.01,
        probe_std_floor: 0.01,
    }
}

fn object(x: f64, kappa: f64) -> ObjectState {
    ObjectState::upright(
        [x, 0.2, 0.0],
        Quaternion::IDENTITY,
        ObjectParams {
            mass: 0.3,
            com_height: 0.08,
            footprint_radius: 0.05,
            tip_fraction: kappa,
            fall_angle: 0.6,
        },
    )
}

fn scene(robot: [f64; 2], xs: &[f64], kappa: f64) -> SceneState {
    SceneState {
        robot: Pose::from_translation(robot[0], robot[1], 0.04),
        objects: xs.iter().enumerate().map(|(i, &x)| (ObjectId(i as u32), object(x, kappa))).collect(),
        bounds: Rect::new([0.0, 0.0], [0.6, 0.4]),
        sim: SimParams::default(),
    }
}

/// Five κ=1 cylinders at 0.12 m spacing: no gap wide enough for the disc.
fn wall() -> SceneState {
    scene([0.3, 0.05], &[0.06, 0.18, 0.30, 0.42, 0.54], 1.0)
}

fn seeded_model(state: &SceneState, cfg: &PlannerConfig) -> ObjectCentricModel {
    let mut m = ObjectCentricModel::new(KernelParams::new(0.01, 0.03, 2.5e-5).unwrap(), InputSpec::planar(), cfg.beta).unwrap();
    for id in state.objects.keys() {
        m.register(*id).unwrap();
    }
    planner::seed_prior_space(&mut m, state, cfg).unwrap();
    m
}

#[test]
fn empty_scene_goes_straight_in_minimal_steps() {
    let cfg = config(0.25);
    let state = scene([0.3, 0.05], &[], 1.0);
    let mut m = seeded_model(&state, &cfg);
    let report = planner::run_episode(&mut m, &state, &cfg, 1).unwrap();
    let dist: f64 = 0.33 - 0.05;
    assert!(report.success);
    assert_eq!(report.step_count(), (dist / cfg.candidate_step - 1e-9).ceil() as usize);
    assert_eq!(report.count_kind(StepKind::Advance), report.step_count());
    for s in &report.steps {
        assert!((s.result.new_state.robot.position[0] - 0.3).abs() < 1e-12);
    }
}

#[test]
fn inside_goal_the_target_is_the_current_position() {
    let cfg = config(0.25);
    let state = scene([0.3, 0.35], &[0.3], 0.0);
    let m = seeded_model(&state, &cfg);
    let step = Planner::new(cfg).unwrap().plan_step(&m, &state).unwrap();
    assert_eq!(step.kind, StepKind::Advance);
    assert_eq!(step.target, [0.3, 0.35]);
}

#[test]
fn seeding_adds_ring_points_per_object_and_is_not_idempotent() {
    let cfg = config(0.25);
    let state = wall();
    let mut m = seeded_model(&state, &cfg);
    assert!(m.sizes().values().all(|&n| n == 8));
    let start = m.composite_predict(&state.robot, &state.object_poses()).unwrap();
    assert!(start.ucb < cfg.theta_max);
    planner::seed_prior_space(&mut m, &state, &cfg).unwrap();
    assert!(m.sizes().values().all(|&n| n == 16));
}

#[test]
fn wall_with_tight_threshold_starts_with_probes() {
    let mut cfg = config(0.03);
    cfg.max_steps = 40;
    let state = wall();
    let mut m = seeded_model(&state, &cfg);
    let report = planner::run_episode(&mut m, &state, &cfg, 2).unwrap();
    let first = report.steps.first().unwrap().plan.unwrap();
    assert_eq!(first.kind, StepKind::Probe);
    assert!(report.count_kind(StepKind::Probe) > 0);
}

#[test]
fn zero_threshold_never_advances() {
    let mut cfg = config(0.0);
    cfg.max_steps = 60;
    let state = wall();
    let mut m = seeded_model(&state, &cfg);
    let report = planner::run_episode(&mut m, &state, &cfg, 3).unwrap();
    assert!(!report.success);
    assert_eq!(report.failure, Some(EpisodeFailure::NoProgress));
    assert_eq!(report.count_kind(StepKind::Advance), 0);
    assert_eq!(report.step_count(), 60);
}

#[test]
fn advance_steps_respect_the_bound_and_probes_shrink_uncertainty() {
    let mut cfg = config(0.03);
    cfg.max_steps = 120;
    let state = wall();
    let mut m = seeded_model(&state, &cfg);
    let report = planner::run_episode(&mut m, &state, &cfg, 4).unwrap();
    assert!(report.safety_violations(cfg.theta_max).is_empty());

    // Replay the learning to compare each probed configuration before and
    // after its own observation went in.
    let mut replay = seeded_model(&state, &cfg);
    let mut probes = 0;
    for s in &report.steps {
        let plan = s.plan.unwrap();
        let after_state = &s.result.new_state;
        let poses = after_state.object_poses();
        let before: BTreeMap<ObjectId, f64> = poses
            .iter()
            .map(|(id, p)| (*id, replay.predict(*id, &after_state.robot, p).unwrap().std()))
            .collect();
        planner::learn_from_step(&mut replay, &s.result).unwrap();
        if plan.kind == StepKind::Probe {
            probes += 1;
            for (id, p) in &poses {
                let now = replay.predict(*id, &after_state.robot, p).unwrap().std();
                assert!(now < before[id], "std did not shrink for {id}: {now} vs {}", before[id]);
            }
        }
    }
    assert_eq!(replay.sizes(), m.sizes());
    assert!(probes > 0);
}

#[test]
fn episodes_are_deterministic() {
    let cfg = config(0.25);
    let state = scene([0.3, 0.05], &[0.06, 0.18, 0.30, 0.42, 0.54], 0.5);
    let run = || {
        let mut m = seeded_model(&state, &cfg);
        let r = planner::run_episode(&mut m, &state, &cfg, 9).unwrap();
        serde_json::to_string(&r).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn straight_line_baseline_pushes_through() {
    let cfg = config(0.25);
    let state = scene([0.3, 0.05], &[0.30], 0.0);
    let report = planner::run_straight_line(&state, &cfg, 0).unwrap();
    assert!(report.success);
    assert!(report.steps.iter().all(|s| s.plan.is_none()));
    let moved = &report.final_state(&state).objects[&ObjectId(0)];
    assert!(moved.position[1] > 0.3);
    assert!(sim::goal_reached(report.final_state(&state), &cfg.goal));
}
