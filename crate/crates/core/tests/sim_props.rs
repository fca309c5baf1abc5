use proptest::prelude::*;

use ocgp::geometry::{Pose, Quaternion};
use ocgp::object_model::ObjectId;
use ocgp::sim::{self, ObjectParams, ObjectState, Rect, SceneState, SimError, SimParams};

fn scene(robot: [f64; 2], objects: &[([f64; 2], f64, f64)], noise: f64) -> SceneState {
    SceneState {
        robot: Pose::from_translation(robot[0], robot[1], 0.04),
        objects: objects
            .iter()
            .enumerate()
            .map(|(i, &(p, kappa, h))| {
                let params = ObjectParams {
                    mass: 0.3,
                    com_height: h,
                    footprint_radius: 0.04,
                    tip_fraction: kappa,
                    fall_angle: 0.6,
                };
                (ObjectId(i as u32), ObjectState::upright([p[0], p[1], 0.0], Quaternion::IDENTITY, params))
            })
            .collect(),
        bounds: Rect::new([0.0, 0.0], [1.0, 1.0]),
        sim: SimParams {
            obs_noise_std: noise,
            ..SimParams::default()
        },
    }
}

fn walk(state: &SceneState, headings: &[f64], seed: u64) -> Vec<sim::StepResult> {
    let mut cur = state.clone();
    let mut out = Vec::new();
    for (k, a) in headings.iter().enumerate() {
        let here = cur.robot_xy();
        let target = cur.bounds.closest_point([here[0] + 0.02 * a.cos(), here[1] + 0.02 * a.sin()]);
        let r = sim::step(&cur, target, seed.wrapping_add(k as u64)).unwrap();
        cur = r.new_state.clone();
        out.push(r);
    }
    out
}

fn cluster() -> SceneState {
    scene(
        [0.5, 0.3],
        &[([0.5, 0.4], 1.0, 0.08), ([0.45, 0.5], 0.0, 0.05), ([0.58, 0.47], 0.4, 0.1)],
        0.005,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn per_step_changes_are_bounded(headings in prop::collection::vec(0.5f64..2.6, 1..25), seed in any::<u64>()) {
        let start = cluster();
        let mut prev = start.clone();
        for r in walk(&start, &headings, seed) {
            for (id, o) in &r.new_state.objects {
                let before = &prev.objects[id];
                let p = o.params;
                let bound = (p.tip_fraction * start.sim.max_step / p.com_height).min(1.0).asin();
                prop_assert!(o.tip_angle - before.tip_angle <= bound + 1e-12,
                    "object {} tipped {} > {}", id, o.tip_angle - before.tip_angle, bound);
                let moved = (o.position[0] - before.position[0]).hypot(o.position[1] - before.position[1]);
                prop_assert!(moved <= start.sim.max_step + 1e-12);
                prop_assert!(o.tip_angle <= p.fall_angle);
                prop_assert!(o.fallen || o.tip_angle < p.fall_angle);
            }
            prop_assert_eq!(r.observations.len(), r.new_state.objects.len());
            let true_max = r.new_state.objects.values().map(|o| o.tip_angle).fold(0.0, f64::max);
            prop_assert_eq!(r.max_tip, true_max);
            prev = r.new_state;
        }
    }

    #[test]
    fn fallen_is_absorbing(headings in prop::collection::vec(0.0f64..6.3, 1..30), seed in any::<u64>()) {
        let start = scene([0.5, 0.3], &[([0.5, 0.36], 1.0, 0.03)], 0.0);
        // Drive straight in first so the object goes over.
        let mut heads = vec![std::f64::consts::FRAC_PI_2; 4];
        heads.extend(headings);
        start.validate().unwrap();
        let mut seen_fallen = false;
        for r in walk(&start, &heads, seed) {
            let o = &r.new_state.objects[&ObjectId(0)];
            if seen_fallen {
                prop_assert!(o.fallen);
                prop_assert_eq!(o.tip_angle, o.params.fall_angle);
                prop_assert_eq!(r.observations[&ObjectId(0)], o.params.fall_angle);
            }
            seen_fallen |= o.fallen;
        }
        prop_assert!(seen_fallen);
    }

    #[test]
    fn stepping_is_deterministic(headings in prop::collection::vec(0.5f64..2.6, 1..15), seed in any::<u64>()) {
        let s = cluster();
        prop_assert_eq!(walk(&s, &headings, seed), walk(&s, &headings, seed));
    }

    #[test]
    fn untouched_objects_only_relax(seed in any::<u64>(), n in 1usize..10) {
        let mut s = scene([0.1, 0.1], &[([0.8, 0.8], 1.0, 0.1)], 0.0);
        s.objects.get_mut(&ObjectId(0)).unwrap().lean = [0.0, 0.0];
        let r = walk(&s, &vec![0.0; n], seed);
        let last = &r.last().unwrap().new_state.objects[&ObjectId(0)];
        prop_assert_eq!(last.position, [0.8, 0.8, 0.0]);
        prop_assert_eq!(last.tip_angle, 0.0);
        prop_assert!(r.iter().all(|x| x.contacts.is_empty()));
    }
}

#[test]
fn bad_targets_are_rejected() {
    let s = cluster();
    assert!(matches!(sim::step(&s, [1.2, 0.3], 0), Err(SimError::OutOfBounds(..))));
    assert!(matches!(sim::step(&s, [0.5, 0.35], 0), Err(SimError::StepTooLarge { .. })));
    assert!(matches!(sim::step(&s, [f64::NAN, 0.3], 0), Err(SimError::OutOfBounds(..))));
}

#[test]
fn empty_probe_gives_empty_results() {
    assert!(sim::probe_trajectory(&cluster(), &[], 1).unwrap().is_empty());
}

#[test]
fn subdivided_path_respects_step_limit_and_hits_waypoints() {
    let path = sim::subdivide_path([0.0, 0.0], &[[0.1, 0.0], [0.1, 0.05], [0.1, 0.05]], 0.02);
    let mut prev = [0.0, 0.0];
    for p in &path {
        assert!((p[0] - prev[0]).hypot(p[1] - prev[1]) <= 0.02 + 1e-12);
        prev = *p;
    }
    assert!(path.contains(&[0.1, 0.0]));
    assert_eq!(path.last(), Some(&[0.1, 0.05]));
}

#[test]
fn tipping_object_tip_rises_then_decays() {
    let s = scene([0.5, 0.3], &[([0.5, 0.36], 1.0, 0.1)], 0.0);
    let mut path = sim::subdivide_path(s.robot_xy(), &[[0.5, 0.315]], 0.02);
    path.extend(sim::subdivide_path([0.5, 0.315], &[[0.5, 0.25]], 0.02));
    let tips: Vec<f64> = sim::probe_trajectory(&s, &path, 0)
        .unwrap()
        .iter()
        .map(|r| r.new_state.objects[&ObjectId(0)].tip_angle)
        .collect();
    let peak = tips.iter().cloned().fold(0.0, f64::max);
    let at = tips.iter().position(|&t| t == peak).unwrap();
    assert!(peak > 0.0);
    assert!(tips[..=at].windows(2).all(|w| w[1] >= w[0]));
    assert!(tips[at..].windows(2).all(|w| w[1] <= w[0]));
    assert!(*tips.last().unwrap() < peak);
}

#[test]
fn goal_region_is_closed() {
    let goal = Rect::new([0.2, 0.2], [0.4, 0.4]);
    for (xy, inside) in [([0.3, 0.3], true), ([0.2, 0.3], true), ([0.4, 0.4], true), ([0.41, 0.3], false)] {
        let s = scene(xy, &[], 0.0);
        assert_eq!(sim::goal_reached(&s, &goal), inside);
    }
}
