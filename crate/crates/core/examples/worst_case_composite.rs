//! Combining per-object models into a worst-case field.
//!
//! Each of three objects has its own learned interaction model; the composite
//! at any gripper position is whichever object has the largest `μ + βσ`.
//!
//! ```bash
//! cargo run --example worst_case_composite
//! ```

use std::collections::BTreeMap;

use ocgp::field::{render_field, FieldSource, GridSpec, SnapshotMeta};
use ocgp::geometry::Pose;
use ocgp::gp::KernelParams;
use ocgp::object_model::{InputSpec, ObjectCentricModel, ObjectId};
use ocgp::sim::Rect;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut model = ObjectCentricModel::new(KernelParams::new(0.01, 0.03, 2.5e-5)?, InputSpec::planar(), 2.0)?;
    let poses: BTreeMap<ObjectId, Pose> = [(0, 0.1), (1, 0.3), (2, 0.5)]
        .into_iter()
        .map(|(i, x)| (ObjectId(i), Pose::from_translation(x, 0.2, 0.0)))
        .collect();

    // Every object has been approached from below without effect; only
    // object 0 was then pushed on and tipped.
    for id in poses.keys() {
        model.register(*id)?;
    }
    for (id, pose) in &poses {
        for k in 0..4 {
            let robot = Pose::from_translation(pose.position[0], 0.08 + 0.01 * k as f64, 0.04);
            model.update(*id, &robot, pose, 0.0)?;
        }
    }
    for (y, tip) in [(0.12, 0.05), (0.13, 0.15)] {
        model.update(ObjectId(0), &Pose::from_translation(0.1, y, 0.04), &poses[&ObjectId(0)], tip)?;
    }

    // Objects with no data near a configuration sit at the prior bound
    // β√α, so the composite never drops below it far from experience.
    for (x, y) in [(0.1, 0.09), (0.1, 0.13), (0.3, 0.13)] {
        let robot = Pose::from_translation(x, y, 0.04);
        let per_object: Vec<String> = poses
            .iter()
            .map(|(id, pose)| {
                let p = model.predict(*id, &robot, pose)?;
                Ok(format!("{id}: {:.3}", p.mean + model.beta() * p.std()))
            })
            .collect::<Result<_, ocgp::object_model::ModelError>>()?;
        let c = model.composite_predict(&robot, &poses)?;
        println!(
            "gripper at ({x:.1}, {y:.2}): ucb per object [{}] -> worst {}",
            per_object.join(", "),
            c.argmax_object.map_or("-".into(), |id| id.to_string())
        );
    }

    let spec = GridSpec {
        bounds: Rect::new([0.0, 0.0], [0.6, 0.4]),
        nx: 61,
        ny: 41,
    };
    let robot = Pose::from_translation(0.0, 0.0, 0.04);
    let grid = render_field(FieldSource::Composite(&model), &robot, &poses, &spec, SnapshotMeta::default())?;
    let (imax, vmax) = grid.mean.iter().enumerate().fold((0, f64::MIN), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
    println!(
        "composite mean peaks at ({:.2}, {:.2}) with {:.3} rad",
        grid.xs[imax % grid.xs.len()],
        grid.ys[imax / grid.xs.len()],
        vmax
    );
    Ok(())
}
