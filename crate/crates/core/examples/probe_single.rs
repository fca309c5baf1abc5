//! Open-loop probing of one object, tipping and pushing variants.
//!
//! After a push the object-centric model still knows the approach it saw,
//! while a model keyed on world coordinates has to start over.
//!
//! ```bash
//! cargo run --example probe_single
//! ```

use ocgp::experiment::{run_probe_single, ProbeVariant, RunOptions};
use ocgp::object_model::ObjectId;
use ocgp::SceneConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SceneConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/scenes/probe_single.json"))?;
    let sqrt_alpha = cfg.gp.alpha.sqrt();
    let start = cfg.robot.start;

    for variant in [ProbeVariant::Tipping, ProbeVariant::Pushing] {
        let a = run_probe_single(&cfg, Some(variant), RunOptions::default())?;
        let id = ObjectId(0);
        let end = a.summary.final_object_poses[&id];
        let fs = a.full_state_model.as_ref().expect("probe runs keep the baseline");

        // Query the start pose against where the object is now.
        let oc = a.object_model.predict(id, &start, &a.initial_state.objects[&id].pose())?;
        let base = fs.predict(&start, &a.summary.final_object_poses)?;
        println!("{variant:?}:");
        println!("  object now at {:.3?}, max tip {:.3} rad, fallen {}", end.position, a.summary.max_true_tip[&id], a.summary.fallen);
        println!("  object-centric std at start config: {:.4} sqrt(alpha)", oc.std() / sqrt_alpha);
        println!("  full-state std at start position:   {:.4} sqrt(alpha)", base.std() / sqrt_alpha);
    }
    Ok(())
}
