//! Planning through five unknown objects to a goal band.
//!
//! Runs the shipped five-object scene, prints each decision, then compares
//! with a gripper that simply drives straight at the goal.
//!
//! ```bash
//! cargo run --example plan_episode
//! ```

use ocgp::experiment::{run_plan, RunOptions};
use ocgp::SceneConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SceneConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/scenes/plan_five.json"))?;
    let theta_max = cfg.planner.as_ref().expect("scene has a planner").theta_max;
    let a = run_plan(&cfg, RunOptions::default())?;

    println!("step  kind     target          ucb    worst  max tip");
    for s in &a.replay {
        let p = s.plan.expect("planner steps carry a decision");
        println!(
            "{:>4}  {:<7}  ({:.3}, {:.3})  {:.3}  {:>5}  {:.3}",
            s.index,
            format!("{:?}", p.kind).to_lowercase(),
            p.target[0],
            p.target[1],
            p.predicted.ucb,
            p.predicted.argmax_object.map_or("-".into(), |id| id.to_string()),
            s.result.max_tip
        );
    }
    let s = &a.summary;
    println!("theta_max {theta_max}, safety violations {}", s.safety_violations);
    println!("planner:  success {:?}, {} steps, fallen {}", s.success, s.steps, s.fallen);
    if let Some(b) = &s.baseline {
        println!("straight: success {}, {} steps, fallen {}", b.success, b.steps, b.fallen);
    }
    Ok(())
}
