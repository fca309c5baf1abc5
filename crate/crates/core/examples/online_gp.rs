//! Streaming observations into an RBF Gaussian process.
//!
//! Each insert extends the Cholesky factor by one row, so the posterior is
//! always current without refitting from scratch.
//!
//! ```bash
//! cargo run --example online_gp
//! ```

use ocgp::gp::{GpModel, KernelParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn tip(x: f64) -> f64 {
    // Pretend tip angle as the gripper closes in on an object at x = 0.
    0.3 * (-x * x / 0.002).exp()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = KernelParams::new(0.01, 0.03, 2.5e-5)?;
    let mut gp = GpModel::new(1, params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let noise = Normal::new(0.0, 0.005)?;
    let probe = [0.0, 0.05];

    println!("{:>4} {:>9} {:>9} {:>9}", "n", "mean@0", "std@0", "std@0.05");
    let show = |gp: &GpModel| -> Result<(), Box<dyn std::error::Error>> {
        let a = gp.posterior(&probe[..1])?;
        let b = gp.posterior(&probe[1..])?;
        println!("{:>4} {:>9.4} {:>9.4} {:>9.4}", gp.len(), a.mean, a.std(), b.std());
        Ok(())
    };
    show(&gp)?;
    // Approach from the left in 5 mm steps.
    for k in 0..16 {
        let x = -0.075 + 0.005 * k as f64;
        gp.add_observation(&[x], tip(x) + noise.sample(&mut rng))?;
        if k % 4 == 3 {
            show(&gp)?;
        }
    }
    // The right-hand side was never visited, so it is still at the prior.
    println!("prior std is {:.4}", params.alpha.sqrt());
    Ok(())
}
