#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Vector3};
use rand::Rng;

use ocgp::geometry::{Pose, Quaternion, RigidTransform};
use ocgp::gp::{GpModel, KernelParams};

/// Posterior by building the full Gram matrix and solving with LU, written
/// independently of the library's incremental factorisation.
pub fn dense_posterior(gp: &GpModel, x: &[f64]) -> (f64, f64) {
    let p = gp.params();
    let n = gp.len();
    let k = |a: &[f64], b: &[f64]| {
        let d2: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
        p.alpha * (-0.5 * d2 / (p.lengthscale * p.lengthscale)).exp()
    };
    if n == 0 {
        return (gp.prior_mean(), p.alpha);
    }
    let gram = DMatrix::from_fn(n, n, |i, j| {
        k(gp.input(i), gp.input(j)) + if i == j { p.diagonal_offset() } else { 0.0 }
    });
    let resid = DVector::from_iterator(n, gp.targets().iter().map(|y| y - gp.prior_mean()));
    let kstar = DVector::from_fn(n, |i, _| k(gp.input(i), x));
    let lu = gram.lu();
    let a = lu.solve(&resid).expect("gram matrix is invertible");
    let b = lu.solve(&kstar).expect("gram matrix is invertible");
    let mean = gp.prior_mean() + kstar.dot(&a);
    let var = p.alpha - kstar.dot(&b);
    (mean, var)
}

pub fn random_unit_quaternion<R: Rng>(rng: &mut R) -> Quaternion {
    loop {
        let v: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n > 0.1 && n <= 1.0 {
            return Quaternion::new(v[0] / n, v[1] / n, v[2] / n, v[3] / n);
        }
    }
}

pub fn random_pose<R: Rng>(rng: &mut R, extent: f64) -> Pose {
    Pose::new(
        std::array::from_fn(|_| rng.random_range(-extent..extent)),
        random_unit_quaternion(rng),
    )
}

pub fn random_motion<R: Rng>(rng: &mut R, extent: f64) -> RigidTransform {
    random_pose(rng, extent).to_transform().expect("unit quaternion")
}

pub fn random_gp<R: Rng>(rng: &mut R, dim: usize, n: usize) -> GpModel {
    let params = KernelParams::new(
        rng.random_range(0.2..2.0),
        rng.random_range(0.3..1.0),
        rng.random_range(1e-3..1e-1),
    )
    .expect("valid params");
    let mut gp = GpModel::new(dim, params).expect("dim > 0").with_prior_mean(rng.random_range(-0.5..0.5));
    for _ in 0..n {
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..1.0)).collect();
        gp.add_observation(&x, rng.random_range(-1.0..1.0)).expect("positive definite");
    }
    gp
}

pub fn translation_error(a: &Pose, b: &Pose) -> f64 {
    (Vector3::from(a.position) - Vector3::from(b.position)).amax()
}
