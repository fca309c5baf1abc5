//! Gaussian process regression with an RBF kernel and online insertion.
//!
//! The model keeps the lower Cholesky factor `L` of `K_y = K + σ_n² I` packed
//! row by row, together with the whitened residual `w = L⁻¹ (Y − μ_p)`.
//! Inserting an observation appends one row to `L` and one entry to `w`, so
//! an insertion and a posterior query both cost `O(n²)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative jitter added to the diagonal when the noise variance is zero.
pub const JITTER: f64 = 1e-10;

/// An insertion whose new pivot `d²` falls to or below `PIVOT_FLOOR · α` is
/// rejected as numerically singular.
pub const PIVOT_FLOOR: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GpError {
    #[error("input has dimension {got}, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("kernel matrix is not positive definite (new pivot {pivot:e})")]
    NotPositiveDefinite { pivot: f64 },
    #[error("invalid kernel parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    /// Output scale α.
    pub alpha: f64,
    /// Isotropic lengthscale l.
    pub lengthscale: f64,
    /// Observation noise variance σ_n².
    #[serde(default)]
    pub noise_var: f64,
}

impl KernelParams {
    pub fn new(alpha: f64, lengthscale: f64, noise_var: f64) -> Result<Self, GpError> {
        let params = KernelParams {
            alpha,
            lengthscale,
            noise_var,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), GpError> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(GpError::InvalidParams(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !(self.lengthscale > 0.0 && self.lengthscale.is_finite()) {
            return Err(GpError::InvalidParams(format!(
                "lengthscale must be > 0, got {}",
                self.lengthscale
            )));
        }
        if !(self.noise_var >= 0.0 && self.noise_var.is_finite()) {
            return Err(GpError::InvalidParams(format!(
                "noise_var must be >= 0, got {}",
                self.noise_var
            )));
        }
        Ok(())
    }

    /// Value added to the diagonal of `K`.
    pub fn diagonal_offset(&self) -> f64 {
        if self.noise_var > 0.0 {
            self.noise_var
        } else {
            JITTER * self.alpha
        }
    }
}

/// `α · exp(−½ l⁻² ‖x − z‖²)`.
pub fn rbf(x: &[f64], z: &[f64], params: &KernelParams) -> Result<f64, GpError> {
    if x.len() != z.len() {
        return Err(GpError::DimensionMismatch {
            expected: x.len(),
            got: z.len(),
        });
    }
    Ok(rbf_unchecked(x, z, params))
}

#[inline]
fn rbf_unchecked(x: &[f64], z: &[f64], params: &KernelParams) -> f64 {
    let sq: f64 = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
    params.alpha * (-0.5 * sq / (params.lengthscale * params.lengthscale)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    pub mean: f64,
    pub variance: f64,
}

impl Posterior {
    pub fn std(&self) -> f64 {
        self.variance.sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct GpModel {
    params: KernelParams,
    prior_mean: f64,
    dim: usize,
    /// Row-major `n × dim`.
    inputs: Vec<f64>,
    targets: Vec<f64>,
    /// Packed lower triangle, row `i` holds `i + 1` entries.
    chol: Vec<f64>,
    /// `L⁻¹ (Y − μ_p)`.
    whitened: Vec<f64>,
}

impl GpModel {
    /// Empty model over `dim`-dimensional inputs with zero prior mean.
    pub fn new(dim: usize, params: KernelParams) -> Result<Self, GpError> {
        params.validate()?;
        Ok(GpModel {
            params,
            prior_mean: 0.0,
            dim,
            inputs: Vec::new(),
            targets: Vec::new(),
            chol: Vec::new(),
            whitened: Vec::new(),
        })
    }

    /// Constant prior mean. Only valid on an empty model.
    pub fn with_prior_mean(mut self, prior_mean: f64) -> Self {
        assert!(self.is_empty(), "prior mean must be set before observations are added");
        self.prior_mean = prior_mean;
        self
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn prior_mean(&self) -> f64 {
        self.prior_mean
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Entry `(i, j)` of the Cholesky factor, zero above the diagonal.
    pub fn chol_entry(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.chol[row_start(i) + j]
        }
    }

    fn chol_row(&self, i: usize) -> &[f64] {
        let start = row_start(i);
        &self.chol[start..start + i + 1]
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), GpError> {
        if x.len() != self.dim {
            return Err(GpError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Solves `L v = k` in place by forward substitution.
    fn forward_solve(&self, v: &mut [f64]) {
        for i in 0..v.len() {
            let row = self.chol_row(i);
            let dot: f64 = row[..i].iter().zip(&v[..i]).map(|(a, b)| a * b).sum();
            v[i] = (v[i] - dot) / row[i];
        }
    }

    fn cross_covariance(&self, x: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|i| rbf_unchecked(self.input(i), x, &self.params))
            .collect()
    }

    /// Appends `(x, y)`, extending the Cholesky factor by one row.
    pub fn add_observation(&mut self, x: &[f64], y: f64) -> Result<(), GpError> {
        self.check_dim(x)?;
        let mut row = self.cross_covariance(x);
        self.forward_solve(&mut row);
        let self_cov = self.params.alpha + self.params.diagonal_offset();
        let pivot = self_cov - row.iter().map(|v| v * v).sum::<f64>();
        if !(pivot > PIVOT_FLOOR * self.params.alpha) {
            return Err(GpError::NotPositiveDefinite { pivot });
        }
        let diag = pivot.sqrt();
        let dot: f64 = row.iter().zip(&self.whitened).map(|(a, b)| a * b).sum();
        let w_new = (y - self.prior_mean - dot) / diag;

        self.chol.extend_from_slice(&row);
        self.chol.push(diag);
        self.whitened.push(w_new);
        self.inputs.extend_from_slice(x);
        self.targets.push(y);
        Ok(())
    }

    pub fn posterior(&self, x: &[f64]) -> Result<Posterior, GpError> {
        self.check_dim(x)?;
        Ok(self.posterior_unchecked(x))
    }

    fn posterior_unchecked(&self, x: &[f64]) -> Posterior {
        let mut v = self.cross_covariance(x);
        self.forward_solve(&mut v);
        let mean = self.prior_mean + v.iter().zip(&self.whitened).map(|(a, b)| a * b).sum::<f64>();
        let variance = self.params.alpha - v.iter().map(|a| a * a).sum::<f64>();
        Posterior {
            mean,
            variance: variance.max(0.0),
        }
    }

    /// Posterior at every point of `xs`, computed in parallel.
    pub fn posterior_batch<X>(&self, xs: &[X]) -> Result<Vec<Posterior>, GpError>
    where
        X: AsRef<[f64]> + Sync,
    {
        for x in xs {
            self.check_dim(x.as_ref())?;
        }
        Ok(xs
            .par_iter()
            .map(|x| self.posterior_unchecked(x.as_ref()))
            .collect())
    }

    /// The model restricted to its first `n` observations.
    ///
    /// The leading block of a Cholesky factor is the factor of the leading
    /// block, so this needs no refactorisation.
    pub fn truncated(&self, n: usize) -> GpModel {
        let n = n.min(self.len());
        GpModel {
            params: self.params,
            prior_mean: self.prior_mean,
            dim: self.dim,
            inputs: self.inputs[..n * self.dim].to_vec(),
            targets: self.targets[..n].to_vec(),
            chol: self.chol[..row_start(n)].to_vec(),
            whitened: self.whitened[..n].to_vec(),
        }
    }
}

#[inline]
fn row_start(i: usize) -> usize {
    i * (i + 1) / 2
}
