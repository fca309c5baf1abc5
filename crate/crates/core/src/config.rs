//! JSON scene configuration shared by every experiment.
//!
//! See the README for the field reference. Quaternions are `[x, y, z, w]`.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Pose;
use crate::gp::KernelParams;
use crate::object_model::{FullStateModel, InputSpec, ModelError, ObjectCentricModel, ObjectId};
use crate::planner::PlannerConfig;
use crate::sim::{ObjectParams, ObjectState, Rect, SceneState, SimParams};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported schema_version {0} (expected {SCHEMA_VERSION})")]
    SchemaVersion(u32),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotConfig {
    /// End-effector start pose; `position[2]` is the fixed working height.
    pub start: Pose,
    #[serde(default = "default_disc_radius")]
    pub disc_radius: f64,
}

fn default_disc_radius() -> f64 {
    0.015
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSettings {
    #[serde(default = "default_max_step")]
    pub max_step: f64,
    #[serde(default = "default_relax")]
    pub relax: f64,
    #[serde(default = "default_obs_noise")]
    pub obs_noise_std: f64,
}

fn default_max_step() -> f64 {
    0.02
}

fn default_relax() -> f64 {
    0.5
}

fn default_obs_noise() -> f64 {
    0.005
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            max_step: default_max_step(),
            relax: default_relax(),
            obs_noise_std: default_obs_noise(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectConfig {
    pub id: u32,
    pub pose: Pose,
    pub params: ObjectParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpConfig {
    pub alpha: f64,
    pub lengthscale: f64,
    #[serde(default)]
    pub noise_var: f64,
    #[serde(default)]
    pub prior_mean: f64,
}

impl GpConfig {
    pub fn kernel(&self) -> KernelParams {
        KernelParams {
            alpha: self.alpha,
            lengthscale: self.lengthscale,
            noise_var: self.noise_var,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub input_spec: InputSpec,
    /// Proximity gate radius in metres; absent means every object learns
    /// from every step.
    #[serde(default)]
    pub proximity_radius: Option<f64>,
}

fn default_beta() -> f64 {
    2.0
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            beta: default_beta(),
            input_spec: InputSpec::default(),
            proximity_radius: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ProbeConfig {
    /// Corner points of the scripted path; legs are split into `max_step` moves.
    #[serde(default)]
    pub waypoints: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingConfig {
    #[serde(default = "default_ring_count")]
    pub count: usize,
    #[serde(default = "default_ring_radius")]
    pub radius: f64,
}

fn default_ring_count() -> usize {
    8
}

fn default_ring_radius() -> f64 {
    0.01
}

impl Default for RingConfig {
    fn default() -> Self {
        RingConfig {
            count: default_ring_count(),
            radius: default_ring_radius(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    #[serde(default = "default_resolution")]
    pub nx: usize,
    #[serde(default = "default_resolution")]
    pub ny: usize,
}

fn default_resolution() -> usize {
    100
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            nx: default_resolution(),
            ny: default_resolution(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    pub workspace: Rect,
    pub robot: RobotConfig,
    #[serde(default)]
    pub sim: SimSettings,
    #[serde(default)]
    pub objects: Vec<ObjectConfig>,
    pub gp: GpConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub planner: Option<PlannerConfig>,
    #[serde(default)]
    pub probe: ProbeConfig,
    #[serde(default)]
    pub seed_ring: RingConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
}

fn default_snapshots() -> usize {
    4
}

impl SceneConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: SceneConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::SchemaVersion(self.schema_version));
        }
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        let mut ids = BTreeSet::new();
        for o in &self.objects {
            if !ids.insert(o.id) {
                return invalid(format!("duplicate object id {}", o.id));
            }
        }
        if self.grid.nx < 2 || self.grid.ny < 2 {
            return invalid("grid resolution must be at least 2 per axis".into());
        }
        if self.snapshots == 0 {
            return invalid("snapshots must be >= 1".into());
        }
        self.gp.kernel().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(self.model.beta >= 0.0) {
            return invalid(format!("beta must be >= 0, got {}", self.model.beta));
        }
        if self.model.input_spec.is_empty() {
            return invalid("input_spec must not be empty".into());
        }
        if let Some(r) = self.model.proximity_radius {
            if !(r > 0.0) {
                return invalid(format!("proximity_radius must be > 0, got {r}"));
            }
        }
        if self.seed_ring.radius < 0.0 {
            return invalid("seed_ring.radius must be >= 0".into());
        }
        self.scene_state().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        for o in &self.objects {
            o.pose.to_transform().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        self.robot.start.to_transform().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if let Some(p) = &self.planner {
            p.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
            if p.candidate_step > self.sim.max_step {
                return invalid("planner.candidate_step exceeds sim.max_step".into());
            }
        }
        Ok(())
    }

    pub fn sim_params(&self) -> SimParams {
        SimParams {
            max_step: self.sim.max_step,
            relax: self.sim.relax,
            obs_noise_std: self.sim.obs_noise_std,
            ee_radius: self.robot.disc_radius,
        }
    }

    pub fn scene_state(&self) -> SceneState {
        SceneState {
            robot: self.robot.start,
            objects: self
                .objects
                .iter()
                .map(|o| {
                    (
                        ObjectId(o.id),
                        ObjectState::upright(o.pose.position, o.pose.orientation, o.params),
                    )
                })
                .collect(),
            bounds: self.workspace,
            sim: self.sim_params(),
        }
    }

    pub fn object_ids(&self) -> Vec<ObjectId> {
        let mut ids: Vec<_> = self.objects.iter().map(|o| ObjectId(o.id)).collect();
        ids.sort();
        ids
    }

    /// One untrained object-centric GP per configured object.
    pub fn object_centric_model(&self) -> Result<ObjectCentricModel, ModelError> {
        let mut m = ObjectCentricModel::new(self.gp.kernel(), self.model.input_spec.clone(), self.model.beta)?
            .with_prior_mean(self.gp.prior_mean)
            .with_proximity_radius(self.model.proximity_radius);
        for id in self.object_ids() {
            m.register(id)?;
        }
        Ok(m)
    }

    pub fn full_state_model(&self) -> Result<FullStateModel, ModelError> {
        FullStateModel::new(self.gp.kernel(), self.model.input_spec.clone(), self.object_ids())
    }

    /// Planner settings with the scene's seeding ring applied.
    pub fn planner_config(&self) -> Result<PlannerConfig, ConfigError> {
        let mut p = self
            .planner
            .clone()
            .ok_or_else(|| ConfigError::Invalid("config has no planner section".into()))?;
        p.seed_ring_count = self.seed_ring.count;
        p.seed_ring_radius = self.seed_ring.radius;
        Ok(p)
    }
}
