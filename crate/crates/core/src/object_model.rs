//! Per-object Gaussian processes over the robot pose expressed in each
//! object's frame, the world-frame "full state" baseline, and the worst-case
//! composition across objects.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{express_in_object_frame, GeometryError, Pose};
use crate::gp::{GpError, GpModel, KernelParams, Posterior};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub u32);

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("object {0} is not registered")]
    UnknownObject(ObjectId),
    #[error("object {0} is already registered")]
    DuplicateObject(ObjectId),
    #[error("no pose given for object {0}")]
    MissingPose(ObjectId),
    #[error("beta must be >= 0, got {0}")]
    InvalidBeta(f64),
    #[error("input spec must select at least one component")]
    EmptyInputSpec,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Gp(#[from] GpError),
}

/// One scalar read off a pose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoseComponent {
    X,
    Y,
    Z,
    Qx,
    Qy,
    Qz,
    Qw,
}

/// Which pose components form a GP input, in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InputSpec(pub Vec<PoseComponent>);

impl InputSpec {
    /// Planar position only.
    pub fn planar() -> Self {
        InputSpec(vec![PoseComponent::X, PoseComponent::Y])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Appends the selected components of `pose` to `out`. Orientation
    /// components are taken from the `w ≥ 0` representative.
    pub fn project_into(&self, pose: &Pose, out: &mut Vec<f64>) {
        let q = pose.orientation.canonical().0;
        out.extend(self.0.iter().map(|c| match c {
            PoseComponent::X => pose.position[0],
            PoseComponent::Y => pose.position[1],
            PoseComponent::Z => pose.position[2],
            PoseComponent::Qx => q[0],
            PoseComponent::Qy => q[1],
            PoseComponent::Qz => q[2],
            PoseComponent::Qw => q[3],
        }));
    }

    pub fn project(&self, pose: &Pose) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        self.project_into(pose, &mut out);
        out
    }
}

impl Default for InputSpec {
    fn default() -> Self {
        Self::planar()
    }
}

/// Scene worst case: the object prediction with the largest `μ + βσ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositePrediction {
    pub mean: f64,
    pub std: f64,
    pub ucb: f64,
    /// `None` only when the scene holds no objects.
    pub argmax_object: Option<ObjectId>,
}

impl CompositePrediction {
    /// Prediction for a scene without objects: nothing can tip.
    pub fn empty() -> Self {
        CompositePrediction {
            mean: 0.0,
            std: 0.0,
            ucb: 0.0,
            argmax_object: None,
        }
    }
}

/// Picks the largest upper bound; on ties the earliest (lowest) id wins.
pub fn select_worst_case<I>(predictions: I, beta: f64) -> CompositePrediction
where
    I: IntoIterator<Item = (ObjectId, Posterior)>,
{
    let mut best = CompositePrediction::empty();
    let mut best_ucb = f64::NEG_INFINITY;
    let mut sorted: Vec<_> = predictions.into_iter().collect();
    sorted.sort_by_key(|(id, _)| *id);
    for (id, post) in sorted {
        let std = post.std();
        let ucb = post.mean + beta * std;
        if ucb > best_ucb {
            best_ucb = ucb;
            best = CompositePrediction {
                mean: post.mean,
                std,
                ucb,
                argmax_object: Some(id),
            };
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct ObjectCentricModel {
    models: BTreeMap<ObjectId, GpModel>,
    params: KernelParams,
    prior_mean: f64,
    input_spec: InputSpec,
    beta: f64,
    proximity_radius: Option<f64>,
}

impl ObjectCentricModel {
    pub fn new(params: KernelParams, input_spec: InputSpec, beta: f64) -> Result<Self, ModelError> {
        params.validate()?;
        if !(beta >= 0.0) {
            return Err(ModelError::InvalidBeta(beta));
        }
        if input_spec.is_empty() {
            return Err(ModelError::EmptyInputSpec);
        }
        Ok(ObjectCentricModel {
            models: BTreeMap::new(),
            params,
            prior_mean: 0.0,
            input_spec,
            beta,
            proximity_radius: None,
        })
    }

    pub fn with_prior_mean(mut self, prior_mean: f64) -> Self {
        self.prior_mean = prior_mean;
        self
    }

    /// Skip updates for objects whose planar distance to the end effector
    /// exceeds `radius`.
    pub fn with_proximity_radius(mut self, radius: Option<f64>) -> Self {
        self.proximity_radius = radius;
        self
    }

    pub fn register(&mut self, id: ObjectId) -> Result<(), ModelError> {
        if self.models.contains_key(&id) {
            return Err(ModelError::DuplicateObject(id));
        }
        let gp = GpModel::new(self.input_spec.len(), self.params)?.with_prior_mean(self.prior_mean);
        self.models.insert(id, gp);
        Ok(())
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn input_spec(&self) -> &InputSpec {
        &self.input_spec
    }

    pub fn proximity_radius(&self) -> Option<f64> {
        self.proximity_radius
    }

    pub fn object_ids(&self) -> impl Iterator<Item = ObjectId> + '_ {
        self.models.keys().copied()
    }

    pub fn gp(&self, id: ObjectId) -> Result<&GpModel, ModelError> {
        self.models.get(&id).ok_or(ModelError::UnknownObject(id))
    }

    /// Number of observations held for each object.
    pub fn sizes(&self) -> BTreeMap<ObjectId, usize> {
        self.models.iter().map(|(id, gp)| (*id, gp.len())).collect()
    }

    /// GP input for a robot pose relative to an object pose.
    pub fn relative_input(&self, robot_pose: &Pose, object_pose: &Pose) -> Result<Vec<f64>, ModelError> {
        let rel = express_in_object_frame(robot_pose, object_pose)?;
        Ok(self.input_spec.project(&rel))
    }

    /// Whether a robot at `robot_pose` is close enough to update `object_pose`.
    pub fn within_proximity(&self, robot_pose: &Pose, object_pose: &Pose) -> bool {
        match self.proximity_radius {
            None => true,
            Some(radius) => {
                let dx = robot_pose.position[0] - object_pose.position[0];
                let dy = robot_pose.position[1] - object_pose.position[1];
                dx.hypot(dy) <= radius
            }
        }
    }

    /// Records an observed tip angle of one object. Returns `false` if the
    /// proximity gate skipped the insertion.
    pub fn update(
        &mut self,
        id: ObjectId,
        robot_pose: &Pose,
        object_pose: &Pose,
        y: f64,
    ) -> Result<bool, ModelError> {
        if !self.models.contains_key(&id) {
            return Err(ModelError::UnknownObject(id));
        }
        if !self.within_proximity(robot_pose, object_pose) {
            return Ok(false);
        }
        let x = self.relative_input(robot_pose, object_pose)?;
        self.models.get_mut(&id).expect("checked above").add_observation(&x, y)?;
        Ok(true)
    }

    /// Inserts at an explicit object-frame input, bypassing the gate.
    pub fn update_relative(&mut self, id: ObjectId, x: &[f64], y: f64) -> Result<(), ModelError> {
        let gp = self.models.get_mut(&id).ok_or(ModelError::UnknownObject(id))?;
        gp.add_observation(x, y)?;
        Ok(())
    }

    pub fn predict(&self, id: ObjectId, robot_pose: &Pose, object_pose: &Pose) -> Result<Posterior, ModelError> {
        let gp = self.gp(id)?;
        let x = self.relative_input(robot_pose, object_pose)?;
        Ok(gp.posterior(&x)?)
    }

    /// Worst-case prediction across every registered object.
    pub fn composite_predict(
        &self,
        robot_pose: &Pose,
        object_poses: &BTreeMap<ObjectId, Pose>,
    ) -> Result<CompositePrediction, ModelError> {
        self.composite_predict_with_beta(robot_pose, object_poses, self.beta)
    }

    pub fn composite_predict_with_beta(
        &self,
        robot_pose: &Pose,
        object_poses: &BTreeMap<ObjectId, Pose>,
        beta: f64,
    ) -> Result<CompositePrediction, ModelError> {
        let per_object = self
            .models
            .keys()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&&id| {
                let pose = object_poses.get(&id).ok_or(ModelError::MissingPose(id))?;
                Ok((id, self.predict(id, robot_pose, pose)?))
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        Ok(select_worst_case(per_object, beta))
    }

    /// Copy holding only the first `counts[id]` observations of each object.
    pub fn truncated(&self, counts: &BTreeMap<ObjectId, usize>) -> ObjectCentricModel {
        let mut out = self.clone();
        for (id, gp) in out.models.iter_mut() {
            let n = counts.get(id).copied().unwrap_or(0);
            *gp = gp.truncated(n);
        }
        out
    }
}

/// Baseline whose input concatenates the robot pose and every object pose in
/// the world frame, in a fixed object order.
#[derive(Debug, Clone)]
pub struct FullStateModel {
    model: GpModel,
    input_spec: InputSpec,
    object_order: Vec<ObjectId>,
}

impl FullStateModel {
    pub fn new(params: KernelParams, input_spec: InputSpec, object_order: Vec<ObjectId>) -> Result<Self, ModelError> {
        if input_spec.is_empty() {
            return Err(ModelError::EmptyInputSpec);
        }
        let dim = input_spec.len() * (1 + object_order.len());
        Ok(FullStateModel {
            model: GpModel::new(dim, params)?,
            input_spec,
            object_order,
        })
    }

    pub fn gp(&self) -> &GpModel {
        &self.model
    }

    pub fn object_order(&self) -> &[ObjectId] {
        &self.object_order
    }

    pub fn input(&self, robot_pose: &Pose, object_poses: &BTreeMap<ObjectId, Pose>) -> Result<Vec<f64>, ModelError> {
        let mut x = Vec::with_capacity(self.model.dim());
        self.input_spec.project_into(robot_pose, &mut x);
        for id in &self.object_order {
            let pose = object_poses.get(id).ok_or(ModelError::MissingPose(*id))?;
            self.input_spec.project_into(pose, &mut x);
        }
        Ok(x)
    }

    /// Records the scene-wide maximum tip angle.
    pub fn update(
        &mut self,
        robot_pose: &Pose,
        object_poses: &BTreeMap<ObjectId, Pose>,
        y_max: f64,
    ) -> Result<(), ModelError> {
        let x = self.input(robot_pose, object_poses)?;
        self.model.add_observation(&x, y_max)?;
        Ok(())
    }

    pub fn predict(&self, robot_pose: &Pose, object_poses: &BTreeMap<ObjectId, Pose>) -> Result<Posterior, ModelError> {
        let x = self.input(robot_pose, object_poses)?;
        Ok(self.model.posterior(&x)?)
    }

    pub fn truncated(&self, n: usize) -> FullStateModel {
        FullStateModel {
            model: self.model.truncated(n),
            input_spec: self.input_spec.clone(),
            object_order: self.object_order.clone(),
        }
    }
}
