//! Online learning of robot–object interaction outcomes with Gaussian
//! processes defined over the robot pose expressed in each object's frame.
//!
//! * [`geometry`]: poses, quaternions, and the world → object frame change.
//! * [`gp`]: RBF Gaussian process with `O(n²)` online insertion.
//! * [`object_model`]: per-object GPs, the world-frame baseline, and the
//!   worst-case composition over objects.
//! * [`sim`]: quasi-static tabletop world with tipping and sliding objects.
//! * [`planner`]: upper-confidence-bound constrained greedy planner.
//! * [`config`], [`field`], [`experiment`]: scene files, field grids, and the
//!   experiment drivers behind the `ocgp` binary.

// Validation uses `!(x > 0.0)` so that NaN is rejected along with bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiment;
pub mod field;
pub mod geometry;
pub mod gp;
pub mod object_model;
pub mod planner;
pub mod sim;

pub use config::SceneConfig;
pub use geometry::{Pose, Quaternion, RigidTransform};
pub use gp::{GpModel, KernelParams, Posterior};
pub use object_model::{CompositePrediction, FullStateModel, InputSpec, ObjectCentricModel, ObjectId};
pub use planner::{EpisodeReport, PlanStep, PlannerConfig, StepKind};
pub use sim::{ObjectParams, Rect, SceneState};
