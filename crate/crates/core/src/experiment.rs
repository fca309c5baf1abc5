//! The three experiment drivers: open-loop probing of one object, open-loop
//! probing of several, and a planning episode, plus artifact emission.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, SceneConfig};
use crate::field::{self, Channel, FieldError, FieldGrid, FieldSource, GridSpec, SnapshotMeta};
use crate::geometry::Pose;
use crate::object_model::{FullStateModel, ModelError, ObjectCentricModel, ObjectId};
use crate::planner::{
    self, learn_from_step, ring_poses, run_episode, run_straight_line, EpisodeReport, EpisodeStep, PlanError,
    StepKind,
};
use crate::sim::{self, SceneState, SimError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Overrides the single object's tip fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeVariant {
    /// κ = 1: contact only tips the object.
    Tipping,
    /// κ = 0: contact only slides the object.
    Pushing,
}

impl ProbeVariant {
    pub fn tip_fraction(&self) -> f64 {
        match self {
            ProbeVariant::Tipping => 1.0,
            ProbeVariant::Pushing => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ProbeSingle,
    ProbeMulti,
    Plan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub success: bool,
    pub steps: usize,
    pub fallen: usize,
    pub max_true_tip: BTreeMap<ObjectId, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub steps: usize,
    pub success: Option<bool>,
    pub fallen: usize,
    pub max_true_tip: BTreeMap<ObjectId, f64>,
    pub step_kinds: BTreeMap<String, usize>,
    pub safety_violations: usize,
    pub final_object_poses: BTreeMap<ObjectId, Pose>,
    pub model_sizes: BTreeMap<ObjectId, usize>,
    pub snapshot_timesteps: Vec<usize>,
    pub baseline: Option<BaselineSummary>,
}

/// Everything an experiment produces, before it is written to disk.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub config: SceneConfig,
    pub initial_state: SceneState,
    pub replay: Vec<EpisodeStep>,
    pub grids: Vec<FieldGrid>,
    pub summary: Summary,
    pub object_model: ObjectCentricModel,
    pub full_state_model: Option<FullStateModel>,
    pub report: Option<EpisodeReport>,
}

/// Options shared by every experiment.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub snapshots: Option<usize>,
}

impl RunOptions {
    fn apply(&self, cfg: &SceneConfig) -> Result<SceneConfig, ConfigError> {
        let mut cfg = cfg.clone();
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(n) = self.snapshots {
            cfg.snapshots = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Step counts at which snapshots are taken: `round(k T / n)` for `k = 1..=n`.
pub fn snapshot_timesteps(total: usize, n: usize) -> Vec<usize> {
    (1..=n)
        .map(|k| ((k * total) as f64 / n as f64).round() as usize)
        .collect()
}

fn grid_spec(cfg: &SceneConfig) -> GridSpec {
    GridSpec {
        bounds: cfg.workspace,
        nx: cfg.grid.nx,
        ny: cfg.grid.ny,
    }
}

/// Seeds both models with zero-tip samples around the robot start.
fn seed_models(
    cfg: &SceneConfig,
    state: &SceneState,
    oc: &mut ObjectCentricModel,
    fs: &mut FullStateModel,
) -> Result<(), ExperimentError> {
    let poses = state.object_poses();
    for robot in ring_poses(state, cfg.seed_ring.count, cfg.seed_ring.radius) {
        for (id, pose) in &poses {
            let x = oc.relative_input(&robot, pose)?;
            oc.update_relative(*id, &x, 0.0)?;
        }
        fs.update(&robot, &poses, 0.0)?;
    }
    Ok(())
}

fn state_at<'a>(initial: &'a SceneState, replay: &'a [EpisodeStep], t: usize) -> &'a SceneState {
    if t == 0 {
        initial
    } else {
        &replay[t - 1].result.new_state
    }
}

fn probe_common(cfg: &SceneConfig, kind: ExperimentKind) -> Result<Artifacts, ExperimentError> {
    let state = cfg.scene_state();
    let mut oc = cfg.object_centric_model()?;
    let mut fs = cfg.full_state_model()?;
    seed_models(cfg, &state, &mut oc, &mut fs)?;
    let oc_seeded = oc.sizes();
    let fs_seeded = fs.gp().len();

    let path = sim::subdivide_path(state.robot_xy(), &cfg.probe.waypoints, cfg.sim.max_step);
    let results = sim::probe_trajectory(&state, &path, cfg.seed)?;
    let mut replay = Vec::with_capacity(results.len());
    let mut fs_sizes = vec![fs_seeded];
    for (index, result) in results.into_iter().enumerate() {
        learn_from_step(&mut oc, &result)?;
        let y_max = result.observations.values().cloned().fold(f64::NEG_INFINITY, f64::max);
        fs.update(&result.new_state.robot, &result.new_state.object_poses(), y_max)?;
        fs_sizes.push(fs.gp().len());
        replay.push(EpisodeStep {
            index,
            plan: None,
            result,
            model_sizes: oc.sizes(),
        });
    }

    let timesteps = snapshot_timesteps(replay.len(), cfg.snapshots);
    let spec = grid_spec(cfg);
    let oc_kind_is_composite = cfg.objects.len() > 1;
    let mut grids = Vec::new();
    for (snapshot, &t) in timesteps.iter().enumerate() {
        let sizes = if t == 0 { oc_seeded.clone() } else { replay[t - 1].model_sizes.clone() };
        let oc_t = oc.truncated(&sizes);
        let fs_t = fs.truncated(fs_sizes[t]);
        let s = state_at(&state, &replay, t);
        let poses = s.object_poses();
        let meta = SnapshotMeta {
            snapshot,
            timestep: t,
            object_poses: poses.clone(),
        };
        let oc_source = if oc_kind_is_composite {
            FieldSource::Composite(&oc_t)
        } else {
            let id = cfg.object_ids()[0];
            FieldSource::Object(&oc_t, id)
        };
        grids.push(field::render_field(oc_source, &s.robot, &poses, &spec, meta.clone())?);
        grids.push(field::render_field(FieldSource::FullState(&fs_t), &s.robot, &poses, &spec, meta)?);
    }

    let final_state = state_at(&state, &replay, replay.len()).clone();
    let summary = Summary {
        experiment: kind,
        seed: cfg.seed,
        steps: replay.len(),
        success: None,
        fallen: final_state.fallen_count(),
        max_true_tip: max_true_tips(&state, &replay),
        step_kinds: BTreeMap::new(),
        safety_violations: 0,
        final_object_poses: final_state.object_poses(),
        model_sizes: oc.sizes(),
        snapshot_timesteps: timesteps,
        baseline: None,
    };
    Ok(Artifacts {
        config: cfg.clone(),
        initial_state: state,
        replay,
        grids,
        summary,
        object_model: oc,
        full_state_model: Some(fs),
        report: None,
    })
}

fn max_true_tips(initial: &SceneState, replay: &[EpisodeStep]) -> BTreeMap<ObjectId, f64> {
    let mut out: BTreeMap<ObjectId, f64> = initial.objects.iter().map(|(id, o)| (*id, o.tip_angle)).collect();
    for s in replay {
        for (id, o) in &s.result.new_state.objects {
            let m = out.entry(*id).or_insert(0.0);
            *m = m.max(o.tip_angle);
        }
    }
    out
}

/// Open-loop probing of a single object.
pub fn run_probe_single(
    cfg: &SceneConfig,
    variant: Option<ProbeVariant>,
    opts: RunOptions,
) -> Result<Artifacts, ExperimentError> {
    let mut cfg = opts.apply(cfg)?;
    if cfg.objects.len() != 1 {
        return Err(ConfigError::Invalid(format!("probe-single needs exactly one object, found {}", cfg.objects.len())).into());
    }
    if let Some(v) = variant {
        cfg.objects[0].params.tip_fraction = v.tip_fraction();
    }
    probe_common(&cfg, ExperimentKind::ProbeSingle)
}

/// Open-loop probing through several objects.
pub fn run_probe_multi(cfg: &SceneConfig, opts: RunOptions) -> Result<Artifacts, ExperimentError> {
    let cfg = opts.apply(cfg)?;
    if cfg.objects.len() < 2 {
        return Err(ConfigError::Invalid(format!("probe-multi needs at least two objects, found {}", cfg.objects.len())).into());
    }
    probe_common(&cfg, ExperimentKind::ProbeMulti)
}

/// Planning episode on the configured scene, with the straight-line baseline
/// run alongside for comparison.
pub fn run_plan(cfg: &SceneConfig, opts: RunOptions) -> Result<Artifacts, ExperimentError> {
    let cfg = opts.apply(cfg)?;
    let pcfg = cfg.planner_config()?;
    let state = cfg.scene_state();
    let mut oc = cfg.object_centric_model()?;
    planner::seed_prior_space(&mut oc, &state, &pcfg)?;
    let report = run_episode(&mut oc, &state, &pcfg, cfg.seed)?;
    let baseline = run_straight_line(&state, &pcfg, cfg.seed)?;

    let replay = report.steps.clone();
    let timesteps = snapshot_timesteps(replay.len(), cfg.snapshots);
    let spec = grid_spec(&cfg);
    let mut grids = Vec::new();
    for (snapshot, &t) in timesteps.iter().enumerate() {
        let sizes = if t == 0 {
            report.initial_model_sizes.clone()
        } else {
            replay[t - 1].model_sizes.clone()
        };
        let oc_t = oc.truncated(&sizes);
        let s = state_at(&state, &replay, t);
        let poses = s.object_poses();
        let meta = SnapshotMeta {
            snapshot,
            timestep: t,
            object_poses: poses.clone(),
        };
        grids.push(field::render_field(FieldSource::Composite(&oc_t), &s.robot, &poses, &spec, meta)?);
    }

    let final_state = report.final_state(&state).clone();
    let step_kinds = [StepKind::Advance, StepKind::Probe, StepKind::Retreat]
        .iter()
        .map(|k| (serde_json::to_value(k).expect("kind").as_str().expect("str").to_string(), report.count_kind(*k)))
        .collect();
    let summary = Summary {
        experiment: ExperimentKind::Plan,
        seed: cfg.seed,
        steps: report.step_count(),
        success: Some(report.success),
        fallen: report.fallen,
        max_true_tip: report.max_true_tip.clone(),
        step_kinds,
        safety_violations: report.safety_violations(pcfg.theta_max).len(),
        final_object_poses: final_state.object_poses(),
        model_sizes: oc.sizes(),
        snapshot_timesteps: timesteps,
        baseline: Some(BaselineSummary {
            success: baseline.success,
            steps: baseline.step_count(),
            fallen: baseline.fallen,
            max_true_tip: baseline.max_true_tip.clone(),
        }),
    };
    Ok(Artifacts {
        config: cfg.clone(),
        initial_state: state,
        replay,
        grids,
        summary,
        object_model: oc,
        full_state_model: None,
        report: Some(report),
    })
}

/// Fixed colour-scale ceiling shared by every snapshot of a run.
pub fn color_scale_max(cfg: &SceneConfig) -> f64 {
    cfg.gp.alpha.sqrt() * (1.0 + cfg.model.beta)
}

/// Writes `config.json`, `replay.jsonl`, `fields.csv`, `summary.json` and,
/// unless disabled, `heatmaps/*.png` into `out_dir`.
pub fn write_artifacts(artifacts: &Artifacts, out_dir: &Path, images: bool) -> Result<(), ExperimentError> {
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("config.json"), artifacts.config.to_json() + "\n")?;

    let mut replay = BufWriter::new(File::create(out_dir.join("replay.jsonl"))?);
    for step in &artifacts.replay {
        serde_json::to_writer(&mut replay, step).map_err(std::io::Error::from)?;
        replay.write_all(b"\n")?;
    }
    replay.flush()?;

    let csv_file = BufWriter::new(File::create(out_dir.join("fields.csv"))?);
    field::write_csv(&artifacts.grids, csv_file)?;

    let summary = serde_json::to_string_pretty(&artifacts.summary).map_err(std::io::Error::from)?;
    fs::write(out_dir.join("summary.json"), summary + "\n")?;

    if images {
        let dir = out_dir.join("heatmaps");
        fs::create_dir_all(&dir)?;
        let vmax = color_scale_max(&artifacts.config);
        for g in &artifacts.grids {
            for (channel, name) in [(Channel::Mean, "mean"), (Channel::Std, "std")] {
                let file = dir.join(format!("{}_{}_s{}.png", g.kind.as_str(), name, g.meta.snapshot));
                field::save_heatmap(g, channel, vmax, &file)?;
            }
        }
    }
    Ok(())
}

/// Reads a replay log back.
pub fn read_replay(path: &Path) -> Result<Vec<EpisodeStep>, ExperimentError> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| ExperimentError::Io(e.into())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_cadence() {
        assert_eq!(snapshot_timesteps(40, 4), vec![10, 20, 30, 40]);
        assert_eq!(snapshot_timesteps(0, 4), vec![0, 0, 0, 0]);
        assert_eq!(snapshot_timesteps(10, 3), vec![3, 7, 10]);
    }
}
