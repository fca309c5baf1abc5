//! Rasterised mean/std predictions over end-effector positions in the table
//! plane, with CSV and heatmap output.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use image::{Rgb, RgbImage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Pose;
use crate::object_model::{FullStateModel, ModelError, ObjectCentricModel, ObjectId};
use crate::sim::Rect;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("image: {0}")]
    Image(#[from] image::ImageError),
    #[error("malformed field csv: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    ObjectCentric,
    Composite,
    FullState,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::ObjectCentric => "object_centric",
            ModelKind::Composite => "composite",
            ModelKind::FullState => "full_state",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "object_centric" => Some(ModelKind::ObjectCentric),
            "composite" => Some(ModelKind::Composite),
            "full_state" => Some(ModelKind::FullState),
            _ => None,
        }
    }
}

/// Which model a grid is rendered from.
#[derive(Clone, Copy)]
pub enum FieldSource<'a> {
    /// A single object's GP.
    Object(&'a ObjectCentricModel, ObjectId),
    /// Worst case across objects, using the model's β.
    Composite(&'a ObjectCentricModel),
    FullState(&'a FullStateModel),
}

impl FieldSource<'_> {
    pub fn kind(&self) -> ModelKind {
        match self {
            FieldSource::Object(..) => ModelKind::ObjectCentric,
            FieldSource::Composite(_) => ModelKind::Composite,
            FieldSource::FullState(_) => ModelKind::FullState,
        }
    }

    /// Mean and std at one end-effector pose.
    pub fn evaluate(&self, robot: &Pose, object_poses: &BTreeMap<ObjectId, Pose>) -> Result<(f64, f64), ModelError> {
        match self {
            FieldSource::Object(model, id) => {
                let pose = object_poses.get(id).ok_or(ModelError::MissingPose(*id))?;
                let p = model.predict(*id, robot, pose)?;
                Ok((p.mean, p.std()))
            }
            FieldSource::Composite(model) => {
                let c = model.composite_predict(robot, object_poses)?;
                Ok((c.mean, c.std))
            }
            FieldSource::FullState(model) => {
                let p = model.predict(robot, object_poses)?;
                Ok((p.mean, p.std()))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub bounds: Rect,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn xs(&self) -> Vec<f64> {
        ticks(self.bounds.min[0], self.bounds.max[0], self.nx)
    }

    pub fn ys(&self) -> Vec<f64> {
        ticks(self.bounds.min[1], self.bounds.max[1], self.ny)
    }
}

fn ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct SnapshotMeta {
    pub snapshot: usize,
    /// Number of simulation steps taken when the snapshot was rendered.
    pub timestep: usize,
    pub object_poses: BTreeMap<ObjectId, Pose>,
}

/// Values are stored row-major with `ys` indexing rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub kind: ModelKind,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub meta: SnapshotMeta,
}

impl FieldGrid {
    pub fn at(&self, ix: usize, iy: usize) -> (f64, f64) {
        let k = iy * self.xs.len() + ix;
        (self.mean[k], self.std[k])
    }
}

/// Evaluates `source` at every grid cell with the end effector at `robot`'s
/// height and orientation.
pub fn render_field(
    source: FieldSource<'_>,
    robot: &Pose,
    object_poses: &BTreeMap<ObjectId, Pose>,
    spec: &GridSpec,
    meta: SnapshotMeta,
) -> Result<FieldGrid, FieldError> {
    let xs = spec.xs();
    let ys = spec.ys();
    let cells: Vec<(f64, f64)> = ys.iter().flat_map(|&y| xs.iter().map(move |&x| (x, y))).collect();
    let values = cells
        .par_iter()
        .map(|&(x, y)| {
            let pose = Pose::new([x, y, robot.position[2]], robot.orientation);
            source.evaluate(&pose, object_poses)
        })
        .collect::<Result<Vec<_>, ModelError>>()?;
    let (mean, std) = values.into_iter().unzip();
    Ok(FieldGrid {
        kind: source.kind(),
        xs,
        ys,
        mean,
        std,
        meta,
    })
}

const CSV_HEADER: [&str; 6] = ["snapshot", "x", "y", "mean", "std", "model_kind"];

/// Long-form CSV: one row per cell per grid. Numbers use the shortest
/// representation that parses back to the same bits.
pub fn write_csv<W: Write>(grids: &[FieldGrid], out: W) -> Result<(), FieldError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for g in grids {
        let snapshot = g.meta.snapshot.to_string();
        for (iy, y) in g.ys.iter().enumerate() {
            for (ix, x) in g.xs.iter().enumerate() {
                let (m, s) = g.at(ix, iy);
                w.write_record([
                    snapshot.as_str(),
                    &format!("{x:?}"),
                    &format!("{y:?}"),
                    &format!("{m:?}"),
                    &format!("{s:?}"),
                    g.kind.as_str(),
                ])?;
            }
        }
    }
    w.flush().map_err(|e| FieldError::Csv(e.into()))?;
    Ok(())
}

/// Reads grids written by [`write_csv`]. Only the snapshot index of the
/// metadata survives the trip.
pub fn read_csv<R: Read>(input: R) -> Result<Vec<FieldGrid>, FieldError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(FieldError::Malformed(format!("unexpected header {header:?}")));
    }
    let bad = |m: &str| FieldError::Malformed(m.to_string());
    let mut grids: Vec<FieldGrid> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let num = |i: usize| rec[i].parse::<f64>().map_err(|_| bad("bad number"));
        let snapshot: usize = rec[0].parse().map_err(|_| bad("bad snapshot"))?;
        let kind = ModelKind::parse(&rec[5]).ok_or_else(|| bad("bad model kind"))?;
        let (x, y, m, s) = (num(1)?, num(2)?, num(3)?, num(4)?);
        let same = grids
            .last()
            .is_some_and(|g| g.kind == kind && g.meta.snapshot == snapshot);
        if !same {
            grids.push(FieldGrid {
                kind,
                xs: Vec::new(),
                ys: Vec::new(),
                mean: Vec::new(),
                std: Vec::new(),
                meta: SnapshotMeta {
                    snapshot,
                    ..SnapshotMeta::default()
                },
            });
        }
        let g = grids.last_mut().expect("pushed above");
        if g.ys.last().map(|v| v.to_bits()) != Some(y.to_bits()) {
            g.ys.push(y);
        }
        if g.ys.len() == 1 {
            g.xs.push(x);
        }
        g.mean.push(m);
        g.std.push(s);
    }
    for g in &grids {
        if g.mean.len() != g.xs.len() * g.ys.len() {
            return Err(bad("ragged grid"));
        }
    }
    Ok(grids)
}

/// Pixels per grid cell in heatmap images.
const CELL_PIXELS: u32 = 4;

const PALETTE: [[f64; 3]; 5] = [
    [68.0, 1.0, 84.0],
    [59.0, 82.0, 139.0],
    [33.0, 145.0, 140.0],
    [94.0, 201.0, 98.0],
    [253.0, 231.0, 37.0],
];

fn colormap(t: f64) -> Rgb<u8> {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let pos = t * (PALETTE.len() - 1) as f64;
    let i = (pos.floor() as usize).min(PALETTE.len() - 2);
    let f = pos - i as f64;
    let c = |k: usize| (PALETTE[i][k] + (PALETTE[i + 1][k] - PALETTE[i][k]) * f).round() as u8;
    Rgb([c(0), c(1), c(2)])
}

/// Which grid quantity to draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Mean,
    Std,
}

/// Raster image of one channel on the fixed scale `[0, vmax]`, +y up.
pub fn heatmap(grid: &FieldGrid, channel: Channel, vmax: f64) -> RgbImage {
    let nx = grid.xs.len() as u32;
    let ny = grid.ys.len() as u32;
    let values = match channel {
        Channel::Mean => &grid.mean,
        Channel::Std => &grid.std,
    };
    RgbImage::from_fn(nx * CELL_PIXELS, ny * CELL_PIXELS, |px, py| {
        let ix = (px / CELL_PIXELS) as usize;
        let iy = (ny - 1 - py / CELL_PIXELS) as usize;
        colormap(values[iy * nx as usize + ix] / vmax)
    })
}

pub fn save_heatmap(grid: &FieldGrid, channel: Channel, vmax: f64, path: &Path) -> Result<(), FieldError> {
    heatmap(grid, channel, vmax).save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}
