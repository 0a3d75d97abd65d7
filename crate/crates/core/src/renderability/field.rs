//! Candidate evaluation, the field over a viewpoint grid, band selection and
//! the JSON-lines field format.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{angular_score, color_consistency, resolution_score, PairSampling, DEFAULT_PAIR_CAP};
use super::sampling::{direction_pose, sample_viewpoints};
use super::table::{build_observation_table, ObservationTable, Occlusion};
use crate::error::{Error, Result};
use crate::geometry::{camera_center, BoundingBox, CameraIntrinsics, ColorRGB, RigidPose, Vec3};
use crate::scene_io::Scene;
use crate::spatial::PointIndex;
use crate::visibility::{
    build_voxel_grid, default_voxel_cell, frustum_select, hidden_point_removal, observation_conflict, ViewStatus,
    VisibilityParams, DEFAULT_HPR_GAMMA, DEFAULT_MIN_CLEARANCE,
};

pub const DEFAULT_BAND: (f64, f64) = (0.1, 0.6);

/// Settings for building a field. `None` entries are derived from the scene.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldConfig {
    pub step: f64,
    pub bbox: Option<BoundingBox>,
    pub pseudo_intrinsics: Option<CameraIntrinsics>,
    pub voxel_cell: Option<f64>,
    pub interp_step: Option<f64>,
    pub exclude_radius: Option<f64>,
    pub min_clearance: f64,
    pub hpr_gamma: f64,
    /// Apply hidden point removal when associating points with source views.
    pub table_hpr: bool,
    pub pair_cap: usize,
    pub seed: u64,
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig {
            step: 1.0,
            bbox: None,
            pseudo_intrinsics: None,
            voxel_cell: None,
            interp_step: None,
            exclude_radius: None,
            min_clearance: DEFAULT_MIN_CLEARANCE,
            hpr_gamma: DEFAULT_HPR_GAMMA,
            table_hpr: true,
            pair_cap: DEFAULT_PAIR_CAP,
            seed: 0,
        }
    }
}

/// Mean per-point scores of a valid candidate and their product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewScores {
    pub consistency: f64,
    pub resolution: f64,
    pub angular: f64,
    pub renderability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoViewCandidate {
    pub position: Vec3,
    /// Index into the six axis directions.
    pub direction: u8,
    pub pose: RigidPose,
    pub status: ViewStatus,
    /// Present exactly when `status` is valid.
    pub scores: Option<ViewScores>,
}

impl PseudoViewCandidate {
    pub fn renderability(&self) -> Option<f64> {
        self.scores.map(|s| s.renderability)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderabilityField {
    pub bbox: BoundingBox,
    pub step: f64,
    pub intrinsics: CameraIntrinsics,
    pub candidates: Vec<PseudoViewCandidate>,
}

impl RenderabilityField {
    pub fn count(&self, status: ViewStatus) -> usize {
        self.candidates.iter().filter(|c| c.status == status).count()
    }
}

/// Everything shared by all candidate evaluations of one scene.
pub struct FieldContext<'a> {
    pub scene: &'a Scene,
    pub table: ObservationTable,
    pub params: VisibilityParams,
    pub intrinsics: CameraIntrinsics,
    index: PointIndex,
    /// Consistency score per point, computed once.
    consistency: Vec<f64>,
    /// Source centers per view slot (position in `scene.views`).
    view_centers: Vec<Vec3>,
    /// Observing view slots per point.
    sources: Vec<Vec<u32>>,
}

impl<'a> FieldContext<'a> {
    pub fn new(scene: &'a Scene, config: &FieldConfig) -> Result<Self> {
        if scene.cloud.is_empty() {
            return Err(Error::InvalidArgument("point cloud is empty".into()));
        }
        let intrinsics = match config.pseudo_intrinsics {
            Some(k) => k,
            None => {
                scene
                    .views
                    .first()
                    .ok_or_else(|| Error::InvalidArgument("scene has no source views".into()))?
                    .intrinsics
            }
        };
        let index = PointIndex::new(scene.cloud.positions());
        let cell = match config.voxel_cell {
            Some(c) => c,
            None => default_voxel_cell(&index, config.seed),
        };
        if !(cell > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "voxel cell must be positive, got {cell}"
            )));
        }
        let mut params = VisibilityParams::with_cell(cell);
        params.hpr_gamma = config.hpr_gamma;
        params.min_clearance = config.min_clearance;
        if let Some(s) = config.interp_step {
            params.interp_step = s;
        }
        if let Some(r) = config.exclude_radius {
            params.exclude_radius = r;
        }

        let occlusion = if config.table_hpr {
            Occlusion::HiddenPointRemoval {
                gamma: config.hpr_gamma,
            }
        } else {
            Occlusion::Ignore
        };
        let table = build_observation_table(scene, occlusion)?;
        let sampling = PairSampling::with_cap(config.pair_cap, config.seed);
        let consistency: Vec<f64> = (0..table.len())
            .into_par_iter()
            .map(|i| {
                let colors: Vec<ColorRGB> = table.observations(i).iter().map(|o| o.color).collect();
                color_consistency(&colors, &sampling, i as u64)
            })
            .collect();
        let slot: HashMap<u32, u32> = scene.views.iter().enumerate().map(|(s, v)| (v.id, s as u32)).collect();
        let sources = (0..table.len())
            .map(|i| table.observations(i).iter().map(|o| slot[&o.view_id]).collect())
            .collect();
        let view_centers = scene.views.iter().map(|v| camera_center(&v.pose)).collect();
        Ok(FieldContext {
            scene,
            table,
            params,
            intrinsics,
            index,
            consistency,
            view_centers,
            sources,
        })
    }

    /// Consistency score of one point.
    pub fn consistency(&self, point: usize) -> f64 {
        self.consistency[point]
    }

    /// Scores the pseudo-view at `position` looking along `direction`.
    pub fn evaluate(&self, position: &Vec3, direction: u8) -> Result<PseudoViewCandidate> {
        let pose = direction_pose(position, direction as usize);
        let (status, scores) = self.judge(&pose)?;
        Ok(PseudoViewCandidate {
            position: *position,
            direction,
            pose,
            status,
            scores,
        })
    }

    fn judge(&self, pose: &RigidPose) -> Result<(ViewStatus, Option<ViewScores>)> {
        let cloud = &self.scene.cloud;
        let center = camera_center(pose);
        let in_frustum = frustum_select(cloud, pose, &self.intrinsics);
        let visible = hidden_point_removal(cloud, &in_frustum, &center, self.params.hpr_gamma)?;
        let observed: Vec<usize> = visible
            .indices()
            .iter()
            .copied()
            .filter(|&i| self.table.is_observed(i))
            .collect();
        if observed.is_empty() {
            return Ok((ViewStatus::Empty, None));
        }

        let mut slots: Vec<u32> = observed.iter().flat_map(|&i| self.sources[i].iter().copied()).collect();
        slots.sort_unstable();
        slots.dedup();
        let centers: Vec<Vec3> = slots.iter().map(|&s| self.view_centers[s as usize]).collect();
        let grid = build_voxel_grid(cloud, &visible, self.params.voxel_cell)?;
        let status = observation_conflict(pose, &centers, &grid, &self.index, &self.params)?;
        if status != ViewStatus::Valid {
            return Ok((status, None));
        }

        let positions = cloud.positions();
        let (mut sum_c, mut sum_r, mut sum_a, mut n) = (0.0, 0.0, 0.0, 0usize);
        let mut point_sources = Vec::new();
        for &i in &observed {
            let p = &positions[i];
            point_sources.clear();
            point_sources.extend(self.sources[i].iter().map(|&s| self.view_centers[s as usize]));
            let h = self.consistency[i];
            // Points coinciding with a camera center have no defined angle.
            let (Ok(r), Ok(a)) = (
                resolution_score(p, &center, &point_sources, h),
                angular_score(p, &center, &point_sources, h),
            ) else {
                continue;
            };
            sum_c += h;
            sum_r += r;
            sum_a += a;
            n += 1;
        }
        if n == 0 {
            return Ok((ViewStatus::Empty, None));
        }
        let nf = n as f64;
        let (consistency, resolution, angular) = (sum_c / nf, sum_r / nf, sum_a / nf);
        Ok((
            status,
            Some(ViewScores {
                consistency,
                resolution,
                angular,
                renderability: consistency * resolution * angular,
            }),
        ))
    }
}

/// Evaluates all six directions at every grid position inside the box.
///
/// Candidates are ordered by position (lexicographic grid order) and then by
/// direction, whatever the thread count.
pub fn build_field(scene: &Scene, config: &FieldConfig) -> Result<RenderabilityField> {
    let ctx = FieldContext::new(scene, config)?;
    let bbox = match config.bbox {
        Some(b) => b,
        None => scene
            .cloud
            .bounding_box()
            .ok_or_else(|| Error::InvalidArgument("point cloud is empty".into()))?,
    };
    let positions = sample_viewpoints(&bbox, config.step)?;
    let candidates = (0..positions.len() * 6)
        .into_par_iter()
        .map(|i| ctx.evaluate(&positions[i / 6], (i % 6) as u8))
        .collect::<Result<Vec<_>>>()?;
    Ok(RenderabilityField {
        bbox,
        step: config.step,
        intrinsics: ctx.intrinsics,
        candidates,
    })
}

/// Valid candidates whose renderability lies in `[lo, hi]`, weakest first.
/// Equal values keep their field order.
pub fn select_pseudo_views(candidates: &[PseudoViewCandidate], lo: f64, hi: f64) -> Result<Vec<PseudoViewCandidate>> {
    if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "band [{lo}, {hi}] is not inside [0, 1]"
        )));
    }
    let mut out: Vec<PseudoViewCandidate> = candidates
        .iter()
        .filter(|c| c.status == ViewStatus::Valid && c.renderability().is_some_and(|v| lo <= v && v <= hi))
        .cloned()
        .collect();
    out.sort_by(|a, b| a.renderability().unwrap().total_cmp(&b.renderability().unwrap()));
    Ok(out)
}

/// One line of the field export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldRecord {
    pub pos: [f64; 3],
    pub dir: u8,
    pub status: ViewStatus,
    pub h_geo: Option<f64>,
    pub h_res: Option<f64>,
    pub h_ang: Option<f64>,
    pub v: Option<f64>,
}

impl From<&PseudoViewCandidate> for FieldRecord {
    fn from(c: &PseudoViewCandidate) -> Self {
        FieldRecord {
            pos: [c.position.x, c.position.y, c.position.z],
            dir: c.direction,
            status: c.status,
            h_geo: c.scores.map(|s| s.consistency),
            h_res: c.scores.map(|s| s.resolution),
            h_ang: c.scores.map(|s| s.angular),
            v: c.scores.map(|s| s.renderability),
        }
    }
}

impl FieldRecord {
    pub fn into_candidate(self) -> Result<PseudoViewCandidate> {
        if self.dir > 5 {
            return Err(Error::InvalidArgument(format!("direction {} out of range", self.dir)));
        }
        let scores = match (self.status, self.h_geo, self.h_res, self.h_ang, self.v) {
            (ViewStatus::Valid, Some(consistency), Some(resolution), Some(angular), Some(renderability)) => {
                Some(ViewScores {
                    consistency,
                    resolution,
                    angular,
                    renderability,
                })
            }
            (ViewStatus::Valid, ..) => {
                return Err(Error::InvalidArgument("valid candidate without scores".into()));
            }
            _ => None,
        };
        let position = Vec3::from(self.pos);
        Ok(PseudoViewCandidate {
            position,
            direction: self.dir,
            pose: direction_pose(&position, self.dir as usize),
            status: self.status,
            scores,
        })
    }
}

pub fn write_field_jsonl<W: Write>(candidates: &[PseudoViewCandidate], mut out: W) -> std::io::Result<()> {
    for c in candidates {
        serde_json::to_writer(&mut out, &FieldRecord::from(c))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Parses a field export; blank lines are skipped.
pub fn read_field_jsonl<R: BufRead>(input: R) -> Result<Vec<PseudoViewCandidate>> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let record_err = |message: String| Error::Record {
            what: "field",
            line: n + 1,
            message,
        };
        let line = line.map_err(|e| record_err(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: FieldRecord = serde_json::from_str(&line).map_err(|e| record_err(e.to_string()))?;
        out.push(rec.into_candidate().map_err(|e| record_err(e.to_string()))?);
    }
    Ok(out)
}
