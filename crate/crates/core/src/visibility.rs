//! Point visibility from a viewpoint and line-of-sight tests between viewpoints.
//!
//! Hidden point removal uses spherical flipping: points are reflected through
//! a large sphere centered on the viewpoint and the ones landing on the convex
//! hull of the reflected set (plus the viewpoint) are the visible ones.
//! Line of sight is tested by sampling the segment between two camera centers
//! against a voxelization of what one of them sees.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{camera_center, project_point, CameraIntrinsics, RigidPose, Vec3};
use crate::hull::convex_hull;
use crate::scene_io::{cell_index, PointCloud};
use crate::spatial::{median_nearest_spacing, PointIndex};

pub const DEFAULT_HPR_GAMMA: f64 = 100.0;
pub const DEFAULT_MIN_CLEARANCE: f64 = 0.5;
/// Voxel edge as a multiple of the median nearest-neighbor spacing.
pub const VOXEL_SPACING_FACTOR: f64 = 4.0;
pub const SPACING_SAMPLE: usize = 1000;
/// Used when the cloud is too small or too degenerate to estimate spacing.
pub const FALLBACK_VOXEL_CELL: f64 = 0.1;

/// Sorted, duplicate-free indices into a point cloud.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VisibleSubset(Vec<usize>);

impl VisibleSubset {
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        VisibleSubset(indices)
    }

    /// Every index of a cloud with `n` points.
    pub fn all(n: usize) -> Self {
        VisibleSubset((0..n).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn is_subset_of(&self, other: &VisibleSubset) -> bool {
        self.0.iter().all(|&i| other.contains(i))
    }
}

/// Points in front of the camera whose projection lands inside the image.
pub fn frustum_select(cloud: &PointCloud, pose: &RigidPose, k: &CameraIntrinsics) -> VisibleSubset {
    VisibleSubset(
        cloud
            .positions()
            .iter()
            .enumerate()
            .filter(|(_, p)| project_point(p, pose, k).is_some_and(|proj| k.contains(proj.pixel)))
            .map(|(i, _)| i)
            .collect(),
    )
}

/// Spherical-flipping hidden point removal restricted to `subset`.
///
/// The flipping radius is `gamma` times the farthest subset point's distance.
/// Because hiding that farthest point shrinks the radius, a single pass is not
/// stable under re-application; passes repeat on their own output until the
/// set stops shrinking, which makes the result idempotent.
/// When the flipped set has no proper 3D hull every point is reported
/// visible. A point coinciding with the viewpoint is never visible.
pub fn hidden_point_removal(
    cloud: &PointCloud,
    subset: &VisibleSubset,
    viewpoint: &Vec3,
    gamma: f64,
) -> Result<VisibleSubset> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "hpr gamma must be positive, got {gamma}"
        )));
    }
    let mut current = flip_pass(cloud, subset, viewpoint, gamma);
    loop {
        let next = flip_pass(cloud, &current, viewpoint, gamma);
        if next.len() == current.len() {
            return Ok(current);
        }
        current = next;
    }
}

/// One flip-and-hull pass.
fn flip_pass(cloud: &PointCloud, subset: &VisibleSubset, viewpoint: &Vec3, gamma: f64) -> VisibleSubset {
    let positions = cloud.positions();
    let mut ids = Vec::with_capacity(subset.len());
    let mut offsets = Vec::with_capacity(subset.len());
    for &i in subset.indices() {
        let q = positions[i] - viewpoint;
        if q.norm() > 0.0 {
            ids.push(i);
            offsets.push(q);
        }
    }
    let max_range = offsets.iter().map(|q| q.norm()).fold(0.0, f64::max);
    let radius = gamma * max_range;
    let mut flipped: Vec<Vec3> = offsets
        .iter()
        .map(|q| {
            let n = q.norm();
            q + q * (2.0 * (radius - n) / n)
        })
        .collect();
    flipped.push(Vec3::zeros());
    match convex_hull(&flipped) {
        Ok(hull) => VisibleSubset(
            hull.vertices
                .into_iter()
                .filter(|&v| v < ids.len())
                .map(|v| ids[v])
                .collect(),
        ),
        Err(_) => VisibleSubset(ids),
    }
}

/// Occupied cells of a regular grid.
#[derive(Debug, Clone)]
pub struct VoxelGrid {
    pub origin: Vec3,
    pub cell: f64,
    occupied: HashSet<[i64; 3]>,
}

impl VoxelGrid {
    pub fn new(origin: Vec3, cell: f64) -> Result<Self> {
        if !(cell > 0.0) || !cell.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "voxel cell must be positive, got {cell}"
            )));
        }
        Ok(VoxelGrid {
            origin,
            cell,
            occupied: HashSet::new(),
        })
    }

    pub fn index(&self, p: &Vec3) -> [i64; 3] {
        cell_index(p, &self.origin, self.cell)
    }

    pub fn insert(&mut self, p: &Vec3) {
        let key = self.index(p);
        self.occupied.insert(key);
    }

    pub fn is_occupied(&self, p: &Vec3) -> bool {
        self.occupied.contains(&self.index(p))
    }

    pub fn contains_cell(&self, key: &[i64; 3]) -> bool {
        self.occupied.contains(key)
    }

    pub fn len(&self) -> usize {
        self.occupied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied.is_empty()
    }

    /// Occupied cells in sorted order.
    pub fn cells(&self) -> Vec<[i64; 3]> {
        let mut cells: Vec<_> = self.occupied.iter().copied().collect();
        cells.sort_unstable();
        cells
    }
}

/// Voxelizes the points of `subset`, with the grid anchored at the world origin.
pub fn build_voxel_grid(cloud: &PointCloud, subset: &VisibleSubset, cell: f64) -> Result<VoxelGrid> {
    let mut grid = VoxelGrid::new(Vec3::zeros(), cell)?;
    for &i in subset.indices() {
        grid.insert(&cloud.positions()[i]);
    }
    Ok(grid)
}

/// Samples the segment `a`-`b` at uniform spacing no larger than `step`,
/// endpoints included, and reports whether a sample farther than
/// `exclude_radius` from both endpoints falls in an occupied voxel.
///
/// The endpoints are put in a canonical order first so the sample positions,
/// and therefore the answer, do not depend on argument order.
pub fn segment_blocked(grid: &VoxelGrid, a: &Vec3, b: &Vec3, step: f64, exclude_radius: f64) -> Result<bool> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "interpolation step must be positive, got {step}"
        )));
    }
    let length = (b - a).norm();
    if length == 0.0 || grid.is_empty() {
        return Ok(false);
    }
    let (from, to) = if a.as_slice() <= b.as_slice() { (a, b) } else { (b, a) };
    let n = (length / step).ceil().max(1.0) as usize;
    let delta = to - from;
    for k in 0..=n {
        let s = from + delta * (k as f64 / n as f64);
        if (s - from).norm() <= exclude_radius || (s - to).norm() <= exclude_radius {
            continue;
        }
        if grid.is_occupied(&s) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Outcome of judging a candidate view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewStatus {
    Valid,
    NoCoverage,
    Blocked,
    TooClose,
    Empty,
}

impl ViewStatus {
    pub const ALL: [ViewStatus; 5] = [
        ViewStatus::Valid,
        ViewStatus::NoCoverage,
        ViewStatus::Blocked,
        ViewStatus::TooClose,
        ViewStatus::Empty,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ViewStatus::Valid => "valid",
            ViewStatus::NoCoverage => "no_coverage",
            ViewStatus::Blocked => "blocked",
            ViewStatus::TooClose => "too_close",
            ViewStatus::Empty => "empty",
        }
    }
}

/// Tunables of the visibility stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisibilityParams {
    pub hpr_gamma: f64,
    pub voxel_cell: f64,
    pub interp_step: f64,
    pub exclude_radius: f64,
    pub min_clearance: f64,
}

impl VisibilityParams {
    /// Defaults derived from a voxel edge: half-cell steps, one-cell endpoint exemption.
    pub fn with_cell(voxel_cell: f64) -> Self {
        VisibilityParams {
            hpr_gamma: DEFAULT_HPR_GAMMA,
            voxel_cell,
            interp_step: voxel_cell / 2.0,
            exclude_radius: voxel_cell,
            min_clearance: DEFAULT_MIN_CLEARANCE,
        }
    }
}

/// Voxel edge of `VOXEL_SPACING_FACTOR` times the median nearest-neighbor
/// spacing, estimated on a seeded sample.
pub fn default_voxel_cell(index: &PointIndex, seed: u64) -> f64 {
    match median_nearest_spacing(index, SPACING_SAMPLE, seed) {
        Some(s) if s > 0.0 && s.is_finite() => VOXEL_SPACING_FACTOR * s,
        _ => FALLBACK_VOXEL_CELL,
    }
}

/// Judges whether a pseudo-view has a genuine line of sight to its sources.
///
/// `grid` must voxelize the pseudo-view's visible sub-map and `index` the
/// whole cloud. Checks run in order: clearance, coverage, occlusion.
pub fn observation_conflict(
    pseudo_pose: &RigidPose,
    source_centers: &[Vec3],
    grid: &VoxelGrid,
    index: &PointIndex,
    params: &VisibilityParams,
) -> Result<ViewStatus> {
    let center = camera_center(pseudo_pose);
    if let Some((_, d)) = index.nearest(&center, None) {
        if d < params.min_clearance {
            return Ok(ViewStatus::TooClose);
        }
    }
    if source_centers.is_empty() {
        return Ok(ViewStatus::NoCoverage);
    }
    for s in source_centers {
        if !segment_blocked(grid, &center, s, params.interp_step, params.exclude_radius)? {
            return Ok(ViewStatus::Valid);
        }
    }
    Ok(ViewStatus::Blocked)
}
