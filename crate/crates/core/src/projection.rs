//! Z-buffered point splatting into an image.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{project_point, CameraIntrinsics, ColorRGB, RigidPose};
use crate::scene_io::{voxel_downsample, ColorImage, PointCloud, Scene};

pub const DEFAULT_SPLAT_RADIUS: u32 = 1;

/// Depth differences at or below this are ties, resolved by point index.
const DEPTH_TIE: f64 = 1e-9;

/// Color, depth and coverage of a rendered projection. Uncovered pixels are
/// black with infinite depth.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionImage {
    pub rgb: ColorImage,
    depth: Vec<f64>,
}

impl ProjectionImage {
    pub fn width(&self) -> u32 {
        self.rgb.width()
    }

    pub fn height(&self) -> u32 {
        self.rgb.height()
    }

    /// Row-major depths in meters; `f64::INFINITY` where nothing landed.
    pub fn depth(&self) -> &[f64] {
        &self.depth
    }

    pub fn depth_at(&self, x: u32, y: u32) -> f64 {
        self.depth[(y * self.width() + x) as usize]
    }

    /// Row-major coverage mask.
    pub fn mask(&self) -> Vec<bool> {
        self.depth.iter().map(|d| d.is_finite()).collect()
    }

    pub fn covered(&self, x: u32, y: u32) -> bool {
        self.depth_at(x, y).is_finite()
    }

    pub fn coverage(&self) -> f64 {
        let n = self.depth.len();
        if n == 0 {
            return 0.0;
        }
        self.depth.iter().filter(|d| d.is_finite()).count() as f64 / n as f64
    }
}

/// Renders each point as a `(2r+1)`-pixel square splat at its projected
/// pixel. The nearest splat wins each pixel; near-equal depths go to the lower
/// point index, so the output does not depend on evaluation order.
pub fn render_projection(
    cloud: &PointCloud,
    pose: &RigidPose,
    k: &CameraIntrinsics,
    splat_radius: u32,
) -> ProjectionImage {
    let (w, h) = (k.width as usize, k.height as usize);
    let mut depth = vec![f64::INFINITY; w * h];
    let mut owner = vec![usize::MAX; w * h];
    let r = splat_radius as i64;
    for (i, p) in cloud.positions().iter().enumerate() {
        let Some(proj) = project_point(p, pose, k) else {
            continue;
        };
        let Some((px, py)) = k.pixel_index(proj.pixel) else {
            continue;
        };
        let (cx, cy) = (px as i64, py as i64);
        for y in (cy - r).max(0)..=(cy + r).min(h as i64 - 1) {
            for x in (cx - r).max(0)..=(cx + r).min(w as i64 - 1) {
                let slot = y as usize * w + x as usize;
                let cur = depth[slot];
                if proj.depth < cur - DEPTH_TIE || ((proj.depth - cur).abs() <= DEPTH_TIE && i < owner[slot]) {
                    depth[slot] = proj.depth;
                    owner[slot] = i;
                }
            }
        }
    }
    let colors = cloud.colors();
    let pixels = owner
        .iter()
        .map(|&o| if o == usize::MAX { ColorRGB::BLACK } else { colors[o] })
        .collect();
    ProjectionImage {
        rgb: ColorImage::from_pixels(k.width, k.height, pixels).expect("pixel count matches intrinsics"),
        depth,
    }
}

/// One level of a resolution sweep.
#[derive(Debug, Clone)]
pub struct SweepLevel {
    pub cell: f64,
    pub image: ProjectionImage,
    pub coverage: f64,
}

/// Downsamples the cloud at each voxel size and renders the result.
pub fn resolution_sweep(
    cloud: &PointCloud,
    pose: &RigidPose,
    k: &CameraIntrinsics,
    cells: &[f64],
    splat_radius: u32,
) -> Result<Vec<SweepLevel>> {
    if cells.is_empty() {
        return Err(Error::InvalidArgument(
            "resolution sweep needs at least one cell size".into(),
        ));
    }
    cells
        .par_iter()
        .map(|&cell| {
            if !(cell > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "cell size must be positive, got {cell}"
                )));
            }
            let image = render_projection(&voxel_downsample(cloud, cell)?, pose, k, splat_radius);
            let coverage = image.coverage();
            Ok(SweepLevel { cell, image, coverage })
        })
        .collect()
}

/// Projection from a source view's own camera, paired with its captured image.
pub fn render_pair(scene: &Scene, view_id: u32, splat_radius: u32) -> Result<(ProjectionImage, ColorImage)> {
    let view = scene.view(view_id).ok_or(Error::UnknownView(view_id))?;
    let projection = render_projection(&scene.cloud, &view.pose, &view.intrinsics, splat_radius);
    Ok((projection, view.image.clone()))
}
