//! Procedural test scenes: a closed box of textured walls sampled as points,
//! with pinhole views rendered from the cloud itself.
//!
//! Each view sees the walls with a mild angle-dependent shading, so points
//! seen by several views get slightly different colors. Positions are stored
//! at float32 precision and colors at 8 bits, so a scene written to disk and
//! loaded back is identical to the in-memory one.

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{camera_center, CameraIntrinsics, ColorRGB, RigidPose, Vec3};
use crate::projection::render_projection;
use crate::scene_io::{save_image, save_manifest, save_ply, Manifest, ManifestView, PointCloud, Scene, SourceView};

/// A camera to place in the scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthView {
    pub center: Vec3,
    pub forward: Vec3,
}

/// A box room `[0, size]` whose six walls are sampled on a cell-centered grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RoomSpec {
    pub size: Vec3,
    pub spacing: f64,
    pub views: Vec<SynthView>,
    pub width: u32,
    pub height: u32,
    /// Fraction of brightness lost at grazing incidence.
    pub shading: f64,
    /// Amplitude of a per-view color cast, so views disagree on colors.
    pub tint: f64,
    pub splat_radius: u32,
}

/// Camera looking along `forward`. Image-down is world -z unless the view is
/// vertical, in which case image-right is world +x.
pub fn look_pose(center: Vec3, forward: Vec3) -> Result<RigidPose> {
    let f = forward
        .try_normalize(1e-12)
        .ok_or(Error::Degenerate("zero view direction"))?;
    let down = if f.z.abs() > 0.99 {
        f.cross(&Vec3::x())
    } else {
        let d = -Vec3::z();
        (d - f * f.dot(&d)).normalize()
    };
    RigidPose::from_center_axes(center, f, down)
}

fn texture(p: &Vec3) -> ColorRGB {
    ColorRGB::new(
        0.5 + 0.35 * (2.1 * p.x + 0.3).sin(),
        0.5 + 0.35 * (1.7 * p.y + 1.1).sin(),
        0.5 + 0.35 * (2.3 * p.z + 2.0).sin(),
    )
}

fn quantize(c: ColorRGB) -> ColorRGB {
    ColorRGB::from_u8(c.clamped().to_u8())
}

impl RoomSpec {
    /// Room with `n_views` cameras on a horizontal ring around the center,
    /// each looking inward across the room.
    pub fn ring(size: Vec3, spacing: f64, n_views: usize) -> Self {
        let mid = size / 2.0;
        let radius = 0.3 * size.x.min(size.y);
        let views = (0..n_views)
            .map(|i| {
                let a = TAU * i as f64 / n_views as f64 + 0.3;
                let dir = Vec3::new(a.cos(), a.sin(), 0.0);
                SynthView {
                    center: mid + dir * radius,
                    forward: Vec3::new(-dir.x, -dir.y, -0.1),
                }
            })
            .collect();
        RoomSpec {
            size,
            spacing,
            views,
            width: 64,
            height: 48,
            shading: 0.5,
            tint: 0.4,
            splat_radius: 3,
        }
    }

    /// 4 m x 3 m x 2.75 m room with 25 cm sampling: exactly 1000 points.
    pub fn standard(n_views: usize) -> Self {
        RoomSpec::ring(Vec3::new(4.0, 3.0, 2.75), 0.25, n_views)
    }

    /// Closed 4 m x 4 m x 3 m box sampled at 20 cm (2000 points) with four
    /// sources huddled at the center, looking at the four side walls.
    pub fn sealed_box() -> Self {
        let mid = Vec3::new(2.0, 2.0, 1.5);
        let views = [Vec3::x(), -Vec3::x(), Vec3::y(), -Vec3::y()]
            .into_iter()
            .map(|d| SynthView {
                center: mid + d * 0.3,
                forward: d,
            })
            .collect();
        RoomSpec {
            views,
            ..RoomSpec::ring(Vec3::new(4.0, 4.0, 3.0), 0.2, 0)
        }
    }

    /// 6 m x 4 m x 3 m room whose six sources stand near the x = 0 wall and
    /// all look at the opposite (+x) wall.
    pub fn facing_wall() -> Self {
        let mut views = Vec::new();
        for y in [1.0, 2.0, 3.0] {
            for z in [1.0, 2.0] {
                views.push(SynthView {
                    center: Vec3::new(0.8, y, z),
                    forward: Vec3::x(),
                });
            }
        }
        RoomSpec {
            views,
            ..RoomSpec::ring(Vec3::new(6.0, 4.0, 3.0), 0.2, 0)
        }
    }

    /// Wall points and their inward normals.
    pub fn wall_points(&self) -> Result<(Vec<Vec3>, Vec<Vec3>)> {
        if !(self.spacing > 0.0) || self.size.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::InvalidArgument("room size and spacing must be positive".into()));
        }
        let counts = self.size.map(|s| (s / self.spacing).round().max(1.0) as usize);
        let mut points = Vec::new();
        let mut normals = Vec::new();
        for axis in 0..3 {
            let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
            for side in [0.0, 1.0] {
                let mut normal = Vec3::zeros();
                normal[axis] = 1.0 - 2.0 * side;
                for i in 0..counts[u] {
                    for j in 0..counts[v] {
                        let mut p = Vec3::zeros();
                        p[axis] = side * self.size[axis];
                        p[u] = (i as f64 + 0.5) * self.size[u] / counts[u] as f64;
                        p[v] = (j as f64 + 0.5) * self.size[v] / counts[v] as f64;
                        points.push(p.map(|c| c as f32 as f64));
                        normals.push(normal);
                    }
                }
            }
        }
        Ok((points, normals))
    }

    pub fn build(&self) -> Result<Scene> {
        let (points, normals) = self.wall_points()?;
        let base: Vec<ColorRGB> = points.iter().map(|p| quantize(texture(p))).collect();
        let k = CameraIntrinsics::new(
            self.width as f64 / 2.0,
            self.width as f64 / 2.0,
            self.width as f64 / 2.0,
            self.height as f64 / 2.0,
            self.width,
            self.height,
        )?;
        let mut views = Vec::with_capacity(self.views.len());
        for (id, v) in self.views.iter().enumerate() {
            let pose = look_pose(v.center, v.forward)?;
            let center = camera_center(&pose);
            let cast: [f64; 3] = std::array::from_fn(|c| 1.0 + self.tint * (2.4 * id as f64 + 2.1 * c as f64).sin());
            let shaded: Vec<ColorRGB> = points
                .iter()
                .zip(&normals)
                .zip(&base)
                .map(|((p, n), c)| {
                    let cos = n.dot(&(center - p)).abs() / (center - p).norm().max(1e-12);
                    let f = 1.0 - self.shading * (1.0 - cos);
                    quantize(ColorRGB::new(c.r * f * cast[0], c.g * f * cast[1], c.b * f * cast[2]))
                })
                .collect();
            let lit = PointCloud::new(points.clone(), shaded)?;
            let image = render_projection(&lit, &pose, &k, self.splat_radius).rgb;
            views.push(SourceView::new(id as u32, pose, k, image)?);
        }
        Scene::new(PointCloud::new(points, base)?, views)
    }
}

/// Writes `cloud.ply`, `cameras.json` and `images/view_<id>.png` under `dir`.
pub fn write_scene(scene: &Scene, dir: &Path) -> Result<()> {
    let images = dir.join("images");
    fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;
    save_ply(&scene.cloud, &dir.join("cloud.ply"), None)?;
    let mut manifest = Manifest::default();
    for v in &scene.views {
        let name = format!("images/view_{:03}.png", v.id);
        save_image(&v.image, &dir.join(&name))?;
        manifest
            .views
            .push(ManifestView::from_camera(v.id, &v.pose, &v.intrinsics, Some(name)));
    }
    save_manifest(&manifest, &dir.join("cameras.json"))
}
