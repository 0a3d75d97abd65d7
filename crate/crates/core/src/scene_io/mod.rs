//! Scene input and output: point clouds, camera manifests and images.

mod cameras;
mod image_io;
mod ply;

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

pub use cameras::{load_cameras, save_manifest, CameraEntry, Manifest, ManifestView};
pub use image_io::{load_image, save_depth_png, save_image, save_mask_png, ColorImage};
pub use ply::{encode_ply, load_ply, save_ply, PlyFormat};

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, CameraIntrinsics, ColorRGB, RigidPose, Vec3};

/// Colored point cloud. Positions and colors always have the same length.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    positions: Vec<Vec3>,
    colors: Vec<ColorRGB>,
}

impl PointCloud {
    pub fn new(positions: Vec<Vec3>, colors: Vec<ColorRGB>) -> Result<Self> {
        if positions.len() != colors.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} positions but {} colors",
                positions.len(),
                colors.len()
            )));
        }
        if let Some(i) = positions.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidArgument(format!("point {i} is not finite")));
        }
        Ok(PointCloud { positions, colors })
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn colors(&self) -> &[ColorRGB] {
        &self.colors
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn bounding_box(&self) -> Option<BoundingBox> {
        BoundingBox::from_points(&self.positions)
    }

    /// Copy of the points at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            positions: indices.iter().map(|&i| self.positions[i]).collect(),
            colors: indices.iter().map(|&i| self.colors[i]).collect(),
        }
    }
}

/// A captured image with its calibration.
#[derive(Debug, Clone)]
pub struct SourceView {
    pub id: u32,
    pub pose: RigidPose,
    pub intrinsics: CameraIntrinsics,
    pub image: ColorImage,
}

impl SourceView {
    pub fn new(id: u32, pose: RigidPose, intrinsics: CameraIntrinsics, image: ColorImage) -> Result<Self> {
        if image.width() != intrinsics.width || image.height() != intrinsics.height {
            return Err(Error::DimensionMismatch(format!(
                "view {id}: image is {}x{} but intrinsics say {}x{}",
                image.width(),
                image.height(),
                intrinsics.width,
                intrinsics.height
            )));
        }
        Ok(SourceView {
            id,
            pose,
            intrinsics,
            image,
        })
    }
}

/// The point map plus every posed source view. Read-only once built.
#[derive(Debug, Clone)]
pub struct Scene {
    pub cloud: PointCloud,
    pub views: Vec<SourceView>,
}

impl Scene {
    /// Assembles a scene; views are kept sorted by id.
    pub fn new(cloud: PointCloud, mut views: Vec<SourceView>) -> Result<Self> {
        let mut seen = HashSet::new();
        for v in &views {
            if !seen.insert(v.id) {
                return Err(Error::InvalidArgument(format!("duplicate view id {}", v.id)));
            }
        }
        views.sort_by_key(|v| v.id);
        Ok(Scene { cloud, views })
    }

    /// Loads a PLY cloud and a camera manifest, reading every referenced image.
    pub fn load(ply_path: &Path, cameras_path: &Path) -> Result<Self> {
        let cloud = load_ply(ply_path)?;
        let mut views = Vec::new();
        for entry in load_cameras(cameras_path)? {
            let image_path = entry
                .image
                .as_ref()
                .ok_or_else(|| Error::Manifest(format!("view {} has no image path", entry.id)))?;
            let image = load_image(image_path)?;
            views.push(SourceView::new(entry.id, entry.pose, entry.intrinsics, image)?);
        }
        Scene::new(cloud, views)
    }

    pub fn view(&self, id: u32) -> Option<&SourceView> {
        self.views
            .binary_search_by_key(&id, |v| v.id)
            .ok()
            .map(|i| &self.views[i])
    }
}

/// Integer cell holding `p` for a grid anchored at `origin`.
pub fn cell_index(p: &Vec3, origin: &Vec3, cell: f64) -> [i64; 3] {
    let d = (p - origin) / cell;
    [d.x.floor() as i64, d.y.floor() as i64, d.z.floor() as i64]
}

/// Replaces the points in each occupied `cell`-sized voxel (anchored at the
/// world origin) by their centroid and mean color. Output is ordered by cell
/// index.
pub fn voxel_downsample(cloud: &PointCloud, cell: f64) -> Result<PointCloud> {
    if !(cell > 0.0) || !cell.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "voxel cell must be positive, got {cell}"
        )));
    }
    let origin = Vec3::zeros();
    let mut cells: BTreeMap<[i64; 3], (Vec3, [f64; 3], usize)> = BTreeMap::new();
    for (p, c) in cloud.positions.iter().zip(&cloud.colors) {
        let acc = cells
            .entry(cell_index(p, &origin, cell))
            .or_insert((Vec3::zeros(), [0.0; 3], 0));
        acc.0 += p;
        acc.1[0] += c.r;
        acc.1[1] += c.g;
        acc.1[2] += c.b;
        acc.2 += 1;
    }
    let mut positions = Vec::with_capacity(cells.len());
    let mut colors = Vec::with_capacity(cells.len());
    for (sum_p, sum_c, n) in cells.into_values() {
        let n = n as f64;
        positions.push(sum_p / n);
        colors.push(ColorRGB::new(sum_c[0] / n, sum_c[1] / n, sum_c[2] / n));
    }
    PointCloud::new(positions, colors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    fn cloud(points: &[[f64; 3]]) -> PointCloud {
        let positions = points.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect();
        PointCloud::new(positions, vec![ColorRGB::new(0.5, 0.5, 0.5); points.len()]).unwrap()
    }

    #[test]
    fn downsample_merges_one_cell() {
        let out = voxel_downsample(&cloud(&[[0.0, 0.0, 0.0], [0.1, 0.0, 0.0]]), 1.0).unwrap();
        assert_eq!(out.len(), 1);
        assert!((out.positions()[0] - Vec3::new(0.05, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn downsample_keeps_separated_points() {
        let input = cloud(&[[0.0, 0.0, 0.0], [2.5, 0.0, 0.0], [0.0, 5.0, 1.0]]);
        assert_eq!(voxel_downsample(&input, 1.0).unwrap().len(), 3);
        assert!(voxel_downsample(&input, 0.0).is_err());
    }

    #[test]
    fn downsample_matches_grouping_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let positions: Vec<Vec3> = (0..1000)
            .map(|_| {
                Vec3::new(
                    rng.gen_range(-3.0..3.0),
                    rng.gen_range(-3.0..3.0),
                    rng.gen_range(-3.0..3.0),
                )
            })
            .collect();
        let colors: Vec<ColorRGB> = (0..1000)
            .map(|_| ColorRGB::new(rng.gen(), rng.gen(), rng.gen()))
            .collect();
        let input = PointCloud::new(positions.clone(), colors.clone()).unwrap();
        let out = voxel_downsample(&input, 0.5).unwrap();

        let mut groups: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in positions.iter().enumerate() {
            let key = (
                (p.x / 0.5).floor() as i64,
                (p.y / 0.5).floor() as i64,
                (p.z / 0.5).floor() as i64,
            );
            groups.entry(key).or_default().push(i);
        }
        let mut keys: Vec<_> = groups.keys().copied().collect();
        keys.sort();
        assert_eq!(out.len(), keys.len());
        for (k, key) in keys.iter().enumerate() {
            let members = &groups[key];
            let n = members.len() as f64;
            let centroid = members.iter().map(|&i| positions[i]).sum::<Vec3>() / n;
            let mean_r = members.iter().map(|&i| colors[i].r).sum::<f64>() / n;
            assert!((out.positions()[k] - centroid).norm() < 1e-12);
            assert!((out.colors()[k].r - mean_r).abs() < 1e-12);
        }
        let mut seen = HashSet::new();
        for p in out.positions() {
            assert!(seen.insert(cell_index(p, &Vec3::zeros(), 0.5)));
        }
    }

    #[test]
    fn mismatched_lengths_rejected() {
        assert!(PointCloud::new(vec![Vec3::zeros()], vec![]).is_err());
    }
}
