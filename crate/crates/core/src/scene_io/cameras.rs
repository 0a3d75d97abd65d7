//! Camera manifests: the JSON format used throughout the toolkit and COLMAP
//! text models (`cameras.txt` + `images.txt`).
//!
//! Poses are world-to-camera in both formats.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{check_rotation, CameraIntrinsics, RigidPose, Vec3};

/// Rotations read from disk may deviate from orthonormal by this much before
/// they are rejected; accepted ones are projected back onto SO(3).
pub const LOAD_ROTATION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestView {
    pub id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    #[serde(rename = "R")]
    pub rotation: [f64; 9],
    pub t: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub views: Vec<ManifestView>,
}

/// A calibrated camera, with its image path resolved against the manifest location.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraEntry {
    pub id: u32,
    pub pose: RigidPose,
    pub intrinsics: CameraIntrinsics,
    pub image: Option<PathBuf>,
}

impl ManifestView {
    pub fn from_camera(id: u32, pose: &RigidPose, k: &CameraIntrinsics, image: Option<String>) -> Self {
        let t = pose.translation();
        ManifestView {
            id,
            image,
            width: k.width,
            height: k.height,
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
            rotation: pose.rotation_row_major(),
            t: [t.x, t.y, t.z],
        }
    }
}

/// Projects a nearly-orthonormal matrix onto the closest rotation.
fn orthonormalize(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    u * v_t
}

fn validated_pose(rotation: Matrix3<f64>, t: Vec3, what: &str) -> Result<RigidPose> {
    check_rotation(&rotation, LOAD_ROTATION_TOLERANCE).map_err(|e| Error::InvalidPose(format!("{what}: {e}")))?;
    RigidPose::new(orthonormalize(&rotation), t).map_err(|e| Error::InvalidPose(format!("{what}: {e}")))
}

/// Loads a JSON manifest, or a COLMAP text model when `path` is a directory
/// or one of its `cameras.txt` / `images.txt` files.
pub fn load_cameras(path: &Path) -> Result<Vec<CameraEntry>> {
    let colmap_dir = if path.is_dir() {
        Some(path.to_path_buf())
    } else {
        match path.file_name().and_then(|n| n.to_str()) {
            Some("cameras.txt" | "images.txt") => Some(path.parent().map(Path::to_path_buf).unwrap_or_default()),
            _ => None,
        }
    };
    match colmap_dir {
        Some(dir) => load_colmap(&dir),
        None => load_json_manifest(path),
    }
}

fn load_json_manifest(path: &Path) -> Result<Vec<CameraEntry>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new(""));
    manifest
        .views
        .iter()
        .map(|v| {
            let intrinsics = CameraIntrinsics::new(v.fx, v.fy, v.cx, v.cy, v.width, v.height)?;
            let r = Matrix3::from_row_slice(&v.rotation);
            let pose = validated_pose(r, Vec3::from(v.t), &format!("view {}", v.id))?;
            Ok(CameraEntry {
                id: v.id,
                pose,
                intrinsics,
                image: v.image.as_ref().map(|p| base.join(p)),
            })
        })
        .collect()
}

/// Writes a JSON manifest.
pub fn save_manifest(manifest: &Manifest, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Homogeneous rotation form of a quaternion, without normalizing: a
/// quaternion of norm `n` yields `n^2` times a rotation.
pub(crate) fn quaternion_matrix(w: f64, x: f64, y: f64, z: f64) -> Matrix3<f64> {
    let (ww, xx, yy, zz) = (w * w, x * x, y * y, z * z);
    Matrix3::new(
        ww + xx - yy - zz,
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        ww - xx + yy - zz,
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        ww - xx - yy + zz,
    )
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.starts_with('#'))
}

fn parse_num<T: std::str::FromStr>(tok: &str, file: &str, line: usize) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::Manifest(format!("{file}:{line}: bad number '{tok}'")))
}

fn load_colmap(dir: &Path) -> Result<Vec<CameraEntry>> {
    let cameras_path = dir.join("cameras.txt");
    let images_path = dir.join("images.txt");
    let cameras_text = fs::read_to_string(&cameras_path).map_err(|e| Error::io(&cameras_path, e))?;
    let images_text = fs::read_to_string(&images_path).map_err(|e| Error::io(&images_path, e))?;

    let mut cameras = HashMap::new();
    for (line_no, line) in data_lines(&cameras_text) {
        if line.is_empty() {
            continue;
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() < 4 {
            return Err(Error::Manifest(format!("cameras.txt:{line_no}: too few fields")));
        }
        let id: u32 = parse_num(tok[0], "cameras.txt", line_no)?;
        let width = parse_num(tok[2], "cameras.txt", line_no)?;
        let height = parse_num(tok[3], "cameras.txt", line_no)?;
        let params: Vec<f64> = tok[4..]
            .iter()
            .map(|t| parse_num(t, "cameras.txt", line_no))
            .collect::<Result<_>>()?;
        let k = match (tok[1], params.as_slice()) {
            ("PINHOLE", [fx, fy, cx, cy]) => CameraIntrinsics::new(*fx, *fy, *cx, *cy, width, height)?,
            ("SIMPLE_PINHOLE", [f, cx, cy]) => CameraIntrinsics::new(*f, *f, *cx, *cy, width, height)?,
            ("PINHOLE" | "SIMPLE_PINHOLE", _) => {
                return Err(Error::Manifest(format!(
                    "cameras.txt:{line_no}: wrong parameter count for {}",
                    tok[1]
                )))
            }
            (model, _) => return Err(Error::Unsupported(format!("camera model {model} (camera {id})"))),
        };
        cameras.insert(id, k);
    }

    let image_root = if dir.join("images").is_dir() {
        dir.join("images")
    } else {
        dir.to_path_buf()
    };
    let mut entries = Vec::new();
    // images.txt alternates a pose line with a (possibly empty) 2D point line.
    let mut expect_pose = true;
    for (line_no, line) in data_lines(&images_text) {
        if !expect_pose {
            expect_pose = true;
            continue;
        }
        if line.is_empty() {
            continue;
        }
        expect_pose = false;
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() < 10 {
            return Err(Error::Manifest(format!("images.txt:{line_no}: too few fields")));
        }
        let nums: Vec<f64> = tok[1..8]
            .iter()
            .map(|t| parse_num(t, "images.txt", line_no))
            .collect::<Result<_>>()?;
        let id: u32 = parse_num(tok[0], "images.txt", line_no)?;
        let camera_id: u32 = parse_num(tok[8], "images.txt", line_no)?;
        let intrinsics = *cameras
            .get(&camera_id)
            .ok_or_else(|| Error::Manifest(format!("images.txt:{line_no}: unknown camera {camera_id}")))?;
        let (w, x, y, z) = (nums[0], nums[1], nums[2], nums[3]);
        let raw = quaternion_matrix(w, x, y, z);
        check_rotation(&raw, LOAD_ROTATION_TOLERANCE).map_err(|e| Error::InvalidPose(format!("image {id}: {e}")))?;
        let n = (w * w + x * x + y * y + z * z).sqrt();
        let rotation = quaternion_matrix(w / n, x / n, y / n, z / n);
        let pose = RigidPose::new(rotation, Vec3::new(nums[4], nums[5], nums[6]))
            .map_err(|e| Error::InvalidPose(format!("image {id}: {e}")))?;
        entries.push(CameraEntry {
            id,
            pose,
            intrinsics,
            image: Some(image_root.join(tok[9..].join(" "))),
        });
    }
    entries.sort_by_key(|e| e.id);
    Ok(entries)
}
