//! Candidate viewpoint enumeration and farthest point sampling.

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, RigidPose, Vec3};

/// Slack when deciding whether the last grid step still lies inside the box.
const GRID_SLACK: f64 = 1e-9;

fn steps_along(extent: f64, step: f64) -> usize {
    (extent / step + GRID_SLACK).floor() as usize + 1
}

/// Grid positions `min + (i S, j S, k S/2)` inside `bbox` (faces included),
/// ordered lexicographically by (i, j, k).
pub fn sample_viewpoints(bbox: &BoundingBox, step: f64) -> Result<Vec<Vec3>> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "sampling step must be positive, got {step}"
        )));
    }
    let ext = bbox.extent();
    let z_step = step / 2.0;
    let (nx, ny, nz) = (
        steps_along(ext.x, step),
        steps_along(ext.y, step),
        steps_along(ext.z, z_step),
    );
    let mut out = Vec::with_capacity(nx * ny * nz);
    for i in 0..nx {
        for j in 0..ny {
            for k in 0..nz {
                out.push(Vec3::new(
                    bbox.min.x + i as f64 * step,
                    bbox.min.y + j as f64 * step,
                    bbox.min.z + k as f64 * z_step,
                ));
            }
        }
    }
    Ok(out)
}

/// Optical axes in direction-index order: +x, -x, +y, -y, +z, -z.
pub const DIRECTIONS: [[f64; 3]; 6] = [
    [1.0, 0.0, 0.0],
    [-1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, -1.0, 0.0],
    [0.0, 0.0, 1.0],
    [0.0, 0.0, -1.0],
];

/// Pose looking from `position` along axis `direction` (0..6).
///
/// Horizontal views keep world -z as image-down; the two vertical views use
/// world +x as image-right.
pub fn direction_pose(position: &Vec3, direction: usize) -> RigidPose {
    let forward = Vec3::from(DIRECTIONS[direction]);
    let down = if direction < 4 {
        -Vec3::z()
    } else {
        forward.cross(&Vec3::x())
    };
    RigidPose::from_center_axes(*position, forward, down).expect("axis-aligned frames are rotations")
}

/// The six axis-aligned viewing poses at `position`.
pub fn six_directions(position: &Vec3) -> [RigidPose; 6] {
    std::array::from_fn(|d| direction_pose(position, d))
}

/// Greedy farthest point sampling of `k` indices.
///
/// Starts from the point farthest from the centroid; each further pick
/// maximizes the distance to the picks so far. Ties go to the lowest index.
/// Indices are returned in pick order.
pub fn farthest_point_sampling(positions: &[Vec3], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > positions.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot pick {k} of {} points",
            positions.len()
        )));
    }
    let centroid = positions.iter().sum::<Vec3>() / positions.len() as f64;
    let mut min_dist: Vec<f64> = positions.iter().map(|p| (p - centroid).norm()).collect();
    let mut picked = vec![false; positions.len()];
    let mut order = Vec::with_capacity(k);
    for round in 0..k {
        let mut best = (usize::MAX, f64::NEG_INFINITY);
        for (i, &d) in min_dist.iter().enumerate() {
            if !picked[i] && d > best.1 {
                best = (i, d);
            }
        }
        let next = best.0;
        picked[next] = true;
        order.push(next);
        if round == 0 {
            min_dist = positions.iter().map(|p| (p - positions[next]).norm()).collect();
        } else {
            for (i, p) in positions.iter().enumerate() {
                min_dist[i] = min_dist[i].min((p - positions[next]).norm());
            }
        }
    }
    Ok(order)
}
