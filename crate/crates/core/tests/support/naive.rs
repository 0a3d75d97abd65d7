//! Straight-line field evaluation without spatial indices, used as an oracle
//! for `build_field`. Visibility sets come from the library (frustum, hidden
//! point removal, observation table); everything downstream is recomputed
//! here by brute force.

use std::collections::HashSet;
use std::f64::consts::FRAC_PI_2;

use rfield_core::renderability::{build_observation_table, direction_pose, sample_viewpoints, Occlusion};
use rfield_core::visibility::{frustum_select, hidden_point_removal, ViewStatus};
use rfield_core::{camera_center, BoundingBox, Scene, Vec3};

pub struct NaiveCandidate {
    pub position: Vec3,
    pub direction: u8,
    pub status: ViewStatus,
    pub v: Option<f64>,
}

fn brute_nearest(points: &[Vec3], q: &Vec3, skip: Option<usize>) -> f64 {
    points
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != skip)
        .map(|(_, p)| (p - q).norm())
        .fold(f64::INFINITY, f64::min)
}

/// Four times the median nearest-neighbor distance over all points.
pub fn naive_voxel_cell(points: &[Vec3]) -> f64 {
    let mut d: Vec<f64> = (0..points.len())
        .map(|i| brute_nearest(points, &points[i], Some(i)))
        .collect();
    d.sort_by(f64::total_cmp);
    4.0 * d[d.len() / 2]
}

fn cell_of(p: &Vec3, cell: f64) -> [i64; 3] {
    [
        (p.x / cell).floor() as i64,
        (p.y / cell).floor() as i64,
        (p.z / cell).floor() as i64,
    ]
}

fn blocked(cells: &HashSet<[i64; 3]>, cell: f64, a: &Vec3, b: &Vec3) -> bool {
    let (step, exclude) = (cell / 2.0, cell);
    let len = (b - a).norm();
    if len == 0.0 || cells.is_empty() {
        return false;
    }
    // Walk from the lexicographically smaller endpoint.
    let (p, q) = if (a.x, a.y, a.z) <= (b.x, b.y, b.z) {
        (a, b)
    } else {
        (b, a)
    };
    let n = (len / step).ceil().max(1.0) as usize;
    (0..=n).any(|k| {
        let s = p + (q - p) * (k as f64 / n as f64);
        (s - p).norm() > exclude && (s - q).norm() > exclude && cells.contains(&cell_of(&s, cell))
    })
}

fn weight(h: f64) -> f64 {
    (FRAC_PI_2 * (1.0 - h.clamp(1e-6, 1.0))).tan()
}

fn angle(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let (u, w) = ((a - p).normalize(), (b - p).normalize());
    u.dot(&w).clamp(-1.0, 1.0).acos()
}

pub fn naive_field(
    scene: &Scene,
    bbox: &BoundingBox,
    step: f64,
    min_clearance: f64,
    gamma: f64,
) -> Vec<NaiveCandidate> {
    let cloud = &scene.cloud;
    let pts = cloud.positions();
    let cell = naive_voxel_cell(pts);
    let table = build_observation_table(scene, Occlusion::HiddenPointRemoval { gamma }).unwrap();
    let center_of = |id: u32| camera_center(&scene.view(id).unwrap().pose);
    let consistency: Vec<f64> = (0..pts.len())
        .map(|i| {
            let obs = table.observations(i);
            if obs.len() < 2 {
                return 1.0;
            }
            let mut sum = 0.0;
            let mut pairs = 0.0;
            for a in 0..obs.len() {
                for b in a + 1..obs.len() {
                    let (x, y) = (obs[a].color, obs[b].color);
                    sum += ((x.r - y.r).powi(2) + (x.g - y.g).powi(2) + (x.b - y.b).powi(2)).sqrt();
                    pairs += 1.0;
                }
            }
            (1.0 - sum / pairs / 3f64.sqrt()).clamp(0.0, 1.0)
        })
        .collect();
    let k = scene.views[0].intrinsics;

    let mut out = Vec::new();
    for position in sample_viewpoints(bbox, step).unwrap() {
        for direction in 0..6u8 {
            let pose = direction_pose(&position, direction as usize);
            let c = camera_center(&pose);
            let frustum = frustum_select(cloud, &pose, &k);
            let visible = hidden_point_removal(cloud, &frustum, &c, gamma).unwrap();
            let observed: Vec<usize> = visible
                .indices()
                .iter()
                .copied()
                .filter(|&i| table.is_observed(i))
                .collect();
            let verdict = |status, v| NaiveCandidate {
                position,
                direction,
                status,
                v,
            };
            if observed.is_empty() {
                out.push(verdict(ViewStatus::Empty, None));
                continue;
            }
            if brute_nearest(pts, &c, None) < min_clearance {
                out.push(verdict(ViewStatus::TooClose, None));
                continue;
            }
            let mut ids: Vec<u32> = observed
                .iter()
                .flat_map(|&i| table.observations(i).iter().map(|o| o.view_id))
                .collect();
            ids.sort_unstable();
            ids.dedup();
            let cells: HashSet<[i64; 3]> = visible.indices().iter().map(|&i| cell_of(&pts[i], cell)).collect();
            if ids.iter().all(|&id| blocked(&cells, cell, &c, &center_of(id))) {
                out.push(verdict(ViewStatus::Blocked, None));
                continue;
            }
            let (mut sg, mut sr, mut sa, mut n) = (0.0, 0.0, 0.0, 0.0);
            for &i in &observed {
                let p = pts[i];
                let sources: Vec<Vec3> = table.observations(i).iter().map(|o| center_of(o.view_id)).collect();
                if sources.contains(&p) || c == p {
                    continue;
                }
                let h = consistency[i];
                let d = (c - p).norm();
                let res_term = sources
                    .iter()
                    .map(|s| (((s - p).norm() - d) / (s - p).norm()).max(0.0))
                    .fold(f64::INFINITY, f64::min);
                let ang_term = sources.iter().map(|s| angle(&p, &c, s)).fold(f64::INFINITY, f64::min);
                sg += h;
                sr += (-weight(h) * res_term).exp();
                sa += (-weight(h) * ang_term).exp();
                n += 1.0;
            }
            if n == 0.0 {
                out.push(verdict(ViewStatus::Empty, None));
            } else {
                out.push(verdict(ViewStatus::Valid, Some((sg / n) * (sr / n) * (sa / n))));
            }
        }
    }
    out
}
