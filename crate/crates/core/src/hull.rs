//! Quickhull in three dimensions.
//!
//! Only the vertex set is needed downstream, but faces are kept so tests can
//! check convexity. Every choice (initial simplex, next eye point, point
//! reassignment) resolves ties toward the lowest point index, so the output
//! depends only on the input order.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Relative tolerance for "strictly outside a face plane".
const PLANE_EPS_REL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct ConvexHull {
    /// Sorted indices of input points that are hull vertices.
    pub vertices: Vec<usize>,
    /// Outward-oriented triangles.
    pub faces: Vec<[usize; 3]>,
}

#[derive(Debug, Clone)]
struct Face {
    verts: [usize; 3],
    normal: Vec3,
    offset: f64,
    outside: Vec<usize>,
    alive: bool,
}

impl Face {
    fn new(points: &[Vec3], verts: [usize; 3]) -> Face {
        let [a, b, c] = verts.map(|i| points[i]);
        let n = (b - a).cross(&(c - a));
        let len = n.norm();
        let normal = if len > 0.0 { n / len } else { n };
        Face {
            verts,
            normal,
            offset: normal.dot(&a),
            outside: Vec::new(),
            alive: true,
        }
    }

    fn distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }

    fn edges(&self) -> [(usize, usize); 3] {
        let [a, b, c] = self.verts;
        [(a, b), (b, c), (c, a)]
    }
}

struct Builder<'a> {
    points: &'a [Vec3],
    eps: f64,
    faces: Vec<Face>,
    edges: HashMap<(usize, usize), usize>,
}

/// Computes the convex hull of `points`. Inputs with fewer than four points,
/// or whose points are (nearly) coplanar, are reported as degenerate.
pub fn convex_hull(points: &[Vec3]) -> Result<ConvexHull> {
    if points.len() < 4 {
        return Err(Error::Degenerate("fewer than four points"));
    }
    let scale = points
        .iter()
        .fold(0.0f64, |m, p| m.max(p.amax()))
        .max(f64::MIN_POSITIVE);
    let eps = PLANE_EPS_REL * scale;
    let simplex = initial_simplex(points, eps)?;

    let mut builder = Builder {
        points,
        eps,
        faces: Vec::new(),
        edges: HashMap::new(),
    };
    let [a, b, c, d] = simplex;
    for (tri, apex) in [([a, b, c], d), ([a, b, d], c), ([a, c, d], b), ([b, c, d], a)] {
        let mut face = Face::new(points, tri);
        if face.distance(&points[apex]) > 0.0 {
            face = Face::new(points, [tri[0], tri[2], tri[1]]);
        }
        builder.add_face(face);
    }
    let candidates: Vec<usize> = (0..points.len()).filter(|i| !simplex.contains(i)).collect();
    let initial: Vec<usize> = (0..4).collect();
    let mut pending = builder.assign(&candidates, &initial);
    pending.reverse();

    while let Some(fid) = pending.pop() {
        if !builder.faces[fid].alive || builder.faces[fid].outside.is_empty() {
            continue;
        }
        let eye = builder.farthest_outside(fid);
        let mut new_faces = builder.add_point(fid, eye)?;
        new_faces.reverse();
        pending.extend(new_faces);
    }

    let faces: Vec<[usize; 3]> = builder.faces.iter().filter(|f| f.alive).map(|f| f.verts).collect();
    let mut vertices: Vec<usize> = faces.iter().flatten().copied().collect();
    vertices.sort_unstable();
    vertices.dedup();
    Ok(ConvexHull { vertices, faces })
}

fn initial_simplex(points: &[Vec3], eps: f64) -> Result<[usize; 4]> {
    let mut extremes = [0usize; 6];
    for (i, p) in points.iter().enumerate() {
        for axis in 0..3 {
            if p[axis] < points[extremes[2 * axis]][axis] {
                extremes[2 * axis] = i;
            }
            if p[axis] > points[extremes[2 * axis + 1]][axis] {
                extremes[2 * axis + 1] = i;
            }
        }
    }
    let (mut a, mut b, mut best) = (0, 0, -1.0);
    for (k, &i) in extremes.iter().enumerate() {
        for &j in &extremes[k + 1..] {
            let d = (points[i] - points[j]).norm();
            if d > best {
                (a, b, best) = (i.min(j), i.max(j), d);
            }
        }
    }
    if best <= eps {
        return Err(Error::Degenerate("points are coincident"));
    }
    let dir = (points[b] - points[a]) / best;
    let c = argmax(points, |p| {
        let v = p - points[a];
        (v - dir * v.dot(&dir)).norm()
    });
    let line_dist = {
        let v = points[c] - points[a];
        (v - dir * v.dot(&dir)).norm()
    };
    if line_dist <= eps {
        return Err(Error::Degenerate("points are collinear"));
    }
    let normal = (points[b] - points[a]).cross(&(points[c] - points[a])).normalize();
    let d = argmax(points, |p| normal.dot(&(p - points[a])).abs());
    if normal.dot(&(points[d] - points[a])).abs() <= eps {
        return Err(Error::Degenerate("points are coplanar"));
    }
    Ok([a, b, c, d])
}

/// First index maximizing `f`.
fn argmax(points: &[Vec3], f: impl Fn(&Vec3) -> f64) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, p) in points.iter().enumerate() {
        let v = f(p);
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

impl Builder<'_> {
    fn add_face(&mut self, face: Face) -> usize {
        let id = self.faces.len();
        for e in face.edges() {
            self.edges.insert(e, id);
        }
        self.faces.push(face);
        id
    }

    /// Gives each point to the first face in `faces` it lies strictly
    /// outside of. Returns the faces that received points.
    fn assign(&mut self, point_ids: &[usize], faces: &[usize]) -> Vec<usize> {
        for &p in point_ids {
            let pos = &self.points[p];
            if let Some(&f) = faces.iter().find(|&&f| self.faces[f].distance(pos) > self.eps) {
                self.faces[f].outside.push(p);
            }
        }
        faces
            .iter()
            .copied()
            .filter(|&f| !self.faces[f].outside.is_empty())
            .collect()
    }

    fn farthest_outside(&self, fid: usize) -> usize {
        let face = &self.faces[fid];
        let mut best = (usize::MAX, f64::NEG_INFINITY);
        for &p in &face.outside {
            let d = face.distance(&self.points[p]);
            if d > best.1 || (d == best.1 && p < best.0) {
                best = (p, d);
            }
        }
        best.0
    }

    /// Adds `eye` to the hull, replacing the faces it can see. Returns the new
    /// faces that have outside points.
    fn add_point(&mut self, start: usize, eye: usize) -> Result<Vec<usize>> {
        let eye_pos = self.points[eye];
        let mut visible = vec![start];
        let mut is_visible: HashMap<usize, bool> = HashMap::from([(start, true)]);
        let mut horizon = Vec::new();
        let mut cursor = 0;
        while cursor < visible.len() {
            let fid = visible[cursor];
            cursor += 1;
            for (u, v) in self.faces[fid].edges() {
                let Some(&nb) = self.edges.get(&(v, u)) else {
                    return Err(Error::Degenerate("hull topology broken"));
                };
                let vis = match is_visible.get(&nb) {
                    Some(&vis) => vis,
                    None => {
                        let vis = self.faces[nb].distance(&eye_pos) > self.eps;
                        is_visible.insert(nb, vis);
                        if vis {
                            visible.push(nb);
                        }
                        vis
                    }
                };
                if !vis {
                    horizon.push((u, v));
                }
            }
        }

        let mut orphans = Vec::new();
        for &fid in &visible {
            let face = &mut self.faces[fid];
            face.alive = false;
            orphans.extend(face.outside.drain(..).filter(|&p| p != eye));
            for e in face.edges() {
                if self.edges.get(&e) == Some(&fid) {
                    self.edges.remove(&e);
                }
            }
        }
        orphans.sort_unstable();

        let new_ids: Vec<usize> = horizon
            .iter()
            .map(|&(u, v)| {
                let face = Face::new(self.points, [u, v, eye]);
                self.add_face(face)
            })
            .collect();
        Ok(self.assign(&orphans, &new_ids))
    }
}
