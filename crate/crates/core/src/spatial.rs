//! Uniform hash grid over a point set for nearest-neighbor queries.

use std::collections::HashMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::{BoundingBox, Vec3};
use crate::scene_io::cell_index;

/// Target average occupancy of a bucket.
const POINTS_PER_BUCKET: f64 = 2.0;

#[derive(Debug, Clone)]
pub struct PointIndex {
    points: Vec<Vec3>,
    origin: Vec3,
    cell: f64,
    bounds: Option<BoundingBox>,
    lo: [i64; 3],
    hi: [i64; 3],
    buckets: HashMap<[i64; 3], Vec<u32>>,
}

impl PointIndex {
    pub fn new(points: &[Vec3]) -> Self {
        let bounds = BoundingBox::from_points(points);
        let (origin, cell) = match &bounds {
            Some(b) => {
                let ext = b.extent();
                let diag = ext.norm().max(1e-9);
                let floor = diag * 1e-3;
                let volume = ext.map(|e| e.max(floor)).product();
                let cell = (volume * POINTS_PER_BUCKET / points.len() as f64).cbrt();
                (b.min, cell.max(1e-9))
            }
            None => (Vec3::zeros(), 1.0),
        };
        let mut buckets: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
        let mut lo = [i64::MAX; 3];
        let mut hi = [i64::MIN; 3];
        for (i, p) in points.iter().enumerate() {
            let key = cell_index(p, &origin, cell);
            for d in 0..3 {
                lo[d] = lo[d].min(key[d]);
                hi[d] = hi[d].max(key[d]);
            }
            buckets.entry(key).or_default().push(i as u32);
        }
        PointIndex {
            points: points.to_vec(),
            origin,
            cell,
            bounds,
            lo,
            hi,
            buckets,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Closest point to `q` other than `exclude`, as `(index, distance)`.
    /// Equal distances resolve to the lowest index.
    pub fn nearest(&self, q: &Vec3, exclude: Option<usize>) -> Option<(usize, f64)> {
        let bounds = self.bounds.as_ref()?;
        let center = cell_index(q, &self.origin, self.cell);
        let outside = (q - q.sup(&bounds.min).inf(&bounds.max)).norm();
        // Chebyshev cell distance to anything in bounds is at least this.
        let start = ((outside / (3f64.sqrt() * self.cell)).floor() as i64 - 1).max(0);
        let max_ring = (0..3)
            .map(|d| (center[d] - self.lo[d]).abs().max((self.hi[d] - center[d]).abs()))
            .max()
            .unwrap_or(0);

        let mut best: Option<(usize, f64)> = None;
        let consider = |idx: u32, best: &mut Option<(usize, f64)>| {
            let i = idx as usize;
            if Some(i) == exclude {
                return;
            }
            let d = (self.points[i] - q).norm();
            let better = match *best {
                None => true,
                Some((bi, bd)) => d < bd || (d == bd && i < bi),
            };
            if better {
                *best = Some((i, d));
            }
        };
        for ring in start..=max_ring.max(start) {
            for key in ring_cells(center, ring, self.lo, self.hi) {
                if let Some(bucket) = self.buckets.get(&key) {
                    for &idx in bucket {
                        consider(idx, &mut best);
                    }
                }
            }
            // Every cell beyond this ring is at least `ring * cell` away.
            if let Some((_, d)) = best {
                if d <= ring as f64 * self.cell {
                    break;
                }
            }
        }
        best
    }
}

/// Cells at Chebyshev distance exactly `r` from `c`, clipped to the
/// inclusive cell range `lo..=hi`.
fn ring_cells(c: [i64; 3], r: i64, lo: [i64; 3], hi: [i64; 3]) -> impl Iterator<Item = [i64; 3]> {
    let span = move |d: usize| (c[d] - r).max(lo[d])..=(c[d] + r).min(hi[d]);
    span(0).flat_map(move |x| {
        span(1).flat_map(move |y| {
            let on_shell = (x - c[0]).abs() == r || (y - c[1]).abs() == r;
            let zs: Vec<i64> = if on_shell {
                span(2).collect()
            } else {
                let mut caps = vec![c[2] - r];
                if r > 0 {
                    caps.push(c[2] + r);
                }
                caps.into_iter().filter(|z| span(2).contains(z)).collect()
            };
            zs.into_iter().map(move |z| [x, y, z])
        })
    })
}

/// Median nearest-neighbor distance over up to `sample_size` points chosen
/// with a seeded RNG. `None` for clouds with fewer than two points.
pub fn median_nearest_spacing(index: &PointIndex, sample_size: usize, seed: u64) -> Option<f64> {
    let n = index.len();
    if n < 2 {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks: Vec<usize> = if n <= sample_size {
        (0..n).collect()
    } else {
        sample(&mut rng, n, sample_size).into_vec()
    };
    let mut dists: Vec<f64> = picks
        .iter()
        .filter_map(|&i| index.nearest(&index.points[i], Some(i)).map(|(_, d)| d))
        .collect();
    dists.sort_by(f64::total_cmp);
    Some(dists[dists.len() / 2])
}
