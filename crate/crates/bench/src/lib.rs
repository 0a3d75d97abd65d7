//! Deterministic inputs shared by the benchmarks in `benches/`.

use rfield_core::{ColorRGB, PointCloud, Vec3};

/// `n` points spread evenly over the unit sphere (Fibonacci lattice).
pub fn sphere_cloud(n: usize) -> PointCloud {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let points: Vec<Vec3> = (0..n)
        .map(|i| {
            let y = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - y * y).sqrt();
            let a = golden * i as f64;
            Vec3::new(r * a.cos(), y, r * a.sin())
        })
        .collect();
    let colors = points
        .iter()
        .map(|p| ColorRGB::new(0.5 + 0.5 * p.x, 0.5 + 0.5 * p.y, 0.5 + 0.5 * p.z))
        .collect();
    PointCloud::new(points, colors).expect("matching lengths")
}

/// `n` points filling the slab `[-2, 2] x [-1.5, 1.5] x [1, 6]`, placed by a
/// low-discrepancy sequence.
pub fn slab_cloud(n: usize) -> PointCloud {
    let frac = |x: f64| x - x.floor();
    let points: Vec<Vec3> = (0..n)
        .map(|i| {
            let t = i as f64 + 0.5;
            Vec3::new(
                -2.0 + 4.0 * frac(t * 0.819_172_513_396_164_4),
                -1.5 + 3.0 * frac(t * 0.671_043_606_703_789_2),
                1.0 + 5.0 * frac(t * 0.549_700_477_901_970_4),
            )
        })
        .collect();
    let colors = (0..n)
        .map(|i| ColorRGB::from_u8([(i % 251) as u8, (i % 241) as u8, (i % 239) as u8]))
        .collect();
    PointCloud::new(points, colors).expect("matching lengths")
}
