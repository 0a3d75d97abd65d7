//! Per-point scores: color consistency across sources, resolution loss and
//! angular offset of a pseudo-view relative to its nearest source.

use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{angle_at_point, ColorRGB, Vec3};

/// Largest color distance between two unit-cube colors.
const MAX_COLOR_DISTANCE: f64 = 1.732_050_807_568_877_2;

/// Lower bound applied to the consistency score before it sets a penalty weight.
pub const CONSISTENCY_FLOOR: f64 = 1e-6;

/// Observation count above which the pairwise sum is estimated by sampling.
pub const DEFAULT_PAIR_CAP: usize = 32;

/// How many observation pairs feed the consistency score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairSampling {
    /// Exact evaluation up to this many observations.
    pub cap: usize,
    /// Pairs drawn when above the cap.
    pub samples: usize,
    pub seed: u64,
}

impl PairSampling {
    /// Sampled budget equals the exact pair count at the cap.
    pub fn with_cap(cap: usize, seed: u64) -> Self {
        PairSampling {
            cap,
            samples: (cap.saturating_mul(cap.saturating_sub(1)) / 2).max(1),
            seed,
        }
    }
}

impl Default for PairSampling {
    fn default() -> Self {
        PairSampling::with_cap(DEFAULT_PAIR_CAP, 0)
    }
}

/// Color consistency of one point's observations in [0, 1].
///
/// One minus the mean pairwise color distance normalized by the cube
/// diagonal. Fewer than two observations score 1. `stream` picks an
/// independent random stream so results do not depend on evaluation order.
pub fn color_consistency(colors: &[ColorRGB], sampling: &PairSampling, stream: u64) -> f64 {
    let n = colors.len();
    if n < 2 {
        return 1.0;
    }
    let mean = if n <= sampling.cap {
        let mut sum = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                sum += colors[i].distance(colors[j]);
            }
        }
        sum / (n * (n - 1) / 2) as f64
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);
        rng.set_stream(stream);
        let mut sum = 0.0;
        for _ in 0..sampling.samples {
            let i = rng.gen_range(0..n);
            let mut j = rng.gen_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            sum += colors[i].distance(colors[j]);
        }
        sum / sampling.samples as f64
    };
    (1.0 - mean / MAX_COLOR_DISTANCE).clamp(0.0, 1.0)
}

/// Weight growing without bound as consistency drops.
fn penalty_weight(consistency: f64) -> f64 {
    let h = consistency.clamp(CONSISTENCY_FLOOR, 1.0);
    (FRAC_PI_2 * (1.0 - h)).tan()
}

fn decay(consistency: f64, term: f64) -> f64 {
    if term == 0.0 {
        return 1.0;
    }
    (-penalty_weight(consistency) * term).exp()
}

/// Resolution score: penalizes a pseudo-view that sits farther from the point
/// than every source does.
pub fn resolution_score(point: &Vec3, pseudo: &Vec3, sources: &[Vec3], consistency: f64) -> Result<f64> {
    if sources.is_empty() {
        return Err(Error::InvalidArgument(
            "resolution score needs at least one source".into(),
        ));
    }
    let pseudo_dist = (pseudo - point).norm();
    let mut best = f64::INFINITY;
    for s in sources {
        let src_dist = (s - point).norm();
        if src_dist == 0.0 {
            return Err(Error::Degenerate("source center coincides with the point"));
        }
        best = best.min(((src_dist - pseudo_dist) / src_dist).max(0.0));
    }
    Ok(decay(consistency, best))
}

/// Angular score from the smallest angle at the point between the pseudo-view
/// and any source.
pub fn angular_score(point: &Vec3, pseudo: &Vec3, sources: &[Vec3], consistency: f64) -> Result<f64> {
    if sources.is_empty() {
        return Err(Error::InvalidArgument("angular score needs at least one source".into()));
    }
    let mut best = f64::INFINITY;
    for s in sources {
        best = best.min(angle_at_point(point, pseudo, s)?);
    }
    Ok(decay(consistency, best))
}
