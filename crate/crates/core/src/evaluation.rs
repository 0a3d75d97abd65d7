//! Image quality metrics and aggregate reports over rendered test sets.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene_io::{load_image, ColorImage};

/// Reported for pixel-identical pairs, whose PSNR is unbounded.
pub const PSNR_SENTINEL: f64 = 99.0;
pub const DEFAULT_REFERENCE_DB: f64 = 25.0;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

pub fn is_sentinel(psnr: f64) -> bool {
    psnr == PSNR_SENTINEL
}

fn check_dims(a: &ColorImage, b: &ColorImage) -> Result<()> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

/// Peak-1 PSNR in dB over all channels; `PSNR_SENTINEL` when the images match.
pub fn psnr(a: &ColorImage, b: &ColorImage) -> Result<f64> {
    check_dims(a, b)?;
    let n = a.pixels().len() * 3;
    if n == 0 {
        return Err(Error::InvalidArgument("cannot score empty images".into()));
    }
    let sse: f64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(p, q)| {
            let d = [p.r - q.r, p.g - q.g, p.b - q.b];
            d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
        })
        .sum();
    let mse = sse / n as f64;
    Ok(if mse == 0.0 { PSNR_SENTINEL } else { -10.0 * mse.log10() })
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let half = (SSIM_WINDOW / 2) as f64;
    let mut k = [0.0; SSIM_WINDOW];
    for (i, v) in k.iter_mut().enumerate() {
        let x = i as f64 - half;
        *v = (-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let sum: f64 = k.iter().sum();
    k.map(|v| v / sum)
}

/// Separable valid-mode filtering of a row-major plane.
fn filter_valid(plane: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (ow, oh) = (w + 1 - SSIM_WINDOW, h + 1 - SSIM_WINDOW);
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        let line = &plane[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = k.iter().zip(&line[x..x + SSIM_WINDOW]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = k.iter().enumerate().map(|(j, kv)| kv * rows[(y + j) * ow + x]).sum();
        }
    }
    out
}

fn channel_ssim(a: &[f64], b: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> f64 {
    let prod = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).collect::<Vec<f64>>();
    let mu_a = filter_valid(a, w, h, k);
    let mu_b = filter_valid(b, w, h, k);
    let aa = filter_valid(&prod(a, a), w, h, k);
    let bb = filter_valid(&prod(b, b), w, h, k);
    let ab = filter_valid(&prod(a, b), w, h, k);
    let mut total = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let var_a = aa[i] - ma * ma;
        let var_b = bb[i] - mb * mb;
        let cov = ab[i] - ma * mb;
        total += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
            / ((ma * ma + mb * mb + SSIM_C1) * (var_a + var_b + SSIM_C2));
    }
    total / mu_a.len() as f64
}

/// Single-scale SSIM with an 11x11 Gaussian window (sigma 1.5), computed per
/// RGB channel and averaged over valid window positions and channels.
pub fn ssim(a: &ColorImage, b: &ColorImage) -> Result<f64> {
    check_dims(a, b)?;
    let (w, h) = (a.width() as usize, a.height() as usize);
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::InvalidArgument(format!(
            "images of {w}x{h} are smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window"
        )));
    }
    let k = gaussian_kernel();
    let channel = |img: &ColorImage, c: usize| -> Vec<f64> { img.pixels().iter().map(|p| p.as_array()[c]).collect() };
    let sum: f64 = (0..3)
        .map(|c| channel_ssim(&channel(a, c), &channel(b, c), w, h, &k))
        .sum();
    Ok((sum / 3.0).clamp(-1.0, 1.0))
}

/// Population standard deviation of the PSNR values, sentinels excluded.
pub fn sdp(scores: &[f64]) -> Result<f64> {
    let finite: Vec<f64> = scores.iter().copied().filter(|s| !is_sentinel(*s)).collect();
    if finite.is_empty() {
        return Err(Error::InvalidArgument("no finite PSNR values".into()));
    }
    let n = finite.len() as f64;
    let mean = finite.iter().sum::<f64>() / n;
    Ok((finite.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    /// Lower edge in dB; the bin covers `[lo, lo + 1)`.
    pub lo: i64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// Contiguous 1 dB bins from the lowest to the highest occupied one.
    pub bins: Vec<HistogramBin>,
    pub reference_db: f64,
    /// Scores strictly below the reference.
    pub below_reference: usize,
}

/// 1 dB histogram of the given scores, plus the count under `reference_db`.
pub fn histogram(scores: &[f64], reference_db: f64) -> Histogram {
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for s in scores {
        *counts.entry(s.floor() as i64).or_default() += 1;
    }
    let bins = match (counts.keys().next(), counts.keys().next_back()) {
        (Some(&lo), Some(&hi)) => (lo..=hi)
            .map(|b| HistogramBin {
                lo: b,
                count: counts.get(&b).copied().unwrap_or(0),
            })
            .collect(),
        _ => Vec::new(),
    };
    Histogram {
        bins,
        reference_db,
        below_reference: scores.iter().filter(|&&s| s < reference_db).count(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityScore {
    pub view_id: u32,
    pub psnr_db: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub scores: Vec<QualityScore>,
    /// Mean over non-sentinel PSNR values; the sentinel if there are none.
    pub mean_psnr: f64,
    pub mean_ssim: f64,
    /// Zero when no PSNR value is finite.
    pub sdp: f64,
    pub histogram: Histogram,
}

/// Rendered image and its reference.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalPair {
    pub view_id: u32,
    pub rendered: PathBuf,
    pub ground_truth: PathBuf,
}

/// Aggregates per-view scores into a report.
pub fn summarize(scores: Vec<QualityScore>, reference_db: f64) -> Result<EvalReport> {
    if scores.is_empty() {
        return Err(Error::InvalidArgument("no scores to summarize".into()));
    }
    let finite: Vec<f64> = scores.iter().map(|s| s.psnr_db).filter(|p| !is_sentinel(*p)).collect();
    let mean_ssim = scores.iter().map(|s| s.ssim).sum::<f64>() / scores.len() as f64;
    let (mean_psnr, spread) = if finite.is_empty() {
        (PSNR_SENTINEL, 0.0)
    } else {
        (finite.iter().sum::<f64>() / finite.len() as f64, sdp(&finite)?)
    };
    Ok(EvalReport {
        histogram: histogram(&finite, reference_db),
        scores,
        mean_psnr,
        mean_ssim,
        sdp: spread,
    })
}

/// Scores in-memory image pairs, keeping input order.
pub fn evaluate_images(pairs: &[(u32, &ColorImage, &ColorImage)], reference_db: f64) -> Result<EvalReport> {
    let scores = pairs
        .par_iter()
        .map(|&(view_id, rendered, truth)| {
            Ok(QualityScore {
                view_id,
                psnr_db: psnr(rendered, truth)?,
                ssim: ssim(rendered, truth)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    summarize(scores, reference_db)
}

/// Loads and scores every pair. The first unreadable or mismatched pair
/// aborts with an error naming its path.
pub fn evaluate_set(pairs: &[EvalPair], reference_db: f64) -> Result<EvalReport> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no image pairs to evaluate".into()));
    }
    let scores = pairs
        .par_iter()
        .map(|pair| {
            let rendered = load_image(&pair.rendered)?;
            let truth = load_image(&pair.ground_truth)?;
            let with_path = |e: Error| Error::Image {
                path: pair.rendered.clone(),
                message: e.to_string(),
            };
            Ok(QualityScore {
                view_id: pair.view_id,
                psnr_db: psnr(&rendered, &truth).map_err(with_path)?,
                ssim: ssim(&rendered, &truth).map_err(with_path)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    summarize(scores, reference_db)
}

#[derive(Serialize)]
struct ReportJson<'a> {
    count: usize,
    mean_psnr: f64,
    mean_ssim: f64,
    sdp: f64,
    below_reference_count: usize,
    reference_db: f64,
    histogram: &'a [HistogramBin],
}

impl EvalReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(ReportJson {
            count: self.scores.len(),
            mean_psnr: self.mean_psnr,
            mean_ssim: self.mean_ssim,
            sdp: self.sdp,
            below_reference_count: self.histogram.below_reference,
            reference_db: self.histogram.reference_db,
            histogram: &self.histogram.bins,
        })
        .expect("report fields are plain numbers")
    }

    pub fn write_scores_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "view_id,psnr_db,ssim")?;
        for s in &self.scores {
            writeln!(out, "{},{},{}", s.view_id, s.psnr_db, s.ssim)?;
        }
        Ok(())
    }

    pub fn write_histogram_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "lo_db,count")?;
        for b in &self.histogram.bins {
            writeln!(out, "{},{}", b.lo, b.count)?;
        }
        Ok(())
    }
}
