//! One function per subcommand. Each reads its inputs, writes its outputs
//! under the configured directory and returns a short summary.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::info;
use serde::{Deserialize, Serialize};

use rfield_core::evaluation::{evaluate_set, EvalPair, EvalReport};
use rfield_core::projection::{render_pair, render_projection, resolution_sweep, ProjectionImage};
use rfield_core::renderability::{
    build_field, farthest_point_sampling, read_field_jsonl, select_pseudo_views, write_field_jsonl,
};
use rfield_core::scene_io::{
    load_cameras, load_ply, save_depth_png, save_image, save_manifest, save_mask_png, save_ply, CameraEntry,
    ColorImage, Manifest, ManifestView,
};
use rfield_core::synth::{write_scene, RoomSpec};
use rfield_core::visibility::ViewStatus;
use rfield_core::{camera_center, ColorRGB, PointCloud, Scene};

use crate::config::Config;
use crate::InputError;

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

fn load_scene(config: &Config) -> Result<Scene> {
    let (ply, cameras) = (config.ply_path()?, config.cameras_path()?);
    let mut scene = Scene::load(&ply, &cameras)
        .with_context(|| format!("loading scene {} + {}", ply.display(), cameras.display()))?;
    if let Some(ids) = config.kept_views()? {
        if let Some(missing) = ids.iter().find(|&&id| scene.view(id).is_none()) {
            bail!(InputError(format!("view_ids lists unknown view {missing}")));
        }
        scene.views.retain(|v| ids.contains(&v.id));
    }
    Ok(scene)
}

fn load_camera_list(config: &Config) -> Result<Vec<CameraEntry>> {
    let mut cameras = load_cameras(&config.cameras_path()?)?;
    if let Some(ids) = config.kept_views()? {
        cameras.retain(|c| ids.contains(&c.id));
    }
    cameras.sort_by_key(|c| c.id);
    Ok(cameras)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSummary {
    pub candidates: usize,
    pub positions: usize,
    pub status_counts: BTreeMap<String, usize>,
}

/// Builds the field; writes `field.jsonl`, `field_viz.ply` and `field_summary.json`.
pub fn field(config: &Config) -> Result<FieldSummary> {
    let scene = load_scene(config)?;
    info!("scene: {} points, {} views", scene.cloud.len(), scene.views.len());
    let field = build_field(&scene, &config.field_config()?)?;
    create_dir(&config.out)?;

    let mut out = create(&config.out.join("field.jsonl"))?;
    write_field_jsonl(&field.candidates, &mut out)?;
    out.flush()?;

    // One point per grid position, colored by its best direction.
    let positions: Vec<_> = field.candidates.chunks(6).map(|c| c[0].position).collect();
    let best: Vec<f64> = field
        .candidates
        .chunks(6)
        .map(|c| c.iter().filter_map(|c| c.renderability()).fold(0.0, f64::max))
        .collect();
    if !positions.is_empty() {
        let n = positions.len();
        let viz = PointCloud::new(positions, vec![ColorRGB::BLACK; n])?;
        save_ply(&viz, &config.out.join("field_viz.ply"), Some(&best))?;
    }

    let summary = FieldSummary {
        candidates: field.candidates.len(),
        positions: best.len(),
        status_counts: ViewStatus::ALL
            .iter()
            .map(|&s| (s.as_str().to_string(), field.count(s)))
            .collect(),
    };
    write_json(&summary, &config.out.join("field_summary.json"))?;
    info!("field: {} candidates, {:?}", summary.candidates, summary.status_counts);
    Ok(summary)
}

/// Selects pseudo-views in the renderability band; writes `pseudo_views.json`
/// (a camera manifest, weakest first) and `pseudo_views.csv`.
pub fn sample(config: &Config, field_path: &Path) -> Result<usize> {
    if !field_path.exists() {
        bail!(InputError(format!("field file not found: {}", field_path.display())));
    }
    let candidates = read_field_jsonl(BufReader::new(File::open(field_path)?))
        .with_context(|| format!("reading {}", field_path.display()))?;
    let k = load_camera_list(config)?
        .first()
        .ok_or_else(|| InputError("no source views to take intrinsics from".into()))?
        .intrinsics;
    let picked = select_pseudo_views(&candidates, config.band_lo, config.band_hi)?;

    create_dir(&config.out)?;
    let mut manifest = Manifest::default();
    let mut table = create(&config.out.join("pseudo_views.csv"))?;
    writeln!(table, "id,v,x,y,z,dir")?;
    for (id, c) in picked.iter().enumerate() {
        manifest
            .views
            .push(ManifestView::from_camera(id as u32, &c.pose, &k, None));
        let p = c.position;
        writeln!(
            table,
            "{id},{},{},{},{},{}",
            c.renderability().unwrap_or(f64::NAN),
            p.x,
            p.y,
            p.z,
            c.direction
        )?;
    }
    table.flush()?;
    save_manifest(&manifest, &config.out.join("pseudo_views.json"))?;
    info!(
        "sample: {} of {} candidates in [{}, {}]",
        picked.len(),
        candidates.len(),
        config.band_lo,
        config.band_hi
    );
    Ok(picked.len())
}

fn save_projection(img: &ProjectionImage, dir: &Path, id: u32) -> Result<()> {
    save_image(&img.rgb, &dir.join(format!("view_{id:04}.png")))?;
    save_depth_png(
        img.depth(),
        img.width(),
        img.height(),
        &dir.join(format!("depth_{id:04}.png")),
    )?;
    save_mask_png(
        &img.mask(),
        img.width(),
        img.height(),
        &dir.join(format!("mask_{id:04}.png")),
    )?;
    Ok(())
}

/// Renders the cloud at every pose of a manifest into `projections/`. With
/// `cells`, also renders each voxel resolution into `projections/cell_<c>/`
/// and records coverage in `projections/sweep.csv`.
pub fn project(config: &Config, manifest_path: &Path, cells: Option<&[f64]>) -> Result<usize> {
    let cloud = load_ply(&config.ply_path()?)?;
    if !manifest_path.exists() {
        bail!(InputError(format!("manifest not found: {}", manifest_path.display())));
    }
    let cameras = load_cameras(manifest_path)?;
    let dir = config.out.join("projections");
    create_dir(&dir)?;
    for cam in &cameras {
        let img = render_projection(&cloud, &cam.pose, &cam.intrinsics, config.splat_radius);
        save_projection(&img, &dir, cam.id)?;
    }
    if let Some(cells) = cells {
        let mut sweep = create(&dir.join("sweep.csv"))?;
        writeln!(sweep, "view_id,cell,coverage")?;
        for cam in &cameras {
            for level in resolution_sweep(&cloud, &cam.pose, &cam.intrinsics, cells, config.splat_radius)? {
                let sub = dir.join(format!("cell_{}", level.cell));
                create_dir(&sub)?;
                save_projection(&level.image, &sub, cam.id)?;
                writeln!(sweep, "{},{},{}", cam.id, level.cell, level.coverage)?;
            }
        }
        sweep.flush()?;
    }
    info!("project: {} poses", cameras.len());
    Ok(cameras.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEntry {
    pub view_id: u32,
    pub projection: String,
    pub ground_truth: String,
}

fn side_by_side(a: &ColorImage, b: &ColorImage) -> ColorImage {
    let (w, h) = (a.width() + b.width(), a.height().max(b.height()));
    let mut out = ColorImage::new(w, h, ColorRGB::BLACK);
    for (img, x0) in [(a, 0), (b, a.width())] {
        for y in 0..img.height() {
            for x in 0..img.width() {
                out.set(x0 + x, y, img.get(x, y));
            }
        }
    }
    out
}

/// Projection / ground-truth pairs for every source view, under `pairs/`,
/// listed in `pairs.json` and `pairs.csv`.
pub fn pairs(config: &Config) -> Result<Vec<PairEntry>> {
    let scene = load_scene(config)?;
    let dir = config.out.join("pairs");
    create_dir(&dir)?;
    let mut entries = Vec::new();
    for v in &scene.views {
        let (proj, truth) = render_pair(&scene, v.id, config.splat_radius)?;
        let entry = PairEntry {
            view_id: v.id,
            projection: format!("proj_{:04}.png", v.id),
            ground_truth: format!("gt_{:04}.png", v.id),
        };
        save_image(&proj.rgb, &dir.join(&entry.projection))?;
        save_image(&truth, &dir.join(&entry.ground_truth))?;
        save_image(
            &side_by_side(&proj.rgb, &truth),
            &dir.join(format!("side_{:04}.png", v.id)),
        )?;
        entries.push(entry);
    }
    write_json(&entries, &dir.join("pairs.json"))?;
    let mut csv = csv::Writer::from_path(dir.join("pairs.csv"))?;
    csv.write_record(["view_id", "rendered", "ground_truth"])?;
    for e in &entries {
        csv.write_record([e.view_id.to_string().as_str(), &e.projection, &e.ground_truth])?;
    }
    csv.flush()?;
    info!("pairs: {} views", entries.len());
    Ok(entries)
}

#[derive(Debug, Deserialize)]
struct PairRow {
    view_id: u32,
    rendered: PathBuf,
    ground_truth: PathBuf,
}

/// Reads a `view_id,rendered,ground_truth` CSV; relative paths are taken
/// from the CSV's directory.
pub fn read_pairs_csv(path: &Path) -> Result<Vec<EvalPair>> {
    let base = path.parent().unwrap_or(Path::new(""));
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    reader
        .deserialize::<PairRow>()
        .enumerate()
        .map(|(n, row)| {
            let row = row.with_context(|| format!("{} row {}", path.display(), n + 1))?;
            Ok(EvalPair {
                view_id: row.view_id,
                rendered: base.join(row.rendered),
                ground_truth: base.join(row.ground_truth),
            })
        })
        .collect()
}

/// Scores every pair; writes `eval_report.json`, `eval_scores.csv` and
/// `eval_histogram.csv`.
pub fn eval(config: &Config, pairs_csv: &Path) -> Result<EvalReport> {
    if !pairs_csv.exists() {
        bail!(InputError(format!("pairs file not found: {}", pairs_csv.display())));
    }
    let pairs = read_pairs_csv(pairs_csv)?;
    let report = evaluate_set(&pairs, config.reference_db)?;
    create_dir(&config.out)?;
    write_json(&report.to_json(), &config.out.join("eval_report.json"))?;
    let mut scores = create(&config.out.join("eval_scores.csv"))?;
    report.write_scores_csv(&mut scores)?;
    scores.flush()?;
    let mut hist = create(&config.out.join("eval_histogram.csv"))?;
    report.write_histogram_csv(&mut hist)?;
    hist.flush()?;
    info!(
        "eval: {} pairs, mean PSNR {:.3} dB, SDP {:.3}",
        report.scores.len(),
        report.mean_psnr,
        report.sdp
    );
    Ok(report)
}

/// Test-set size for a `test:train` ratio, rounded to nearest.
pub fn split_count(n: usize, ratio: &str) -> Result<usize> {
    let parse = |s: &str| {
        s.trim()
            .parse::<u32>()
            .map_err(|e| InputError(format!("bad ratio {ratio:?}: {e}")))
    };
    let (test, train) = ratio
        .split_once(':')
        .ok_or_else(|| InputError(format!("ratio must look like 1:7, got {ratio:?}")))?;
    let (test, train) = (parse(test)?, parse(train)?);
    if test == 0 || train == 0 {
        bail!(InputError(format!("ratio parts must be positive, got {ratio:?}")));
    }
    Ok((n as f64 * test as f64 / (test + train) as f64).round() as usize)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub test: Vec<u32>,
    pub train: Vec<u32>,
}

/// Farthest point sampling over camera centers picks `k` test views; the rest
/// train. Writes `test_ids.json` and `train_ids.json`, ids ascending.
pub fn split(config: &Config, k: Option<usize>, ratio: Option<&str>) -> Result<Split> {
    let cameras = load_camera_list(config)?;
    let n = cameras.len();
    let k = match (k, ratio) {
        (Some(k), _) => k,
        (None, Some(r)) => split_count(n, r)?,
        (None, None) => split_count(n, "1:7")?,
    };
    if k < 1 || k >= n {
        bail!(InputError(format!(
            "test count {k} must lie in [1, {}) for {n} views",
            n
        )));
    }
    let centers: Vec<_> = cameras.iter().map(|c| camera_center(&c.pose)).collect();
    let picks = farthest_point_sampling(&centers, k)?;
    let mut is_test = vec![false; n];
    for i in picks {
        is_test[i] = true;
    }
    let (test, train): (Vec<_>, Vec<_>) = cameras.iter().zip(&is_test).partition(|(_, &t)| t);
    let split = Split {
        test: test.into_iter().map(|(c, _)| c.id).collect(),
        train: train.into_iter().map(|(c, _)| c.id).collect(),
    };
    create_dir(&config.out)?;
    write_json(&split.test, &config.out.join("test_ids.json"))?;
    write_json(&split.train, &config.out.join("train_ids.json"))?;
    info!("split: {} test / {} train", split.test.len(), split.train.len());
    Ok(split)
}

/// Writes a procedural scene (`cloud.ply`, `cameras.json`, `images/`).
pub fn synth(config: &Config, preset: &str, views: usize) -> Result<()> {
    let spec = match preset {
        "room" => RoomSpec::standard(views),
        "sealed-box" => RoomSpec::sealed_box(),
        "facing-wall" => RoomSpec::facing_wall(),
        other => bail!(InputError(format!(
            "unknown preset {other:?} (expected room, sealed-box or facing-wall)"
        ))),
    };
    let scene = spec.build()?;
    write_scene(&scene, &config.out)?;
    info!(
        "synth: {} points, {} views in {}",
        scene.cloud.len(),
        scene.views.len(),
        config.out.display()
    );
    Ok(())
}
