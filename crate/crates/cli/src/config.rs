//! Run configuration: a flat TOML file whose keys can each be overridden by a
//! command-line flag of the same name.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use rfield_core::evaluation::DEFAULT_REFERENCE_DB;
use rfield_core::projection::DEFAULT_SPLAT_RADIUS;
use rfield_core::renderability::{FieldConfig, DEFAULT_BAND, DEFAULT_PAIR_CAP};
use rfield_core::visibility::{DEFAULT_HPR_GAMMA, DEFAULT_MIN_CLEARANCE};
use rfield_core::{BoundingBox, Vec3};

use crate::InputError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Colored point cloud (PLY).
    pub ply: Option<PathBuf>,
    /// Camera manifest (JSON) or COLMAP text model.
    pub cameras: Option<PathBuf>,
    /// JSON list of view ids to keep as sources (for example `train_ids.json`).
    pub view_ids: Option<PathBuf>,
    pub out: PathBuf,
    /// Candidate grid spacing in meters.
    pub step: f64,
    /// Candidate box as `[min_x, min_y, min_z, max_x, max_y, max_z]`; the
    /// cloud's bounds when absent.
    pub bbox: Option<[f64; 6]>,
    pub band_lo: f64,
    pub band_hi: f64,
    pub voxel_cell: Option<f64>,
    pub interp_step: Option<f64>,
    pub exclude_radius: Option<f64>,
    pub min_clearance: f64,
    pub hpr_gamma: f64,
    /// Hidden point removal when associating points with source views.
    pub table_hpr: bool,
    pub splat_radius: u32,
    pub pair_cap: usize,
    pub seed: u64,
    /// Worker threads; 0 lets the runtime decide.
    pub threads: usize,
    pub reference_db: f64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            ply: None,
            cameras: None,
            view_ids: None,
            out: PathBuf::from("out"),
            step: 1.0,
            bbox: None,
            band_lo: DEFAULT_BAND.0,
            band_hi: DEFAULT_BAND.1,
            voxel_cell: None,
            interp_step: None,
            exclude_radius: None,
            min_clearance: DEFAULT_MIN_CLEARANCE,
            hpr_gamma: DEFAULT_HPR_GAMMA,
            table_hpr: true,
            splat_radius: DEFAULT_SPLAT_RADIUS,
            pair_cap: DEFAULT_PAIR_CAP,
            seed: 0,
            threads: 0,
            reference_db: DEFAULT_REFERENCE_DB,
        }
    }
}

fn parse_bbox(s: &str) -> std::result::Result<[f64; 6], String> {
    let values: Vec<f64> = s
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    values
        .try_into()
        .map_err(|v: Vec<f64>| format!("expected 6 comma-separated numbers, got {}", v.len()))
}

/// One optional flag per configuration key.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigFlags {
    #[arg(long)]
    pub ply: Option<PathBuf>,
    #[arg(long)]
    pub cameras: Option<PathBuf>,
    #[arg(long, alias = "view_ids")]
    pub view_ids: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long, value_parser = parse_bbox, value_name = "X0,Y0,Z0,X1,Y1,Z1", allow_hyphen_values = true)]
    pub bbox: Option<[f64; 6]>,
    #[arg(long, alias = "band_lo")]
    pub band_lo: Option<f64>,
    #[arg(long, alias = "band_hi")]
    pub band_hi: Option<f64>,
    #[arg(long, alias = "voxel_cell")]
    pub voxel_cell: Option<f64>,
    #[arg(long, alias = "interp_step")]
    pub interp_step: Option<f64>,
    #[arg(long, alias = "exclude_radius")]
    pub exclude_radius: Option<f64>,
    #[arg(long, alias = "min_clearance")]
    pub min_clearance: Option<f64>,
    #[arg(long, alias = "hpr_gamma")]
    pub hpr_gamma: Option<f64>,
    #[arg(long, alias = "table_hpr", value_name = "BOOL")]
    pub table_hpr: Option<bool>,
    #[arg(long, alias = "splat_radius")]
    pub splat_radius: Option<u32>,
    #[arg(long, alias = "pair_cap")]
    pub pair_cap: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, alias = "reference_db")]
    pub reference_db: Option<f64>,
}

impl ConfigFlags {
    fn apply(&self, c: &mut Config) {
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    c.$field = v.clone().into();
                }
            )*};
        }
        set!(
            ply,
            cameras,
            view_ids,
            out,
            step,
            bbox,
            band_lo,
            band_hi,
            voxel_cell,
            interp_step,
            exclude_radius
        );
        set!(
            min_clearance,
            hpr_gamma,
            table_hpr,
            splat_radius,
            pair_cap,
            seed,
            threads,
            reference_db
        );
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config fields are plain values")
    }

    /// Defaults, then the optional file, then flags.
    pub fn resolve(file: Option<&Path>, flags: &ConfigFlags) -> Result<Self> {
        let mut config = match file {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| InputError(format!("cannot read config {}: {e}", path.display())))?;
                Config::from_toml(&text).with_context(|| format!("invalid config {}", path.display()))?
            }
            None => Config::default(),
        };
        flags.apply(&mut config);
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("step", Some(self.step)),
            ("voxel_cell", self.voxel_cell),
            ("interp_step", self.interp_step),
            ("hpr_gamma", Some(self.hpr_gamma)),
        ];
        for (name, v) in positive {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    bail!(InputError(format!("{name} must be positive, got {v}")));
                }
            }
        }
        for (name, v) in [
            ("exclude_radius", self.exclude_radius),
            ("min_clearance", Some(self.min_clearance)),
        ] {
            if let Some(v) = v {
                if !(v >= 0.0 && v.is_finite()) {
                    bail!(InputError(format!("{name} must be non-negative, got {v}")));
                }
            }
        }
        if !(0.0 <= self.band_lo && self.band_lo <= self.band_hi && self.band_hi <= 1.0) {
            bail!(InputError(format!(
                "band [{}, {}] must satisfy 0 <= lo <= hi <= 1",
                self.band_lo, self.band_hi
            )));
        }
        if self.pair_cap < 2 {
            bail!(InputError(format!(
                "pair_cap must be at least 2, got {}",
                self.pair_cap
            )));
        }
        if let Some(b) = self.bbox {
            self.bounding_box_of(b)?;
        }
        Ok(())
    }

    fn bounding_box_of(&self, b: [f64; 6]) -> Result<BoundingBox> {
        BoundingBox::new(Vec3::new(b[0], b[1], b[2]), Vec3::new(b[3], b[4], b[5]))
            .map_err(|e| InputError(format!("bbox: {e}")).into())
    }

    pub fn field_config(&self) -> Result<FieldConfig> {
        Ok(FieldConfig {
            step: self.step,
            bbox: self.bbox.map(|b| self.bounding_box_of(b)).transpose()?,
            pseudo_intrinsics: None,
            voxel_cell: self.voxel_cell,
            interp_step: self.interp_step,
            exclude_radius: self.exclude_radius,
            min_clearance: self.min_clearance,
            hpr_gamma: self.hpr_gamma,
            table_hpr: self.table_hpr,
            pair_cap: self.pair_cap,
            seed: self.seed,
        })
    }

    /// Path of a required input, checked for existence.
    pub fn input(&self, key: &str, value: &Option<PathBuf>) -> Result<PathBuf> {
        let path = value
            .clone()
            .ok_or_else(|| InputError(format!("no {key} given (set `{key}` in the config or pass --{key})")))?;
        if !path.exists() {
            bail!(InputError(format!("{key} not found: {}", path.display())));
        }
        Ok(path)
    }

    pub fn ply_path(&self) -> Result<PathBuf> {
        self.input("ply", &self.ply)
    }

    pub fn cameras_path(&self) -> Result<PathBuf> {
        self.input("cameras", &self.cameras)
    }

    /// The `view_ids` list, when configured.
    pub fn kept_views(&self) -> Result<Option<Vec<u32>>> {
        if self.view_ids.is_none() {
            return Ok(None);
        }
        let path = self.input("view_ids", &self.view_ids)?;
        let text = fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
        let ids = serde_json::from_str(&text).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
        Ok(Some(ids))
    }
}
