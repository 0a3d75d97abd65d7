//! Renderability fields for novel view synthesis.
//!
//! Given a colored point map and a set of posed source images, this crate
//! scores every candidate viewpoint on a regular grid by how well the capture
//! observes it, picks weakly observed pseudo-views, renders z-buffered point
//! projections for them, and evaluates rendered test sets with PSNR, SSIM and
//! the standard deviation of PSNR.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod hull;
pub mod projection;
pub mod renderability;
pub mod scene_io;
pub mod spatial;
pub mod synth;
pub mod visibility;

pub use error::{Error, Result};
pub use geometry::{
    angle_at_point, camera_center, project_point, BoundingBox, CameraIntrinsics, ColorRGB, PixelCoord, Projection,
    RigidPose, Vec3,
};
pub use scene_io::{ColorImage, PointCloud, Scene, SourceView};
pub use visibility::ViewStatus;
