//! Linear algebra, the pinhole camera model and projection.
//!
//! Cameras follow the +z forward, +x right, +y down convention. A pose stores
//! the world-to-camera transform `x_cam = R x_world + t`, so a point is in
//! front of the camera exactly when its camera-frame z is positive.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scene coordinates in meters.
pub type Vec3 = Vector3<f64>;

/// Tolerance on `RᵀR = I` and `det R = 1` for a valid pose.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Normalized RGB color, each channel in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ColorRGB {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl ColorRGB {
    pub const BLACK: ColorRGB = ColorRGB::new(0.0, 0.0, 0.0);

    pub const fn new(r: f64, g: f64, b: f64) -> Self {
        ColorRGB { r, g, b }
    }

    /// Builds a color from 8-bit channels.
    pub fn from_u8(rgb: [u8; 3]) -> Self {
        ColorRGB::new(
            f64::from(rgb[0]) / 255.0,
            f64::from(rgb[1]) / 255.0,
            f64::from(rgb[2]) / 255.0,
        )
    }

    /// Quantizes to 8 bits with round-half-up, clamping to `[0, 1]` first.
    pub fn to_u8(self) -> [u8; 3] {
        let q = |c: f64| (c.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8;
        [q(self.r), q(self.g), q(self.b)]
    }

    pub fn clamped(self) -> Self {
        ColorRGB::new(self.r.clamp(0.0, 1.0), self.g.clamp(0.0, 1.0), self.b.clamp(0.0, 1.0))
    }

    pub fn as_array(self) -> [f64; 3] {
        [self.r, self.g, self.b]
    }

    /// Euclidean distance between two colors; at most √3 for normalized colors.
    pub fn distance(self, other: ColorRGB) -> f64 {
        let dr = self.r - other.r;
        let dg = self.g - other.g;
        let db = self.b - other.b;
        (dr * dr + dg * dg + db * db).sqrt()
    }
}

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        let finite = fx.is_finite() && fy.is_finite() && cx.is_finite() && cy.is_finite();
        if !finite || fx <= 0.0 || fy <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "focal lengths must be finite and positive (fx={fx}, fy={fy})"
            )));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!(
                "image size must be at least 1x1 (got {width}x{height})"
            )));
        }
        Ok(CameraIntrinsics {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// `true` when the pixel lies in `[0, width) x [0, height)`.
    pub fn contains(&self, px: PixelCoord) -> bool {
        px.u >= 0.0 && px.v >= 0.0 && px.u < f64::from(self.width) && px.v < f64::from(self.height)
    }

    /// Integer pixel holding `px`, if it is inside the image.
    pub fn pixel_index(&self, px: PixelCoord) -> Option<(u32, u32)> {
        if self.contains(px) {
            Some((px.u.floor() as u32, px.v.floor() as u32))
        } else {
            None
        }
    }
}

/// World-to-camera rigid transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidPose {
    rotation: Matrix3<f64>,
    translation: Vec3,
}

impl RigidPose {
    /// Validates `rotation` as a proper rotation within [`ROTATION_TOLERANCE`].
    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self> {
        check_rotation(&rotation, ROTATION_TOLERANCE)?;
        if !translation.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidPose("translation is not finite".into()));
        }
        Ok(RigidPose { rotation, translation })
    }

    pub fn identity() -> Self {
        RigidPose {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    /// Pose of a camera at `center` whose optical axis is `forward` and whose
    /// image-down axis is `down`. Both must be unit length and orthogonal.
    pub fn from_center_axes(center: Vec3, forward: Vec3, down: Vec3) -> Result<Self> {
        let right = down.cross(&forward);
        let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let translation = -(rotation * center);
        RigidPose::new(rotation, translation)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    /// Maps a world point into the camera frame.
    pub fn transform(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// Optical axis in world coordinates.
    pub fn forward(&self) -> Vec3 {
        self.rotation.row(2).transpose()
    }

    /// Row-major rotation entries.
    pub fn rotation_row_major(&self) -> [f64; 9] {
        let r = &self.rotation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
        ]
    }
}

/// Checks `RᵀR = I` and `det R = +1` to within `tol`.
pub fn check_rotation(rotation: &Matrix3<f64>, tol: f64) -> Result<()> {
    if !rotation.iter().all(|c| c.is_finite()) {
        return Err(Error::InvalidPose("rotation is not finite".into()));
    }
    let residual = (rotation.transpose() * rotation - Matrix3::identity()).amax();
    if residual > tol {
        return Err(Error::InvalidPose(format!(
            "rotation is not orthonormal (max |RᵀR - I| = {residual:e})"
        )));
    }
    let det = rotation.determinant();
    if (det - 1.0).abs() > tol {
        return Err(Error::InvalidPose(format!(
            "rotation determinant is {det}, expected +1"
        )));
    }
    Ok(())
}

/// Axis-aligned box, inclusive of its faces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min: Vec3,
    pub max: Vec3,
}

impl BoundingBox {
    pub fn new(min: Vec3, max: Vec3) -> Result<Self> {
        if (0..3).any(|i| !(min[i] <= max[i])) {
            return Err(Error::InvalidArgument(format!(
                "bounding box min {:?} exceeds max {:?}",
                min.as_slice(),
                max.as_slice()
            )));
        }
        Ok(BoundingBox { min, max })
    }

    /// Tight box around `points`, or `None` when empty.
    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Option<Self> {
        let mut iter = points.into_iter();
        let first = *iter.next()?;
        let (min, max) = iter.fold((first, first), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
        Some(BoundingBox { min, max })
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }
}

/// Image-plane coordinates in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelCoord {
    pub u: f64,
    pub v: f64,
}

/// Result of projecting a point that lies in front of the camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub pixel: PixelCoord,
    pub depth: f64,
}

/// Projects `p` with `p' = K (R p + t)`. Returns `None` when `p'_z <= 0`.
/// The caller decides whether the pixel is in bounds.
pub fn project_point(p: &Vec3, pose: &RigidPose, k: &CameraIntrinsics) -> Option<Projection> {
    let cam = pose.transform(p);
    let depth = cam.z;
    if depth <= 0.0 {
        return None;
    }
    // K is upper triangular with no skew, so expand it rather than multiply.
    let u = (k.fx * cam.x + k.cx * depth) / depth;
    let v = (k.fy * cam.y + k.cy * depth) / depth;
    Some(Projection {
        pixel: PixelCoord { u, v },
        depth,
    })
}

/// Camera origin in world coordinates, `-Rᵀ t`.
pub fn camera_center(pose: &RigidPose) -> Vec3 {
    -(pose.rotation.transpose() * pose.translation)
}

/// Angle in `[0, π]` between `a - p` and `b - p`.
pub fn angle_at_point(p: &Vec3, a: &Vec3, b: &Vec3) -> Result<f64> {
    let da = a - p;
    let db = b - p;
    let na = da.norm();
    let nb = db.norm();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Degenerate("angle undefined: endpoint coincides with apex"));
    }
    let cos = (da.dot(&db) / (na * nb)).clamp(-1.0, 1.0);
    Ok(cos.acos())
}
