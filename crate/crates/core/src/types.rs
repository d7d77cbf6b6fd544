//! Shared domain types and the global coordinate convention.
//!
//! Camera coordinates are right-handed with +x right, +y down and +z into the
//! scene. The world frame is the frame-0 camera frame, so every
//! [`CameraPath`] starts at the identity pose. A point projects to
//! `u = cx + fx * X / Z`, `v = cy + fy * Y / Z`.

use nalgebra::{Matrix3, Matrix3x4, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sub-pixel image position `[u, v]`.
pub type Pixel = [f64; 2];

/// Depths at or below this camera-space z are treated as behind the camera.
pub const Z_MIN: f64 = 1e-6;

/// Tolerance used when validating rotation matrices and identity poses.
pub const POSE_TOLERANCE: f64 = 1e-9;

pub const DEFAULT_WIDTH: u32 = 640;
pub const DEFAULT_HEIGHT: u32 = 352;
/// Vertical field of view used when no intrinsics are supplied.
pub const DEFAULT_VFOV_DEG: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        let k = Intrinsics {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    /// Pinhole intrinsics with a 50° vertical field of view and the principal
    /// point at the canvas center.
    pub fn default_for_canvas(width: u32, height: u32) -> Self {
        let fy = 0.5 * f64::from(height) / (0.5 * DEFAULT_VFOV_DEG).to_radians().tan();
        Intrinsics {
            fx: fy,
            fy,
            cx: 0.5 * f64::from(width),
            cy: 0.5 * f64::from(height),
            width,
            height,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.fx, self.fy, self.cx, self.cy].iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::Validation("intrinsics must be finite".into()));
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(Error::Validation(format!(
                "focal lengths must be positive (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Validation("canvas must be non-empty".into()));
        }
        if !(0.0..=f64::from(self.width)).contains(&self.cx) || !(0.0..=f64::from(self.height)).contains(&self.cy) {
            return Err(Error::Validation(format!(
                "principal point ({}, {}) outside the {}x{} canvas",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    /// Same principal point, focal lengths multiplied by `scale`.
    pub fn with_focal_scale(&self, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::Domain(format!("focal scale {scale} must be positive")));
        }
        Ok(Intrinsics {
            fx: self.fx * scale,
            fy: self.fy * scale,
            ..*self
        })
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// Normalized image coordinates of a pixel.
    pub fn normalize(&self, px: Pixel) -> [f64; 2] {
        [(px[0] - self.cx) / self.fx, (px[1] - self.cy) / self.fy]
    }

    pub fn contains(&self, px: Pixel) -> bool {
        px[0] >= 0.0 && px[1] >= 0.0 && px[0] < f64::from(self.width) && px[1] < f64::from(self.height)
    }
}

/// World-to-camera rigid transform: `X_cam = R * X_world + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrinsics {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Extrinsics {
    fn default() -> Self {
        Self::identity()
    }
}

impl Extrinsics {
    pub fn identity() -> Self {
        Extrinsics {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        check_rotation(&rotation)?;
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::Validation("translation must be finite".into()));
        }
        Ok(Extrinsics { rotation, translation })
    }

    /// Pose of a camera with world-to-camera rotation `rotation` whose optical
    /// center sits at `center` in world coordinates.
    pub fn from_center(rotation: Matrix3<f64>, center: Vector3<f64>) -> Self {
        Extrinsics {
            rotation,
            translation: -(rotation * center),
        }
    }

    /// Camera optical center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn transform(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * x + self.translation
    }

    /// `self ∘ inner`: apply `inner` first, then `self`.
    pub fn compose(&self, inner: &Extrinsics) -> Extrinsics {
        Extrinsics {
            rotation: self.rotation * inner.rotation,
            translation: self.rotation * inner.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Extrinsics {
        let rt = self.rotation.transpose();
        Extrinsics {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn matrix(&self) -> Matrix3x4<f64> {
        let mut m = Matrix3x4::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        (self.rotation - Matrix3::identity()).amax() <= tol && self.translation.amax() <= tol
    }

    /// Row-major rotation entries, as stored in design and bundle JSON.
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

pub(crate) fn check_rotation(r: &Matrix3<f64>) -> Result<()> {
    if !r.iter().all(|v| v.is_finite()) {
        return Err(Error::Validation("rotation must be finite".into()));
    }
    let ortho = (r.transpose() * r - Matrix3::identity()).amax();
    let det = r.determinant();
    if ortho > POSE_TOLERANCE || (det - 1.0).abs() > POSE_TOLERANCE {
        return Err(Error::Validation(format!(
            "rotation is not orthonormal with det +1 (|RᵀR−I|={ortho:.3e}, det={det})"
        )));
    }
    Ok(())
}

/// Per-frame camera poses and intrinsics. Frame 0 is the reference view.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraPath {
    frames: Vec<(Extrinsics, Intrinsics)>,
}

impl CameraPath {
    pub fn new(frames: Vec<(Extrinsics, Intrinsics)>) -> Result<Self> {
        let Some((first, k0)) = frames.first() else {
            return Err(Error::Validation("camera path needs at least one frame".into()));
        };
        if !first.is_identity(POSE_TOLERANCE) {
            return Err(Error::Validation(
                "camera path frame 0 must be the identity pose".into(),
            ));
        }
        for (l, (e, k)) in frames.iter().enumerate() {
            check_rotation(&e.rotation).map_err(|err| Error::Validation(format!("frame {l}: {err}")))?;
            if k.width != k0.width || k.height != k0.height {
                return Err(Error::Validation(format!(
                    "frame {l} canvas {}x{} differs from frame 0 {}x{}",
                    k.width, k.height, k0.width, k0.height
                )));
            }
        }
        Ok(CameraPath { frames })
    }

    /// Constant identity path of `len` frames.
    pub fn stationary(intrinsics: Intrinsics, len: usize) -> Self {
        CameraPath {
            frames: vec![(Extrinsics::identity(), intrinsics); len.max(1)],
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[(Extrinsics, Intrinsics)] {
        &self.frames
    }

    pub fn extrinsics(&self, l: usize) -> &Extrinsics {
        &self.frames[l].0
    }

    pub fn intrinsics(&self, l: usize) -> &Intrinsics {
        &self.frames[l].1
    }

    pub fn width(&self) -> u32 {
        self.frames[0].1.width
    }

    pub fn height(&self) -> u32 {
        self.frames[0].1.height
    }
}

/// Row-major raster with a top-left origin.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Copy> Grid<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "grid of {width}x{height} needs {} values, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Grid { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Grid {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks(self.width.max(1))
    }
}

pub type DepthMap = Grid<f64>;
pub type LabelMask = Grid<u32>;

impl DepthMap {
    /// Bilinear depth lookup; coordinates are clamped to the grid so pixel
    /// centers sit on integer coordinates.
    pub fn bilinear(&self, u: f64, v: f64) -> f64 {
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        let u = u.clamp(0.0, max_x);
        let v = v.clamp(0.0, max_y);
        let x0 = u.floor() as usize;
        let y0 = v.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = u - x0 as f64;
        let fy = v - y0 as f64;
        if fx == 0.0 && fy == 0.0 {
            return self.get(x0, y0);
        }
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

/// Everything known about the input view: its depth, which pixels belong to
/// moving objects, and the frame-0 intrinsics.
#[derive(Debug, Clone)]
pub struct SceneContext {
    pub width: u32,
    pub height: u32,
    pub depth: DepthMap,
    pub moving_mask: LabelMask,
    pub intrinsics0: Intrinsics,
}

impl SceneContext {
    pub fn new(depth: DepthMap, moving_mask: Option<LabelMask>, intrinsics0: Option<Intrinsics>) -> Result<Self> {
        let (w, h) = (depth.width(), depth.height());
        if w == 0 || h == 0 {
            return Err(Error::Validation("depth map is empty".into()));
        }
        for (i, &d) in depth.data().iter().enumerate() {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::NonPositiveDepth {
                    x: i % w,
                    y: i / w,
                    value: d,
                });
            }
        }
        let moving_mask = match moving_mask {
            Some(m) if m.width() != w || m.height() != h => {
                return Err(Error::DimensionMismatch(format!(
                    "mask is {}x{} but depth is {w}x{h}",
                    m.width(),
                    m.height()
                )))
            }
            Some(m) => m,
            None => LabelMask::filled(w, h, 0),
        };
        let (width, height) = (w as u32, h as u32);
        let intrinsics0 = match intrinsics0 {
            Some(k) => {
                if k.width != width || k.height != height {
                    return Err(Error::DimensionMismatch(format!(
                        "intrinsics canvas {}x{} but depth is {w}x{h}",
                        k.width, k.height
                    )));
                }
                k.validate()?;
                k
            }
            None => Intrinsics::default_for_canvas(width, height),
        };
        Ok(SceneContext {
            width,
            height,
            depth,
            moving_mask,
            intrinsics0,
        })
    }

    /// Flat-depth scene without moving objects; handy for tests and tools.
    pub fn flat(intrinsics0: Intrinsics, depth: f64) -> Result<Self> {
        let depth = DepthMap::filled(intrinsics0.width as usize, intrinsics0.height as usize, depth);
        SceneContext::new(depth, None, Some(intrinsics0))
    }

    pub fn with_intrinsics(&self, intrinsics0: Intrinsics) -> Result<Self> {
        SceneContext::new(self.depth.clone(), Some(self.moving_mask.clone()), Some(intrinsics0))
    }
}

/// Axis-aligned box given by its center and size, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox2D {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox2D {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        let b = BBox2D { cx, cy, w, h };
        if !(w > 0.0 && h > 0.0) || ![cx, cy, w, h].iter().all(|v| v.is_finite()) {
            return Err(Error::Validation(format!(
                "box ({cx}, {cy}, {w}, {h}) must be finite with positive size"
            )));
        }
        Ok(b)
    }

    pub fn center(&self) -> Pixel {
        [self.cx, self.cy]
    }

    pub fn left(&self) -> f64 {
        self.cx - 0.5 * self.w
    }

    pub fn right(&self) -> f64 {
        self.cx + 0.5 * self.w
    }

    pub fn top(&self) -> f64 {
        self.cy - 0.5 * self.h
    }

    pub fn bottom(&self) -> f64 {
        self.cy + 0.5 * self.h
    }

    /// Closed containment test.
    pub fn contains(&self, p: Pixel) -> bool {
        p[0] >= self.left() && p[0] <= self.right() && p[1] >= self.top() && p[1] <= self.bottom()
    }

    /// Integer pixel range `[x0, x1) x [y0, y1)` covered under the half-open
    /// fill convention, clipped to a `width x height` canvas.
    pub fn pixel_span(&self, width: usize, height: usize) -> Option<(usize, usize, usize, usize)> {
        let clip = |lo: f64, hi: f64, n: usize| -> Option<(usize, usize)> {
            let a = lo.ceil().max(0.0);
            let b = hi.ceil().min(n as f64);
            (a < b).then_some((a as usize, b as usize))
        };
        let (x0, x1) = clip(self.left(), self.right(), width)?;
        let (y0, y1) = clip(self.top(), self.bottom(), height)?;
        Some((x0, x1, y0, y1))
    }

    pub(crate) fn to_array(self) -> [f64; 4] {
        [self.cx, self.cy, self.w, self.h]
    }

    pub(crate) fn from_array(a: [f64; 4]) -> Self {
        BBox2D {
            cx: a[0],
            cy: a[1],
            w: a[2],
            h: a[3],
        }
    }
}

/// A screen-space trajectory with one position and visibility flag per frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointTrack {
    pub positions: Vec<Pixel>,
    pub visible: Vec<bool>,
}

impl PointTrack {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn slice(&self, start: usize, end: usize) -> PointTrack {
        PointTrack {
            positions: self.positions[start..end].to_vec(),
            visible: self.visible[start..end].to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn default_intrinsics_use_fifty_degree_fov() {
        let k = Intrinsics::default_for_canvas(640, 352);
        assert_relative_eq!(k.fy, 176.0 / 25f64.to_radians().tan(), epsilon = 1e-12);
        assert_eq!(k.fx, k.fy);
        assert_eq!((k.cx, k.cy), (320.0, 176.0));
    }

    #[test]
    fn intrinsics_reject_bad_values() {
        assert!(Intrinsics::new(0.0, 1.0, 1.0, 1.0, 4, 4).is_err());
        assert!(Intrinsics::new(1.0, 1.0, 5.0, 1.0, 4, 4).is_err());
        assert!(Intrinsics::new(1.0, 1.0, 4.0, 4.0, 4, 4).is_ok());
    }

    #[test]
    fn extrinsics_compose_and_invert() {
        let r = nalgebra::Rotation3::from_euler_angles(0.1, -0.2, 0.3).into_inner();
        let e = Extrinsics::new(r, Vector3::new(0.5, -1.0, 2.0)).unwrap();
        assert!(e.compose(&e.inverse()).is_identity(1e-12));
        let x = Vector3::new(1.0, 2.0, 3.0);
        let via = e.compose(&e).transform(&x);
        assert_relative_eq!(via, e.transform(&e.transform(&x)), epsilon = 1e-12);
        assert_relative_eq!(
            Extrinsics::from_center(r, e.center()).translation,
            e.translation,
            epsilon = 1e-12
        );
    }

    #[test]
    fn camera_path_requires_identity_first_frame() {
        let k = Intrinsics::default_for_canvas(64, 32);
        let shifted = Extrinsics::new(Matrix3::identity(), Vector3::new(0.1, 0.0, 0.0)).unwrap();
        assert!(CameraPath::new(vec![(shifted, k)]).is_err());
        assert!(CameraPath::new(vec![(Extrinsics::identity(), k), (shifted, k)]).is_ok());
        assert!(CameraPath::new(vec![]).is_err());
    }

    #[test]
    fn extrinsics_reject_non_rotation() {
        let m = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        assert!(Extrinsics::new(m, Vector3::zeros()).is_err());
    }

    #[test]
    fn bilinear_hits_grid_values_at_integers() {
        let g = DepthMap::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(g.bilinear(1.0, 0.0), 2.0);
        assert_eq!(g.bilinear(0.5, 0.5), 2.5);
        assert_eq!(g.bilinear(-3.0, 9.0), 3.0);
    }

    #[test]
    fn scene_rejects_non_positive_depth_and_bad_masks() {
        let d = DepthMap::new(2, 1, vec![1.0, 0.0]).unwrap();
        assert!(matches!(
            SceneContext::new(d, None, None),
            Err(Error::NonPositiveDepth { x: 1, y: 0, .. })
        ));
        let d = DepthMap::filled(2, 2, 1.0);
        let m = LabelMask::filled(3, 2, 0);
        assert!(matches!(
            SceneContext::new(d, Some(m), None),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn pixel_span_is_half_open_and_clipped() {
        let b = BBox2D::new(2.0, 2.0, 2.0, 2.0).unwrap();
        assert_eq!(b.pixel_span(10, 10), Some((1, 3, 1, 3)));
        let off = BBox2D::new(-10.0, 2.0, 2.0, 2.0).unwrap();
        assert_eq!(off.pixel_span(10, 10), None);
        let big = BBox2D::new(5.0, 5.0, 100.0, 100.0).unwrap();
        assert_eq!(big.pixel_span(10, 8), Some((0, 10, 0, 8)));
    }
}
