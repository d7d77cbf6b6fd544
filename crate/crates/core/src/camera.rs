//! Camera path synthesis from base motion patterns or pose keyframes.
//!
//! Sign conventions, with the camera looking down +z and +y pointing down:
//! positive pan turns the view right, positive tilt turns it up, positive
//! roll turns the camera clockwise about its optical axis, positive orbit
//! moves the camera to the right around a pivot `radius` units ahead.

use std::str::FromStr;

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};

use crate::design::check_key_frames;
use crate::error::{Error, Result};
use crate::spline::CatmullRom;
use crate::types::{CameraPath, Extrinsics, Intrinsics, POSE_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pattern {
    Trucking,
    Pedestal,
    Dolly,
    Pan,
    Tilt,
    Roll,
    Zoom,
    Orbit,
    Circle,
    Static,
}

impl Pattern {
    pub const ALL: [Pattern; 10] = [
        Pattern::Trucking,
        Pattern::Pedestal,
        Pattern::Dolly,
        Pattern::Pan,
        Pattern::Tilt,
        Pattern::Roll,
        Pattern::Zoom,
        Pattern::Orbit,
        Pattern::Circle,
        Pattern::Static,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Pattern::Trucking => "trucking",
            Pattern::Pedestal => "pedestal",
            Pattern::Dolly => "dolly",
            Pattern::Pan => "pan",
            Pattern::Tilt => "tilt",
            Pattern::Roll => "roll",
            Pattern::Zoom => "zoom",
            Pattern::Orbit => "orbit",
            Pattern::Circle => "circle",
            Pattern::Static => "static",
        }
    }

    pub fn needs_radius(self) -> bool {
        matches!(self, Pattern::Orbit | Pattern::Circle)
    }
}

impl FromStr for Pattern {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Pattern::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown camera pattern `{s}`"))
    }
}

/// One base motion with its signed magnitude.
///
/// Magnitudes are scene units for trucking/pedestal/dolly, radians for
/// pan/tilt/roll and for the angle swept by orbit/circle, and a fractional
/// focal change for zoom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternSpec {
    pub pattern: Pattern,
    pub magnitude: f64,
    pub radius: Option<f64>,
}

impl PatternSpec {
    pub fn new(pattern: Pattern, magnitude: f64) -> Self {
        PatternSpec {
            pattern,
            magnitude,
            radius: None,
        }
    }

    pub fn with_radius(pattern: Pattern, magnitude: f64, radius: f64) -> Self {
        PatternSpec {
            pattern,
            magnitude,
            radius: Some(radius),
        }
    }

    pub fn stationary() -> Self {
        PatternSpec::new(Pattern::Static, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.magnitude.is_finite() {
            return Err(Error::Validation("magnitude must be finite".into()));
        }
        if self.magnitude == 0.0 && self.pattern != Pattern::Static {
            return Err(Error::Validation(format!(
                "{} with zero magnitude; use `static`",
                self.pattern.name()
            )));
        }
        match (self.pattern.needs_radius(), self.radius) {
            (true, None) => Err(Error::Validation(format!("{} needs a radius", self.pattern.name()))),
            (true, Some(r)) if !(r.is_finite() && r > 0.0) => Err(Error::Domain(format!(
                "{} radius {r} must be positive",
                self.pattern.name()
            ))),
            (false, Some(_)) => Err(Error::Validation(format!(
                "{} does not take a radius",
                self.pattern.name()
            ))),
            _ => Ok(()),
        }
    }

    fn radius_checked(&self) -> Result<f64> {
        match self.radius {
            Some(r) if r > 0.0 && r.is_finite() => Ok(r),
            other => Err(Error::Domain(format!(
                "{} radius {:?} must be positive",
                self.pattern.name(),
                other
            ))),
        }
    }

    /// Camera-center displacement contributed at progress `s`.
    fn center_offset(&self, s: f64) -> Result<Vector3<f64>> {
        let d = self.magnitude * s;
        Ok(match self.pattern {
            Pattern::Trucking => Vector3::new(d, 0.0, 0.0),
            Pattern::Pedestal => Vector3::new(0.0, -d, 0.0),
            Pattern::Dolly => Vector3::new(0.0, 0.0, d),
            Pattern::Circle => {
                let r = self.radius_checked()?;
                Vector3::new(r * d.sin(), r * (d.cos() - 1.0), 0.0)
            }
            _ => Vector3::zeros(),
        })
    }

    /// World-to-camera rotation contributed at progress `s` by pan/tilt/roll.
    fn rotation(&self, s: f64) -> Matrix3<f64> {
        let theta = self.magnitude * s;
        match self.pattern {
            Pattern::Pan => rot_y(-theta),
            Pattern::Tilt => rot_x(-theta),
            Pattern::Roll => rot_z(-theta),
            _ => Matrix3::identity(),
        }
    }

    fn orbit(&self, s: f64) -> Result<Extrinsics> {
        let r = self.radius_checked()?;
        let rot = rot_y(self.magnitude * s);
        let pivot = Vector3::new(0.0, 0.0, r);
        Ok(Extrinsics {
            rotation: rot,
            translation: pivot - rot * pivot,
        })
    }

    fn focal_factor(&self, s: f64) -> Result<f64> {
        if self.pattern != Pattern::Zoom {
            return Ok(1.0);
        }
        let f = 1.0 + self.magnitude * s;
        if f <= 0.0 {
            return Err(Error::Domain(format!(
                "zoom {} drives the focal length to {f} times its start",
                self.magnitude
            )));
        }
        Ok(f)
    }
}

pub fn rot_x(a: f64) -> Matrix3<f64> {
    Rotation3::from_axis_angle(&Vector3::x_axis(), a).into_inner()
}

pub fn rot_y(a: f64) -> Matrix3<f64> {
    Rotation3::from_axis_angle(&Vector3::y_axis(), a).into_inner()
}

pub fn rot_z(a: f64) -> Matrix3<f64> {
    Rotation3::from_axis_angle(&Vector3::z_axis(), a).into_inner()
}

/// Pose and intrinsics of a single pattern at progress `s` in `[0, 1]`.
pub fn pattern_pose(spec: &PatternSpec, s: f64, intrinsics0: &Intrinsics) -> Result<(Extrinsics, Intrinsics)> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Domain(format!("progress {s} outside [0, 1]")));
    }
    let k = intrinsics0.with_focal_scale(spec.focal_factor(s)?)?;
    let e = match spec.pattern {
        Pattern::Trucking | Pattern::Pedestal | Pattern::Dolly | Pattern::Circle => {
            Extrinsics::from_center(Matrix3::identity(), spec.center_offset(s)?)
        }
        Pattern::Pan | Pattern::Tilt | Pattern::Roll => Extrinsics {
            rotation: spec.rotation(s),
            translation: Vector3::zeros(),
        },
        Pattern::Orbit => spec.orbit(s)?,
        Pattern::Zoom | Pattern::Static => Extrinsics::identity(),
    };
    Ok((e, k))
}

/// Pose of a pattern mix at progress `s`.
///
/// The mix composes `orbit ∘ rotation ∘ translation`: camera-center offsets
/// of trucking/pedestal/dolly/circle are summed, pan·tilt·roll multiply in
/// that order, orbits apply last in list order, and zoom factors multiply.
pub fn mix_pose(specs: &[PatternSpec], s: f64, intrinsics0: &Intrinsics) -> Result<(Extrinsics, Intrinsics)> {
    let mut center = Vector3::zeros();
    let mut focal = 1.0;
    for spec in specs {
        center += spec.center_offset(s)?;
        focal *= spec.focal_factor(s)?;
    }
    let by_kind = |p: Pattern| {
        specs
            .iter()
            .filter(move |spec| spec.pattern == p)
            .fold(Matrix3::<f64>::identity(), |acc, spec| acc * spec.rotation(s))
    };
    let rotation = by_kind(Pattern::Pan) * by_kind(Pattern::Tilt) * by_kind(Pattern::Roll);

    let translate = Extrinsics::from_center(Matrix3::identity(), center);
    let rotate = Extrinsics {
        rotation,
        translation: Vector3::zeros(),
    };
    let mut e = rotate.compose(&translate);
    for spec in specs.iter().filter(|spec| spec.pattern == Pattern::Orbit) {
        e = spec.orbit(s)?.compose(&e);
    }
    Ok((e, intrinsics0.with_focal_scale(focal)?))
}

/// Sample a pattern mix at constant speed over `frame_count` frames.
pub fn mix_patterns(specs: &[PatternSpec], frame_count: usize, intrinsics0: &Intrinsics) -> Result<CameraPath> {
    if frame_count < 2 {
        return Err(Error::Validation(format!(
            "frame_count {frame_count} must be at least 2"
        )));
    }
    for spec in specs {
        if spec.pattern.needs_radius() {
            spec.radius_checked()?;
        }
    }
    let last = (frame_count - 1) as f64;
    let mut frames = Vec::with_capacity(frame_count);
    frames.push((Extrinsics::identity(), *intrinsics0));
    for l in 1..frame_count {
        frames.push(mix_pose(specs, l as f64 / last, intrinsics0)?);
    }
    CameraPath::new(frames)
}

/// A user-placed camera pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraKey {
    pub frame: usize,
    pub extrinsics: Extrinsics,
    pub focal_scale: f64,
}

pub(crate) fn validate_keys(keys: &[CameraKey], frame_count: usize) -> Result<()> {
    let frames: Vec<usize> = keys.iter().map(|k| k.frame).collect();
    check_key_frames(&frames, frame_count, true).map_err(Error::Validation)?;
    if !keys[0].extrinsics.is_identity(POSE_TOLERANCE) {
        return Err(Error::Validation("the frame-0 key must be the identity pose".into()));
    }
    if (keys[0].focal_scale - 1.0).abs() > POSE_TOLERANCE {
        return Err(Error::Validation("the frame-0 key must have focal_scale 1".into()));
    }
    for (i, k) in keys.iter().enumerate() {
        if !(k.focal_scale.is_finite() && k.focal_scale > 0.0) {
            return Err(Error::Validation(format!("key {i}: focal_scale must be positive")));
        }
    }
    Ok(())
}

/// Interpolate pose keys: camera centers along a centripetal Catmull-Rom
/// spline, orientations by shortest-arc slerp between neighboring keys, and
/// focal scale linearly. Key frames are reproduced exactly.
pub fn keyframe_path(keys: &[CameraKey], frame_count: usize, intrinsics0: &Intrinsics) -> Result<CameraPath> {
    validate_keys(keys, frame_count)?;
    let times: Vec<f64> = keys.iter().map(|k| k.frame as f64).collect();
    let centers: Vec<[f64; 3]> = keys
        .iter()
        .map(|k| {
            let c = k.extrinsics.center();
            [c.x, c.y, c.z]
        })
        .collect();
    let spline = CatmullRom::new(&times, &centers)?;
    let quats: Vec<UnitQuaternion<f64>> = keys
        .iter()
        .map(|k| UnitQuaternion::from_matrix(&k.extrinsics.rotation))
        .collect();

    let mut frames = Vec::with_capacity(frame_count);
    for f in 0..frame_count {
        let seg = keys.partition_point(|k| k.frame <= f) - 1;
        let key = &keys[seg];
        if key.frame == f {
            frames.push((key.extrinsics, intrinsics0.with_focal_scale(key.focal_scale)?));
            continue;
        }
        let next = &keys[seg + 1];
        let s = (f - key.frame) as f64 / (next.frame - key.frame) as f64;
        let q0 = quats[seg];
        let mut q1 = quats[seg + 1];
        if q0.coords.dot(&q1.coords) < 0.0 {
            q1 = UnitQuaternion::new_unchecked(-q1.into_inner());
        }
        let q = q0.slerp(&q1, s);
        let c = spline.eval(f as f64);
        let e = Extrinsics::from_center(q.to_rotation_matrix().into_inner(), Vector3::from(c));
        let focal = key.focal_scale + (next.focal_scale - key.focal_scale) * s;
        frames.push((e, intrinsics0.with_focal_scale(focal)?));
    }
    CameraPath::new(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn k() -> Intrinsics {
        Intrinsics::new(400.0, 400.0, 320.0, 176.0, 640, 352).unwrap()
    }

    fn project(e: &Extrinsics, k: &Intrinsics, x: Vector3<f64>) -> [f64; 2] {
        let c = e.transform(&x);
        [k.cx + k.fx * c.x / c.z, k.cy + k.fy * c.y / c.z]
    }

    #[test]
    fn static_pattern_is_identity() {
        let (e, kk) = pattern_pose(&PatternSpec::stationary(), 0.7, &k()).unwrap();
        assert!(e.is_identity(0.0));
        assert_eq!(kk, k());
    }

    #[test]
    fn dolly_moves_the_camera_forward() {
        let (e, kk) = pattern_pose(&PatternSpec::new(Pattern::Dolly, 0.5), 1.0, &k()).unwrap();
        let x = Vector3::new(0.8, 0.0, 2.0);
        assert_relative_eq!(e.transform(&x), Vector3::new(0.8, 0.0, 1.5), epsilon = 1e-12);
        assert_relative_eq!(project(&e, &kk, x)[0], 320.0 + 400.0 * 0.8 / 1.5, epsilon = 1e-9);
    }

    #[test]
    fn pan_right_moves_content_left() {
        let (e, kk) = pattern_pose(&PatternSpec::new(Pattern::Pan, 0.1), 1.0, &k()).unwrap();
        let x = Vector3::new(0.0, 0.0, 2.0);
        let xc = e.transform(&x);
        assert_relative_eq!(
            xc,
            Vector3::new(-2.0 * 0.1f64.sin(), 0.0, 2.0 * 0.1f64.cos()),
            epsilon = 1e-12
        );
        let u = project(&e, &kk, x)[0];
        assert_relative_eq!(u, 320.0 - 400.0 * 0.1f64.tan(), epsilon = 1e-9);
        assert!((u - 279.87).abs() < 5e-3);
    }

    #[test]
    fn tilt_up_moves_content_down_and_pedestal_up_too() {
        let x = Vector3::new(0.0, 0.0, 2.0);
        let (e, kk) = pattern_pose(&PatternSpec::new(Pattern::Tilt, 0.1), 1.0, &k()).unwrap();
        assert!(project(&e, &kk, x)[1] > 176.0);
        let (e, kk) = pattern_pose(&PatternSpec::new(Pattern::Pedestal, 0.1), 1.0, &k()).unwrap();
        assert!(project(&e, &kk, x)[1] > 176.0);
    }

    #[test]
    fn zoom_scales_focal_and_rejects_collapse() {
        let (e, kk) = pattern_pose(&PatternSpec::new(Pattern::Zoom, 0.5), 0.5, &k()).unwrap();
        assert!(e.is_identity(0.0));
        assert_relative_eq!(kk.fx, 500.0, epsilon = 1e-12);
        assert!(matches!(
            pattern_pose(&PatternSpec::new(Pattern::Zoom, -1.0), 1.0, &k()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn orbit_keeps_the_pivot_on_the_principal_point() {
        let spec = PatternSpec::with_radius(Pattern::Orbit, 0.8, 3.0);
        for i in 0..=10 {
            let (e, kk) = pattern_pose(&spec, i as f64 / 10.0, &k()).unwrap();
            let p = project(&e, &kk, Vector3::new(0.0, 0.0, 3.0));
            assert_relative_eq!(p[0], 320.0, epsilon = 1e-9);
            assert_relative_eq!(p[1], 176.0, epsilon = 1e-9);
        }
        let (e, _) = pattern_pose(&spec, 1.0, &k()).unwrap();
        assert!(e.center().x > 0.0, "positive orbit travels right");
        assert!(matches!(
            pattern_pose(&PatternSpec::with_radius(Pattern::Orbit, 0.8, 0.0), 0.5, &k()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn circle_translates_without_rotation() {
        let spec = PatternSpec::with_radius(Pattern::Circle, std::f64::consts::PI, 0.5);
        let (e, _) = pattern_pose(&spec, 1.0, &k()).unwrap();
        assert_eq!(e.rotation, Matrix3::identity());
        assert_relative_eq!(e.center(), Vector3::new(0.0, -1.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn mix_of_static_is_identity_everywhere() {
        let path = mix_patterns(&[PatternSpec::stationary()], 8, &k()).unwrap();
        assert_eq!(path.len(), 8);
        assert!(path.frames().iter().all(|(e, kk)| e.is_identity(0.0) && *kk == k()));
    }

    #[test]
    fn trucking_shifts_a_pixel_by_focal_over_depth() {
        let path = mix_patterns(&[PatternSpec::new(Pattern::Trucking, 0.1)], 2, &k()).unwrap();
        let e = path.extrinsics(1);
        assert_relative_eq!(e.translation, Vector3::new(-0.1, 0.0, 0.0), epsilon = 1e-15);
        assert_relative_eq!(project(e, &k(), Vector3::new(0.0, 0.0, 2.0))[0], 300.0, epsilon = 1e-12);
    }

    #[test]
    fn dolly_and_pan_compose_rotation_after_translation() {
        let specs = [
            PatternSpec::new(Pattern::Dolly, 0.5),
            PatternSpec::new(Pattern::Pan, 0.1),
        ];
        let path = mix_patterns(&specs, 2, &k()).unwrap();
        let (dolly, _) = pattern_pose(&specs[0], 1.0, &k()).unwrap();
        let (pan, _) = pattern_pose(&specs[1], 1.0, &k()).unwrap();
        let expected = pan.compose(&dolly);
        assert_relative_eq!(path.extrinsics(1).rotation, expected.rotation, epsilon = 1e-15);
        assert_relative_eq!(path.extrinsics(1).translation, expected.translation, epsilon = 1e-15);
    }

    #[test]
    fn single_pattern_mix_matches_pattern_pose() {
        let specs = [
            PatternSpec::new(Pattern::Roll, 0.3),
            PatternSpec::with_radius(Pattern::Orbit, -0.5, 2.0),
            PatternSpec::with_radius(Pattern::Circle, 1.0, 0.2),
            PatternSpec::new(Pattern::Zoom, 0.25),
        ];
        for spec in specs {
            let path = mix_patterns(&[spec], 9, &k()).unwrap();
            for l in 0..9 {
                let (e, kk) = pattern_pose(&spec, l as f64 / 8.0, &k()).unwrap();
                assert_relative_eq!(path.extrinsics(l).rotation, e.rotation, epsilon = 1e-15);
                assert_relative_eq!(path.extrinsics(l).translation, e.translation, epsilon = 1e-15);
                assert_eq!(*path.intrinsics(l), kk);
            }
        }
    }

    #[test]
    fn opposite_pans_are_inverse_rotations() {
        let a = mix_patterns(&[PatternSpec::new(Pattern::Pan, 0.4)], 16, &k()).unwrap();
        let b = mix_patterns(&[PatternSpec::new(Pattern::Pan, -0.4)], 16, &k()).unwrap();
        for l in 0..16 {
            let prod = a.extrinsics(l).rotation * b.extrinsics(l).rotation;
            assert_relative_eq!(prod, Matrix3::identity(), epsilon = 1e-9);
        }
    }

    #[test]
    fn pattern_names_parse() {
        for p in Pattern::ALL {
            assert_eq!(p.name().parse::<Pattern>().unwrap(), p);
        }
        assert!("spin".parse::<Pattern>().is_err());
    }

    fn key(frame: usize, e: Extrinsics, focal_scale: f64) -> CameraKey {
        CameraKey {
            frame,
            extrinsics: e,
            focal_scale,
        }
    }

    #[test]
    fn identical_identity_keys_give_a_constant_path() {
        let keys = [key(0, Extrinsics::identity(), 1.0), key(5, Extrinsics::identity(), 1.0)];
        let path = keyframe_path(&keys, 6, &k()).unwrap();
        assert!(path.frames().iter().all(|(e, kk)| e.is_identity(1e-15) && *kk == k()));
    }

    #[test]
    fn slerp_midpoint_of_a_single_axis_rotation() {
        let keys = [
            key(0, Extrinsics::identity(), 1.0),
            key(4, Extrinsics::new(rot_y(0.2), Vector3::zeros()).unwrap(), 1.0),
        ];
        let path = keyframe_path(&keys, 5, &k()).unwrap();
        assert_relative_eq!(path.extrinsics(2).rotation, rot_y(0.1), epsilon = 1e-9);
        assert_eq!(path.extrinsics(4).rotation, rot_y(0.2));
    }

    #[test]
    fn focal_scale_is_linear_between_keys() {
        let keys = [key(0, Extrinsics::identity(), 1.0), key(4, Extrinsics::identity(), 2.0)];
        let path = keyframe_path(&keys, 5, &k()).unwrap();
        assert_relative_eq!(path.intrinsics(1).fx, 500.0, epsilon = 1e-12);
    }

    #[test]
    fn keyframes_must_start_at_identity_and_increase() {
        let moved = Extrinsics::from_center(Matrix3::identity(), Vector3::new(0.0, 0.0, 1.0));
        assert!(keyframe_path(&[key(0, moved, 1.0), key(4, moved, 1.0)], 5, &k()).is_err());
        assert!(keyframe_path(&[key(0, Extrinsics::identity(), 1.0), key(3, moved, 1.0)], 5, &k()).is_err());
        let keys = [
            key(0, Extrinsics::identity(), 1.0),
            key(3, moved, 1.0),
            key(2, moved, 1.0),
            key(4, moved, 1.0),
        ];
        assert!(keyframe_path(&keys, 5, &k()).is_err());
    }
}
