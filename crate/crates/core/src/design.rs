//! The motion design document: the user's scene-space intent.
//!
//! The JSON form is parsed through loosely typed "raw" structs so that type
//! errors carry a JSON path, then validated into [`MotionDesign`].

use std::fmt;

use nalgebra::{Matrix3, Vector3};
use serde::de::{self, SeqAccess, Visitor};
use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::camera::{CameraKey, Pattern, PatternSpec};
use crate::error::{Error, Result};
use crate::types::{BBox2D, Extrinsics, Intrinsics, Pixel, DEFAULT_HEIGHT, DEFAULT_WIDTH};

/// Boxes may extend this fraction of the canvas beyond each edge so objects
/// can enter or leave the frame.
pub const CANVAS_MARGIN: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Canvas {
    pub width: u32,
    pub height: u32,
}

impl Default for Canvas {
    fn default() -> Self {
        Canvas {
            width: DEFAULT_WIDTH,
            height: DEFAULT_HEIGHT,
        }
    }
}

/// Principal point and focal lengths; the canvas supplies the size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntrinsicsSpec {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CameraSpec {
    Patterns(Vec<PatternSpec>),
    Keyframes(Vec<CameraKey>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum DepthMode {
    MaskMean,
    ReferencePoint(Vec<(usize, Pixel)>),
    PerspectiveConsistency,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSpec {
    pub object_id: u32,
    pub key_boxes: Vec<(usize, BBox2D)>,
    pub depth_mode: DepthMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalTrackSpec {
    pub parent_object: Option<u32>,
    pub samples: Vec<(usize, Pixel)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionDesign {
    pub frame_count: usize,
    pub fps: u32,
    pub canvas: Canvas,
    pub intrinsics: Option<IntrinsicsSpec>,
    pub camera: CameraSpec,
    pub objects: Vec<ObjectSpec>,
    pub local_tracks: Vec<LocalTrackSpec>,
    pub text_prompt: String,
}

impl MotionDesign {
    /// A static camera with no objects.
    pub fn still(frame_count: usize, fps: u32) -> Self {
        MotionDesign {
            frame_count,
            fps,
            canvas: Canvas::default(),
            intrinsics: None,
            camera: CameraSpec::Patterns(vec![PatternSpec::stationary()]),
            objects: Vec::new(),
            local_tracks: Vec::new(),
            text_prompt: String::new(),
        }
    }

    pub fn object(&self, id: u32) -> Option<&ObjectSpec> {
        self.objects.iter().find(|o| o.object_id == id)
    }

    /// Explicit intrinsics from the document, if any, on its canvas.
    pub fn explicit_intrinsics(&self) -> Result<Option<Intrinsics>> {
        self.intrinsics
            .map(|k| Intrinsics::new(k.fx, k.fy, k.cx, k.cy, self.canvas.width, self.canvas.height))
            .transpose()
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.frame_count;
        let fail = |path: &str, msg: String| Err(Error::Validation(format!("{path}: {msg}")));
        if l < 2 {
            return fail("frame_count", format!("must be at least 2, got {l}"));
        }
        if self.fps == 0 {
            return fail("fps", "must be positive".into());
        }
        if self.canvas.width == 0 || self.canvas.height == 0 {
            return fail("canvas", "must be non-empty".into());
        }
        self.explicit_intrinsics()
            .map_err(|e| Error::Validation(format!("intrinsics: {e}")))?;

        match &self.camera {
            CameraSpec::Patterns(specs) => {
                if specs.is_empty() {
                    return fail("camera.patterns", "needs at least one entry".into());
                }
                for (i, s) in specs.iter().enumerate() {
                    s.validate()
                        .map_err(|e| Error::Validation(format!("camera.patterns[{i}]: {e}")))?;
                }
            }
            CameraSpec::Keyframes(keys) => {
                crate::camera::validate_keys(keys, l)
                    .map_err(|e| Error::Validation(format!("camera.keyframes: {e}")))?;
            }
        }

        let (w, h) = (f64::from(self.canvas.width), f64::from(self.canvas.height));
        let mut seen = Vec::new();
        for (i, obj) in self.objects.iter().enumerate() {
            let path = format!("objects[{i}]");
            if obj.object_id == 0 {
                return fail(&format!("{path}.id"), "0 is reserved for the static background".into());
            }
            if seen.contains(&obj.object_id) {
                return fail(&format!("{path}.id"), format!("duplicate object id {}", obj.object_id));
            }
            seen.push(obj.object_id);
            let frames: Vec<usize> = obj.key_boxes.iter().map(|(f, _)| *f).collect();
            check_key_frames(&frames, l, true).map_err(|m| Error::Validation(format!("{path}.key_boxes: {m}")))?;
            for (j, (_, b)) in obj.key_boxes.iter().enumerate() {
                BBox2D::new(b.cx, b.cy, b.w, b.h)
                    .map_err(|e| Error::Validation(format!("{path}.key_boxes[{j}]: {e}")))?;
                let inside = b.left() >= -CANVAS_MARGIN * w
                    && b.right() <= (1.0 + CANVAS_MARGIN) * w
                    && b.top() >= -CANVAS_MARGIN * h
                    && b.bottom() <= (1.0 + CANVAS_MARGIN) * h;
                if !inside {
                    return fail(
                        &format!("{path}.key_boxes[{j}]"),
                        "box extends beyond the canvas margin".into(),
                    );
                }
            }
            if let DepthMode::ReferencePoint(refs) = &obj.depth_mode {
                if refs.is_empty() {
                    return fail(
                        &format!("{path}.reference_points"),
                        "reference_point mode needs at least one point".into(),
                    );
                }
                let frames: Vec<usize> = refs.iter().map(|(f, _)| *f).collect();
                check_key_frames(&frames, l, false)
                    .map_err(|m| Error::Validation(format!("{path}.reference_points: {m}")))?;
            }
        }

        for (i, t) in self.local_tracks.iter().enumerate() {
            let path = format!("local_tracks[{i}]");
            let frames: Vec<usize> = t.samples.iter().map(|(f, _)| *f).collect();
            if frames.len() < 2 {
                return fail(&format!("{path}.samples"), "needs at least 2 samples".into());
            }
            if frames[0] != 0 {
                return fail(&format!("{path}.samples"), "first sample must be at frame 0".into());
            }
            check_key_frames(&frames, l, false).map_err(|m| Error::Validation(format!("{path}.samples: {m}")))?;
            if t.samples.iter().any(|(_, p)| !p[0].is_finite() || !p[1].is_finite()) {
                return fail(&format!("{path}.samples"), "positions must be finite".into());
            }
            if let Some(parent) = t.parent_object {
                let Some(obj) = self.object(parent) else {
                    return fail(&format!("{path}.parent"), format!("unknown object id {parent}"));
                };
                let start = t.samples[0].1;
                if !obj.key_boxes[0].1.contains(start) {
                    return fail(
                        &format!("{path}.samples[0]"),
                        format!("start lies outside the frame-0 box of parent {parent}"),
                    );
                }
            }
        }
        Ok(())
    }
}

/// Frames must be strictly increasing inside `[0, frame_count)`; with `span`
/// they must also start at 0 and end at `frame_count - 1`.
pub(crate) fn check_key_frames(frames: &[usize], frame_count: usize, span: bool) -> std::result::Result<(), String> {
    if span && frames.len() < 2 {
        return Err("needs at least 2 keys".into());
    }
    if frames.windows(2).any(|w| w[1] <= w[0]) {
        return Err("key frames not increasing".into());
    }
    if let Some(&last) = frames.last() {
        if last >= frame_count {
            return Err(format!("frame {last} beyond frame_count {frame_count}"));
        }
    }
    if span && (frames[0] != 0 || *frames.last().unwrap() != frame_count - 1) {
        return Err(format!("keys must span frames 0..={}", frame_count - 1));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// JSON representation

#[derive(Debug, Serialize, Deserialize)]
struct RawDesign {
    frame_count: usize,
    fps: u32,
    #[serde(default)]
    canvas: Canvas,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    intrinsics: Option<IntrinsicsSpec>,
    camera: RawCamera,
    #[serde(default)]
    objects: Vec<RawObject>,
    #[serde(default)]
    local_tracks: Vec<RawLocalTrack>,
    #[serde(default)]
    text_prompt: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawCamera {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    patterns: Option<Vec<RawPattern>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    keyframes: Option<Vec<RawKeyframe>>,
}

#[derive(Debug)]
struct RawPattern {
    name: String,
    magnitude: f64,
    radius: Option<f64>,
}

impl Serialize for RawPattern {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(2 + usize::from(self.radius.is_some())))?;
        seq.serialize_element(&self.name)?;
        seq.serialize_element(&self.magnitude)?;
        if let Some(r) = self.radius {
            seq.serialize_element(&r)?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for RawPattern {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct PatternVisitor;
        impl<'de> Visitor<'de> for PatternVisitor {
            type Value = RawPattern;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("[name, magnitude] or [name, magnitude, radius]")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<RawPattern, A::Error> {
                let name: String = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(0, &self))?;
                let magnitude: f64 = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(1, &self))?;
                let radius: Option<f64> = seq.next_element::<Option<f64>>()?.flatten();
                if seq.next_element::<de::IgnoredAny>()?.is_some() {
                    return Err(de::Error::invalid_length(4, &self));
                }
                Ok(RawPattern {
                    name,
                    magnitude,
                    radius,
                })
            }
        }
        d.deserialize_seq(PatternVisitor)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RawKeyframe {
    frame: usize,
    rotation: [f64; 9],
    translation: [f64; 3],
    #[serde(default = "one")]
    focal_scale: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Serialize, Deserialize)]
struct RawObject {
    id: u32,
    depth_mode: RawDepthMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reference_points: Option<Vec<RawFramePoint>>,
    key_boxes: Vec<RawKeyBox>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawDepthMode {
    MaskMean,
    ReferencePoint,
    Perspective,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawFramePoint {
    frame: usize,
    x: f64,
    y: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawKeyBox {
    frame: usize,
    cx: f64,
    cy: f64,
    w: f64,
    h: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawLocalTrack {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    parent: Option<u32>,
    samples: Vec<RawFramePoint>,
}

/// Parse and validate a design document.
pub fn parse_design(text: &str) -> Result<MotionDesign> {
    let mut de = serde_json::Deserializer::from_str(text);
    let raw: RawDesign = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        Error::Schema {
            path: if path.is_empty() || path == "." {
                "$".into()
            } else {
                path
            },
            message: e.into_inner().to_string(),
        }
    })?;
    de.end().map_err(|e| Error::Schema {
        path: "$".into(),
        message: e.to_string(),
    })?;
    let design = from_raw(raw)?;
    design.validate()?;
    Ok(design)
}

/// Inverse of [`parse_design`].
pub fn serialize_design(design: &MotionDesign) -> String {
    serde_json::to_string_pretty(&to_raw(design)).expect("design serializes")
}

fn from_raw(raw: RawDesign) -> Result<MotionDesign> {
    let camera = match (raw.camera.patterns, raw.camera.keyframes) {
        (Some(p), None) => CameraSpec::Patterns(
            p.into_iter()
                .enumerate()
                .map(|(i, rp)| {
                    let pattern: Pattern = rp.name.parse().map_err(|m: String| Error::Schema {
                        path: format!("camera.patterns[{i}][0]"),
                        message: m,
                    })?;
                    Ok(PatternSpec {
                        pattern,
                        magnitude: rp.magnitude,
                        radius: rp.radius,
                    })
                })
                .collect::<Result<_>>()?,
        ),
        (None, Some(k)) => CameraSpec::Keyframes(
            k.into_iter()
                .enumerate()
                .map(|(i, rk)| {
                    let rotation = Matrix3::from_row_slice(&rk.rotation);
                    let translation = Vector3::from_column_slice(&rk.translation);
                    let extrinsics = Extrinsics::new(rotation, translation)
                        .map_err(|e| Error::Validation(format!("camera.keyframes[{i}]: {e}")))?;
                    Ok(CameraKey {
                        frame: rk.frame,
                        extrinsics,
                        focal_scale: rk.focal_scale,
                    })
                })
                .collect::<Result<_>>()?,
        ),
        _ => {
            return Err(Error::Schema {
                path: "camera".into(),
                message: "exactly one of `patterns` or `keyframes` is required".into(),
            })
        }
    };

    let objects = raw
        .objects
        .into_iter()
        .enumerate()
        .map(|(i, o)| {
            let depth_mode = match (o.depth_mode, o.reference_points) {
                (RawDepthMode::MaskMean, _) => DepthMode::MaskMean,
                (RawDepthMode::Perspective, _) => DepthMode::PerspectiveConsistency,
                (RawDepthMode::ReferencePoint, Some(pts)) => {
                    DepthMode::ReferencePoint(pts.into_iter().map(|p| (p.frame, [p.x, p.y])).collect())
                }
                (RawDepthMode::ReferencePoint, None) => {
                    return Err(Error::Schema {
                        path: format!("objects[{i}].reference_points"),
                        message: "missing field `reference_points` for reference_point mode".into(),
                    })
                }
            };
            Ok(ObjectSpec {
                object_id: o.id,
                key_boxes: o
                    .key_boxes
                    .into_iter()
                    .map(|b| {
                        (
                            b.frame,
                            BBox2D {
                                cx: b.cx,
                                cy: b.cy,
                                w: b.w,
                                h: b.h,
                            },
                        )
                    })
                    .collect(),
                depth_mode,
            })
        })
        .collect::<Result<_>>()?;

    let local_tracks = raw
        .local_tracks
        .into_iter()
        .map(|t| LocalTrackSpec {
            parent_object: t.parent,
            samples: t.samples.into_iter().map(|p| (p.frame, [p.x, p.y])).collect(),
        })
        .collect();

    Ok(MotionDesign {
        frame_count: raw.frame_count,
        fps: raw.fps,
        canvas: raw.canvas,
        intrinsics: raw.intrinsics,
        camera,
        objects,
        local_tracks,
        text_prompt: raw.text_prompt,
    })
}

fn to_raw(d: &MotionDesign) -> RawDesign {
    let camera = match &d.camera {
        CameraSpec::Patterns(p) => RawCamera {
            patterns: Some(
                p.iter()
                    .map(|s| RawPattern {
                        name: s.pattern.name().to_string(),
                        magnitude: s.magnitude,
                        radius: s.radius,
                    })
                    .collect(),
            ),
            keyframes: None,
        },
        CameraSpec::Keyframes(k) => RawCamera {
            patterns: None,
            keyframes: Some(
                k.iter()
                    .map(|key| RawKeyframe {
                        frame: key.frame,
                        rotation: key.extrinsics.rotation_row_major(),
                        translation: [
                            key.extrinsics.translation.x,
                            key.extrinsics.translation.y,
                            key.extrinsics.translation.z,
                        ],
                        focal_scale: key.focal_scale,
                    })
                    .collect(),
            ),
        },
    };
    let objects = d
        .objects
        .iter()
        .map(|o| {
            let (depth_mode, reference_points) = match &o.depth_mode {
                DepthMode::MaskMean => (RawDepthMode::MaskMean, None),
                DepthMode::PerspectiveConsistency => (RawDepthMode::Perspective, None),
                DepthMode::ReferencePoint(pts) => (
                    RawDepthMode::ReferencePoint,
                    Some(
                        pts.iter()
                            .map(|(f, p)| RawFramePoint {
                                frame: *f,
                                x: p[0],
                                y: p[1],
                            })
                            .collect(),
                    ),
                ),
            };
            RawObject {
                id: o.object_id,
                depth_mode,
                reference_points,
                key_boxes: o
                    .key_boxes
                    .iter()
                    .map(|(f, b)| RawKeyBox {
                        frame: *f,
                        cx: b.cx,
                        cy: b.cy,
                        w: b.w,
                        h: b.h,
                    })
                    .collect(),
            }
        })
        .collect();
    let local_tracks = d
        .local_tracks
        .iter()
        .map(|t| RawLocalTrack {
            parent: t.parent_object,
            samples: t
                .samples
                .iter()
                .map(|(f, p)| RawFramePoint {
                    frame: *f,
                    x: p[0],
                    y: p[1],
                })
                .collect(),
        })
        .collect();
    RawDesign {
        frame_count: d.frame_count,
        fps: d.fps,
        canvas: d.canvas,
        intrinsics: d.intrinsics,
        camera,
        objects,
        local_tracks,
        text_prompt: d.text_prompt.clone(),
    }
}
