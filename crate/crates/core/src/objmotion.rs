//! Scene-anchored bounding-box trajectories.
//!
//! Boxes drawn on the frame-0 canvas are interpolated over time, lifted to
//! 2.5D by giving the box center a depth, and re-projected through the camera
//! path so that their screen position and size follow the camera.

use crate::design::{check_key_frames, DepthMode, ObjectSpec};
use crate::error::{Error, Result};
use crate::spline::CatmullRom;
use crate::types::{BBox2D, CameraPath, Intrinsics, SceneContext, Z_MIN};
use crate::warp::{project, unproject};

/// Boxes on the frame-0 canvas plus the scene depth of each box center.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneBoxTrack {
    pub boxes: Vec<BBox2D>,
    pub depth: Vec<f64>,
}

/// Boxes in screen space plus the camera-space depth of each center.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreenBoxTrack {
    pub boxes: Vec<BBox2D>,
    pub z: Vec<f64>,
}

impl ScreenBoxTrack {
    pub fn slice(&self, start: usize, end: usize) -> ScreenBoxTrack {
        ScreenBoxTrack {
            boxes: self.boxes[start..end].to_vec(),
            z: self.z[start..end].to_vec(),
        }
    }
}

/// Smooth per-frame boxes through the key boxes (centripetal Catmull-Rom on
/// the `(cx, cy, w, h)` vector, parameterized by frame index).
pub fn interpolate_boxes(key_boxes: &[(usize, BBox2D)], frame_count: usize) -> Result<Vec<BBox2D>> {
    let frames: Vec<usize> = key_boxes.iter().map(|(f, _)| *f).collect();
    check_key_frames(&frames, frame_count, true).map_err(Error::Validation)?;
    let times: Vec<f64> = frames.iter().map(|&f| f as f64).collect();
    let keys: Vec<[f64; 4]> = key_boxes.iter().map(|(_, b)| b.to_array()).collect();
    let spline = CatmullRom::new(&times, &keys)?;
    Ok(spline.sample(frame_count).into_iter().map(BBox2D::from_array).collect())
}

/// Mean depth of the object's mask pixels inside `box0`. Falls back to the
/// mean over the whole box interior when the mask has no such pixels; the
/// second value reports whether the fallback was used.
pub fn initial_depth(ctx: &SceneContext, object_id: u32, box0: &BBox2D) -> Result<(f64, bool)> {
    let empty = Error::EmptyMask { object_id };
    let Some((x0, x1, y0, y1)) = box0.pixel_span(ctx.width as usize, ctx.height as usize) else {
        return Err(empty);
    };
    let (mut masked_sum, mut masked_n) = (0.0, 0usize);
    let (mut box_sum, mut box_n) = (0.0, 0usize);
    for y in y0..y1 {
        for x in x0..x1 {
            let d = ctx.depth.get(x, y);
            box_sum += d;
            box_n += 1;
            if ctx.moving_mask.get(x, y) == object_id {
                masked_sum += d;
                masked_n += 1;
            }
        }
    }
    if masked_n > 0 {
        Ok((masked_sum / masked_n as f64, false))
    } else if box_n > 0 {
        Ok((box_sum / box_n as f64, true))
    } else {
        Err(empty)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssignedDepths {
    pub depths: Vec<f64>,
    /// Set when the mask had no pixels for the object.
    pub warning: Option<String>,
}

/// Per-frame scene depth of the box centers.
///
/// * mask mean: the frame-0 mask average holds for every frame;
/// * reference point: depth sampled at each reference pixel, linear in frame
///   index between references and held beyond them. Frames before the first
///   reference blend from the mask average at frame 0;
/// * perspective consistency: `d_l = d_0 * h_0 / h_l`.
pub fn assign_depths(boxes: &[BBox2D], spec: &ObjectSpec, ctx: &SceneContext) -> Result<AssignedDepths> {
    let Some(box0) = boxes.first() else {
        return Err(Error::Validation("no boxes to assign depth to".into()));
    };
    let (d0, fallback) = initial_depth(ctx, spec.object_id, box0)?;
    let warning = fallback.then(|| {
        format!(
            "object {}: no mask pixels inside the first box; used the box-interior depth average",
            spec.object_id
        )
    });
    let n = boxes.len();
    let depths = match &spec.depth_mode {
        DepthMode::MaskMean => vec![d0; n],
        DepthMode::PerspectiveConsistency => {
            let h0 = box0.h;
            boxes
                .iter()
                .enumerate()
                .map(|(l, b)| {
                    if b.h.is_nan() || b.h <= 0.0 {
                        return Err(Error::Domain(format!("box height {} at frame {l}", b.h)));
                    }
                    Ok(d0 * (h0 / b.h))
                })
                .collect::<Result<_>>()?
        }
        DepthMode::ReferencePoint(refs) => {
            if refs.is_empty() {
                return Err(Error::Validation("reference_point mode needs a reference".into()));
            }
            let mut anchors: Vec<(usize, f64)> = Vec::with_capacity(refs.len() + 1);
            if refs[0].0 != 0 {
                anchors.push((0, d0));
            }
            anchors.extend(refs.iter().map(|(f, p)| (*f, ctx.depth.bilinear(p[0], p[1]))));
            (0..n).map(|l| piecewise_linear(&anchors, l)).collect()
        }
    };
    Ok(AssignedDepths { depths, warning })
}

fn piecewise_linear(anchors: &[(usize, f64)], l: usize) -> f64 {
    let i = anchors.partition_point(|(f, _)| *f <= l);
    if i == 0 {
        return anchors[0].1;
    }
    if i == anchors.len() {
        return anchors[i - 1].1;
    }
    let (f0, v0) = anchors[i - 1];
    let (f1, v1) = anchors[i];
    if f0 == l {
        return v0;
    }
    v0 + (v1 - v0) * ((l - f0) as f64 / (f1 - f0) as f64)
}

/// Carry scene boxes into screen space through the camera path.
///
/// The center is unprojected at its assigned depth with the frame-0
/// intrinsics, moved into camera `l` and projected with `K_l`; the size
/// scales by `d_l / z_l` and by the focal ratio against frame 0.
pub fn project_boxes(
    scene: &SceneBoxTrack,
    path: &CameraPath,
    intrinsics0: &Intrinsics,
    object_id: u32,
) -> Result<ScreenBoxTrack> {
    if scene.boxes.len() != path.len() || scene.depth.len() != path.len() {
        return Err(Error::LengthMismatch {
            left: scene.boxes.len(),
            right: path.len(),
        });
    }
    let mut out = ScreenBoxTrack {
        boxes: Vec::with_capacity(path.len()),
        z: Vec::with_capacity(path.len()),
    };
    for (l, ((e, k), (b, &d))) in path
        .frames()
        .iter()
        .zip(scene.boxes.iter().zip(&scene.depth))
        .enumerate()
    {
        let x = unproject(b.center(), d, intrinsics0)?;
        let p = project(&x, e, k);
        if p.z <= Z_MIN {
            return Err(Error::BehindCamera { object_id, frame: l });
        }
        let scale = d / p.z;
        out.boxes.push(BBox2D {
            cx: p.pixel[0],
            cy: p.pixel[1],
            w: b.w * scale * (k.fx / intrinsics0.fx),
            h: b.h * scale * (k.fy / intrinsics0.fy),
        });
        out.z.push(p.z);
    }
    Ok(out)
}

/// Full per-object pipeline: interpolate, assign depth, project.
#[derive(Debug, Clone)]
pub struct ObjectMotion {
    pub object_id: u32,
    pub scene: SceneBoxTrack,
    pub screen: ScreenBoxTrack,
    pub warning: Option<String>,
}

pub fn translate_object(
    spec: &ObjectSpec,
    ctx: &SceneContext,
    path: &CameraPath,
    intrinsics0: &Intrinsics,
) -> Result<ObjectMotion> {
    let boxes = interpolate_boxes(&spec.key_boxes, path.len())?;
    let assigned = assign_depths(&boxes, spec, ctx)?;
    let scene = SceneBoxTrack {
        boxes,
        depth: assigned.depths,
    };
    let screen = project_boxes(&scene, path, intrinsics0, spec.object_id)?;
    Ok(ObjectMotion {
        object_id: spec.object_id,
        scene,
        screen,
        warning: assigned.warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{mix_patterns, Pattern, PatternSpec};
    use crate::types::{DepthMap, LabelMask};
    use approx::assert_relative_eq;

    fn k() -> Intrinsics {
        Intrinsics::new(400.0, 400.0, 320.0, 176.0, 640, 352).unwrap()
    }

    fn bx(cx: f64, cy: f64, w: f64, h: f64) -> BBox2D {
        BBox2D::new(cx, cy, w, h).unwrap()
    }

    fn spec(mode: DepthMode, keys: Vec<(usize, BBox2D)>) -> ObjectSpec {
        ObjectSpec {
            object_id: 1,
            key_boxes: keys,
            depth_mode: mode,
        }
    }

    #[test]
    fn identical_keys_give_constant_boxes() {
        let b = bx(100.0, 80.0, 30.0, 40.0);
        let boxes = interpolate_boxes(&[(0, b), (9, b)], 10).unwrap();
        assert!(boxes.iter().all(|x| *x == b));
    }

    #[test]
    fn two_keys_hit_endpoints_and_increase() {
        let boxes = interpolate_boxes(
            &[(0, bx(100.0, 50.0, 10.0, 10.0)), (10, bx(200.0, 50.0, 10.0, 10.0))],
            11,
        )
        .unwrap();
        assert_eq!(boxes[0].cx, 100.0);
        assert_eq!(boxes[10].cx, 200.0);
        assert!(boxes.windows(2).all(|w| w[1].cx > w[0].cx));
    }

    #[test]
    fn key_frames_must_span_the_clip() {
        let b = bx(1.0, 1.0, 1.0, 1.0);
        assert!(interpolate_boxes(&[(0, b), (5, b)], 10).is_err());
        assert!(interpolate_boxes(&[(0, b)], 1).is_err());
    }

    #[test]
    fn perspective_mode_uses_similar_triangles() {
        let ctx = SceneContext::flat(k(), 4.0).unwrap();
        let boxes = vec![bx(320.0, 176.0, 100.0, 100.0), bx(320.0, 176.0, 200.0, 200.0)];
        let s = spec(DepthMode::PerspectiveConsistency, vec![]);
        let d = assign_depths(&boxes, &s, &ctx).unwrap();
        assert_eq!(d.depths, vec![4.0, 2.0]);
        assert!(d.warning.is_some(), "flat scene has no mask pixels");
    }

    #[test]
    fn mask_mean_is_constant_over_time() {
        let mut depth = vec![9.0; 640 * 352];
        let mut mask = vec![0u32; 640 * 352];
        for y in 100..200 {
            for x in 200..300 {
                depth[y * 640 + x] = 3.0;
                mask[y * 640 + x] = 1;
            }
        }
        let ctx = SceneContext::new(
            DepthMap::new(640, 352, depth).unwrap(),
            Some(LabelMask::new(640, 352, mask).unwrap()),
            Some(k()),
        )
        .unwrap();
        let boxes = vec![bx(250.0, 150.0, 200.0, 200.0); 5];
        let d = assign_depths(&boxes, &spec(DepthMode::MaskMean, vec![]), &ctx).unwrap();
        assert_eq!(d.depths, vec![3.0; 5]);
        assert!(d.warning.is_none());
    }

    #[test]
    fn reference_point_reads_scene_depth() {
        let mut depth = vec![9.0; 640 * 352];
        depth[300 * 640 + 50] = 5.0;
        let ctx = SceneContext::new(DepthMap::new(640, 352, depth).unwrap(), None, Some(k())).unwrap();
        let boxes = vec![bx(250.0, 150.0, 20.0, 20.0); 4];
        let refs = (0..4).map(|f| (f, [50.0, 300.0])).collect();
        let d = assign_depths(&boxes, &spec(DepthMode::ReferencePoint(refs), vec![]), &ctx).unwrap();
        assert_eq!(d.depths, vec![5.0; 4]);
    }

    #[test]
    fn reference_depths_interpolate_linearly() {
        let mut depth = vec![9.0; 640 * 352];
        depth[10 * 640 + 10] = 2.0;
        depth[10 * 640 + 20] = 6.0;
        let ctx = SceneContext::new(DepthMap::new(640, 352, depth).unwrap(), None, Some(k())).unwrap();
        let boxes = vec![bx(250.0, 150.0, 20.0, 20.0); 7];
        let refs = vec![(1, [10.0, 10.0]), (5, [20.0, 10.0])];
        let d = assign_depths(&boxes, &spec(DepthMode::ReferencePoint(refs), vec![]), &ctx).unwrap();
        assert_eq!(d.depths, vec![9.0, 2.0, 3.0, 4.0, 5.0, 6.0, 6.0]);
    }

    #[test]
    fn empty_box_has_no_depth() {
        let ctx = SceneContext::flat(k(), 4.0).unwrap();
        let off = bx(-100.0, -100.0, 10.0, 10.0);
        assert!(matches!(
            assign_depths(&[off], &spec(DepthMode::MaskMean, vec![]), &ctx),
            Err(Error::EmptyMask { object_id: 1 })
        ));
    }

    #[test]
    fn identity_path_leaves_boxes_alone() {
        let scene = SceneBoxTrack {
            boxes: vec![bx(123.4, 56.7, 80.0, 90.0), bx(223.4, 76.7, 60.0, 70.0)],
            depth: vec![3.0, 5.0],
        };
        let screen = project_boxes(&scene, &CameraPath::stationary(k(), 2), &k(), 1).unwrap();
        for (a, b) in screen.boxes.iter().zip(&scene.boxes) {
            assert!((a.cx - b.cx).abs() <= 1e-12 && (a.cy - b.cy).abs() <= 1e-12);
            assert!((a.w - b.w).abs() <= 1e-12 && (a.h - b.h).abs() <= 1e-12);
        }
        assert_eq!(screen.z, scene.depth);
    }

    #[test]
    fn dolly_in_grows_an_on_axis_box() {
        let path = mix_patterns(&[PatternSpec::new(Pattern::Dolly, 1.0)], 5, &k()).unwrap();
        let scene = SceneBoxTrack {
            boxes: vec![bx(320.0, 176.0, 100.0, 100.0); 5],
            depth: vec![4.0; 5],
        };
        let screen = project_boxes(&scene, &path, &k(), 1).unwrap();
        let last = screen.boxes[4];
        assert_relative_eq!(last.cx, 320.0, epsilon = 1e-9);
        assert_relative_eq!(last.cy, 176.0, epsilon = 1e-9);
        assert_relative_eq!(last.w, 400.0 / 3.0, epsilon = 1e-9);
        assert_relative_eq!(screen.z[4], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn zoom_scales_box_size_with_focal() {
        let path = mix_patterns(&[PatternSpec::new(Pattern::Zoom, 0.5)], 2, &k()).unwrap();
        let scene = SceneBoxTrack {
            boxes: vec![bx(420.0, 176.0, 10.0, 20.0); 2],
            depth: vec![2.0; 2],
        };
        let screen = project_boxes(&scene, &path, &k(), 1).unwrap();
        assert_relative_eq!(screen.boxes[1].w, 15.0, epsilon = 1e-12);
        assert_relative_eq!(screen.boxes[1].cx, 470.0, epsilon = 1e-9);
    }

    #[test]
    fn box_behind_camera_is_an_error() {
        let path = mix_patterns(&[PatternSpec::new(Pattern::Dolly, 5.0)], 2, &k()).unwrap();
        let scene = SceneBoxTrack {
            boxes: vec![bx(320.0, 176.0, 10.0, 10.0); 2],
            depth: vec![2.0; 2],
        };
        assert!(matches!(
            project_boxes(&scene, &path, &k(), 7),
            Err(Error::BehindCamera { object_id: 7, frame: 1 })
        ));
    }
}
