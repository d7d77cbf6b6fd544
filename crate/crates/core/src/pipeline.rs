//! End-to-end translation of a motion design against a scene.

use std::borrow::Cow;

use rayon::prelude::*;

use crate::bundle::{BundleParts, ObjectBoxes, SignalBundle};
use crate::camera::{keyframe_path, mix_patterns};
use crate::codec::DEFAULT_K;
use crate::design::{CameraSpec, MotionDesign};
use crate::error::{Error, Result};
use crate::localmotion::{densify_local, translate_local, ParentBoxes};
use crate::objmotion::{translate_object, ObjectMotion};
use crate::types::{CameraPath, Intrinsics, Pixel, PointTrack, SceneContext};
use crate::warp::{sample_static_points, warp_pixels, DEFAULT_POINTS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TranslateOptions {
    /// Number of static points to track.
    pub points: usize,
    pub seed: u64,
    /// DCT slots per track.
    pub k: usize,
}

impl Default for TranslateOptions {
    fn default() -> Self {
        TranslateOptions {
            points: DEFAULT_POINTS,
            seed: 0,
            k: DEFAULT_K,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Translation {
    pub intrinsics0: Intrinsics,
    pub path: CameraPath,
    /// Frame-0 pixels of the camera tracks.
    pub seeds: Vec<Pixel>,
    pub objects: Vec<ObjectMotion>,
    pub bundle: SignalBundle,
}

/// The scene with the design's explicit intrinsics applied, after checking
/// that the design's canvas matches the scene rasters.
pub fn resolve_scene<'a>(design: &MotionDesign, ctx: &'a SceneContext) -> Result<Cow<'a, SceneContext>> {
    if design.canvas.width != ctx.width || design.canvas.height != ctx.height {
        return Err(Error::DimensionMismatch(format!(
            "design canvas is {}x{} but the scene is {}x{}",
            design.canvas.width, design.canvas.height, ctx.width, ctx.height
        )));
    }
    match design.explicit_intrinsics()? {
        Some(k) if k != ctx.intrinsics0 => Ok(Cow::Owned(ctx.with_intrinsics(k)?)),
        _ => Ok(Cow::Borrowed(ctx)),
    }
}

pub fn camera_path(design: &MotionDesign, intrinsics0: &Intrinsics) -> Result<CameraPath> {
    match &design.camera {
        CameraSpec::Patterns(specs) => mix_patterns(specs, design.frame_count, intrinsics0),
        CameraSpec::Keyframes(keys) => keyframe_path(keys, design.frame_count, intrinsics0),
    }
}

/// Translate `design` into screen-space signals. Deterministic for fixed
/// inputs and options.
pub fn translate(design: &MotionDesign, ctx: &SceneContext, opts: &TranslateOptions) -> Result<Translation> {
    design.validate()?;
    let ctx = resolve_scene(design, ctx)?;
    let k0 = ctx.intrinsics0;
    let path = camera_path(design, &k0)?;

    let seeds = sample_static_points(&ctx, opts.points, opts.seed)?;
    let camera_tracks = warp_pixels(&ctx, &path, &seeds)?;

    let objects = design
        .objects
        .par_iter()
        .map(|spec| translate_object(spec, &ctx, &path, &k0))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let local_tracks = design
        .local_tracks
        .par_iter()
        .map(|spec| {
            let dense = densify_local(spec, design.frame_count)?;
            let parent = match spec.parent_object {
                Some(id) => {
                    let obj = objects
                        .iter()
                        .find(|o| o.object_id == id)
                        .ok_or_else(|| Error::Validation(format!("local track parent {id} is not an object")))?;
                    Some(ParentBoxes {
                        object_id: id,
                        scene0: obj.scene.boxes[0],
                        screen: &obj.screen,
                    })
                }
                None => None,
            };
            translate_local(&dense, parent, &path, &ctx, &k0)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<PointTrack>>>()?;

    let warnings = objects.iter().filter_map(|o| o.warning.clone()).collect();
    let bundle = SignalBundle::assemble(
        BundleParts {
            frame_count: design.frame_count,
            fps: design.fps,
            canvas: design.canvas,
            camera_tracks,
            screen_boxes: objects
                .iter()
                .map(|o| ObjectBoxes {
                    object_id: o.object_id,
                    track: o.screen.clone(),
                })
                .collect(),
            local_tracks,
            warnings,
            text_prompt: design.text_prompt.clone(),
        },
        opts.k,
    )?;
    Ok(Translation {
        intrinsics0: k0,
        path,
        seeds,
        objects,
        bundle,
    })
}
