//! Local-motion polylines, composed through object and camera motion.
//!
//! A track attached to a parent object keeps its position relative to the
//! parent's box: offsets are measured against the frame-0 scene box and
//! re-applied to the parent's screen box each frame. A free track is held at
//! the scene depth of its first vertex and only moved by the camera.

use crate::design::LocalTrackSpec;
use crate::error::{Error, Result};
use crate::objmotion::ScreenBoxTrack;
use crate::types::{BBox2D, CameraPath, Intrinsics, Pixel, PointTrack, SceneContext};
use crate::warp::{project, unproject};

/// One position per frame, linear between the timed vertices and held after
/// the last one.
pub fn densify_local(spec: &LocalTrackSpec, frame_count: usize) -> Result<Vec<Pixel>> {
    let samples = &spec.samples;
    if samples.len() < 2 {
        return Err(Error::Validation("local track needs at least 2 samples".into()));
    }
    if samples[0].0 != 0 {
        return Err(Error::Validation("local track must start at frame 0".into()));
    }
    if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::Validation("key frames not increasing".into()));
    }
    if samples.last().unwrap().0 >= frame_count {
        return Err(Error::Validation(format!(
            "local track sample beyond frame {}",
            frame_count - 1
        )));
    }
    Ok((0..frame_count)
        .map(|l| {
            let i = samples.partition_point(|(f, _)| *f <= l);
            let (f0, p0) = samples[i - 1];
            if f0 == l || i == samples.len() {
                return p0;
            }
            let (f1, p1) = samples[i];
            let w = (l - f0) as f64 / (f1 - f0) as f64;
            [p0[0] + (p1[0] - p0[0]) * w, p0[1] + (p1[1] - p0[1]) * w]
        })
        .collect())
}

/// Parent object boxes a local track rides on.
#[derive(Debug, Clone, Copy)]
pub struct ParentBoxes<'a> {
    pub object_id: u32,
    /// The parent's frame-0 scene box, i.e. the box the user drew on.
    pub scene0: BBox2D,
    pub screen: &'a ScreenBoxTrack,
}

/// Screen-space track of a local-motion polyline.
pub fn translate_local(
    dense: &[Pixel],
    parent: Option<ParentBoxes<'_>>,
    path: &CameraPath,
    ctx: &SceneContext,
    intrinsics0: &Intrinsics,
) -> Result<PointTrack> {
    if dense.len() != path.len() {
        return Err(Error::LengthMismatch {
            left: dense.len(),
            right: path.len(),
        });
    }
    let Some(&start) = dense.first() else {
        return Ok(PointTrack::default());
    };
    let mut track = PointTrack {
        positions: Vec::with_capacity(dense.len()),
        visible: Vec::with_capacity(dense.len()),
    };
    match parent {
        Some(parent) => {
            let c0 = parent.scene0;
            if !c0.contains(start) {
                return Err(Error::OutsideParent {
                    parent: parent.object_id,
                    x: start[0],
                    y: start[1],
                });
            }
            if parent.screen.boxes.len() != dense.len() {
                return Err(Error::LengthMismatch {
                    left: dense.len(),
                    right: parent.screen.boxes.len(),
                });
            }
            for (l, p) in dense.iter().enumerate() {
                let rho = [(p[0] - c0.cx) / c0.w, (p[1] - c0.cy) / c0.h];
                let b = parent.screen.boxes[l];
                let pos = [b.cx + rho[0] * b.w, b.cy + rho[1] * b.h];
                track
                    .visible
                    .push(parent.screen.z[l] > crate::types::Z_MIN && path.intrinsics(l).contains(pos));
                track.positions.push(pos);
            }
        }
        None => {
            let d = ctx.depth.bilinear(start[0], start[1]);
            for (p, (e, k)) in dense.iter().zip(path.frames()) {
                if e.is_identity(0.0) && k == intrinsics0 {
                    // identity camera: skip the round trip so the input stays bit-exact
                    track.positions.push(*p);
                    track.visible.push(k.contains(*p));
                } else {
                    let proj = project(&unproject(*p, d, intrinsics0)?, e, k);
                    track.positions.push(proj.pixel);
                    track.visible.push(proj.visible);
                }
            }
        }
    }
    Ok(track)
}
