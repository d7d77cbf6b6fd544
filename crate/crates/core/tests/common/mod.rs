#![allow(dead_code)]

use std::path::Path;

use motionforge::camera::{Pattern, PatternSpec};
use motionforge::design::{CameraSpec, Canvas, DepthMode, LocalTrackSpec, MotionDesign, ObjectSpec};
use motionforge::types::{BBox2D, DepthMap, Intrinsics, LabelMask, SceneContext};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const W: u32 = 640;
pub const H: u32 = 352;

pub fn k400() -> Intrinsics {
    Intrinsics::new(400.0, 400.0, 320.0, 176.0, W, H).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Smooth, strictly non-planar depth between roughly 2.2 and 3.8.
pub fn wavy_depth(x: usize, y: usize) -> f64 {
    let (x, y) = (x as f64, y as f64);
    3.0 + 0.5 * (x / 53.0).sin() * (y / 37.0).cos() + 0.3 * ((x + 2.0 * y) / 90.0).sin()
}

pub fn wavy_depth_map() -> DepthMap {
    let (w, h) = (W as usize, H as usize);
    DepthMap::new(w, h, (0..w * h).map(|i| wavy_depth(i % w, i / w)).collect()).unwrap()
}

pub fn wavy_scene(k: Intrinsics) -> SceneContext {
    SceneContext::new(wavy_depth_map(), None, Some(k)).unwrap()
}

/// Mask with object `id` filling `rect = (x0, x1, y0, y1)` (half-open).
pub fn rect_mask(id: u32, rect: (usize, usize, usize, usize)) -> LabelMask {
    let (w, h) = (W as usize, H as usize);
    let data = (0..w * h)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            if x >= rect.0 && x < rect.1 && y >= rect.2 && y < rect.3 {
                id
            } else {
                0
            }
        })
        .collect();
    LabelMask::new(w, h, data).unwrap()
}

/// A camera mix of one to three distinct patterns with moderate magnitudes,
/// keeping a depth-2..4 scene in front of the camera.
pub fn random_mix(r: &mut ChaCha8Rng) -> Vec<PatternSpec> {
    let mut pool: Vec<Pattern> = Pattern::ALL.iter().copied().filter(|p| *p != Pattern::Static).collect();
    let n = r.random_range(1..=3);
    let mut out = Vec::new();
    for _ in 0..n {
        let p = pool.remove(r.random_range(0..pool.len()));
        let sign = if r.random_bool(0.5) { 1.0 } else { -1.0 };
        let m = |lo: f64, hi: f64, r: &mut ChaCha8Rng| sign * r.random_range(lo..hi);
        out.push(match p {
            Pattern::Trucking | Pattern::Pedestal => PatternSpec::new(p, m(0.05, 0.4, r)),
            Pattern::Dolly => PatternSpec::new(p, m(0.05, 0.6, r)),
            Pattern::Pan | Pattern::Roll => PatternSpec::new(p, m(0.02, 0.3, r)),
            Pattern::Tilt => PatternSpec::new(p, m(0.02, 0.2, r)),
            Pattern::Zoom => PatternSpec::new(p, m(0.05, 0.4, r)),
            Pattern::Orbit => PatternSpec::with_radius(p, m(0.05, 0.4, r), r.random_range(2.0..4.0)),
            Pattern::Circle => PatternSpec::with_radius(p, m(0.5, 3.0, r), r.random_range(0.05..0.3)),
            Pattern::Static => unreachable!(),
        });
    }
    out
}

pub fn design_with(frame_count: usize, camera: Vec<PatternSpec>) -> MotionDesign {
    MotionDesign {
        frame_count,
        fps: 12,
        canvas: Canvas { width: W, height: H },
        intrinsics: None,
        camera: CameraSpec::Patterns(camera),
        objects: Vec::new(),
        local_tracks: Vec::new(),
        text_prompt: String::new(),
    }
}

pub fn random_box(r: &mut ChaCha8Rng) -> BBox2D {
    BBox2D::new(
        r.random_range(120.0..520.0),
        r.random_range(80.0..270.0),
        r.random_range(30.0..160.0),
        r.random_range(30.0..120.0),
    )
    .unwrap()
}

/// A box whose height stays within 0.7..1.4 of `b0`, so perspective-mode
/// depths stay in front of moderate camera moves.
pub fn random_box_near(r: &mut ChaCha8Rng, b0: &BBox2D) -> BBox2D {
    let b = random_box(r);
    BBox2D::new(b.cx, b.cy, b.w, b0.h * r.random_range(0.7..1.4)).unwrap()
}

/// An object with two or three key boxes and a local track riding on it.
pub fn random_object_design(r: &mut ChaCha8Rng, frame_count: usize) -> MotionDesign {
    let mut d = design_with(frame_count, random_mix(r));
    let b0 = random_box(r);
    let mut keys = vec![(0, b0)];
    if r.random_bool(0.5) {
        keys.push((frame_count / 2, random_box_near(r, &b0)));
    }
    keys.push((frame_count - 1, random_box_near(r, &b0)));
    let depth_mode = match r.random_range(0..3) {
        0 => DepthMode::MaskMean,
        1 => DepthMode::PerspectiveConsistency,
        _ => DepthMode::ReferencePoint(vec![(0, [r.random_range(0.0..639.0), r.random_range(0.0..351.0)])]),
    };
    d.objects.push(ObjectSpec {
        object_id: 1,
        key_boxes: keys,
        depth_mode,
    });
    let start = [
        b0.cx + r.random_range(-0.45..0.45) * b0.w,
        b0.cy + r.random_range(-0.45..0.45) * b0.h,
    ];
    let end = [
        start[0] + r.random_range(-20.0..20.0),
        start[1] + r.random_range(-20.0..20.0),
    ];
    d.local_tracks.push(LocalTrackSpec {
        parent_object: Some(1),
        samples: vec![(0, start), (frame_count - 1, end)],
    });
    d
}

/// Every regular file under `dir`, as (relative path, bytes), sorted.
pub fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}
