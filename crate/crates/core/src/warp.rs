//! Pinhole projection, static-point sampling and depth-based warping.

use image::RgbImage;
use nalgebra::Vector3;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::types::{CameraPath, Extrinsics, Intrinsics, Pixel, PointTrack, SceneContext, Z_MIN};

/// Number of camera tracks emitted when the caller does not choose.
pub const DEFAULT_POINTS: usize = 100;

/// A point in world (frame-0 camera) coordinates.
pub type ScenePoint = Vector3<f64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub pixel: Pixel,
    /// Camera-space depth of the point, before clamping.
    pub z: f64,
    pub visible: bool,
}

pub fn unproject(pixel: Pixel, z: f64, k: &Intrinsics) -> Result<ScenePoint> {
    if z.is_nan() || z <= 0.0 {
        return Err(Error::Domain(format!("cannot unproject at depth {z}")));
    }
    Ok(Vector3::new(
        z * (pixel[0] - k.cx) / k.fx,
        z * (pixel[1] - k.cy) / k.fy,
        z,
    ))
}

/// Project a camera-space point. Points at or behind `Z_MIN` are flagged
/// invisible and projected as if they sat on the `Z_MIN` plane, which keeps
/// the pixel finite.
pub fn project_camera(xc: &Vector3<f64>, k: &Intrinsics) -> Projection {
    let z = xc.z;
    let zc = z.max(Z_MIN);
    let pixel = [k.cx + k.fx * xc.x / zc, k.cy + k.fy * xc.y / zc];
    Projection {
        pixel,
        z,
        visible: z > Z_MIN && k.contains(pixel),
    }
}

pub fn project(point: &ScenePoint, e: &Extrinsics, k: &Intrinsics) -> Projection {
    project_camera(&e.transform(point), k)
}

/// Draw `n` distinct static pixels (mask label 0), uniformly and
/// reproducibly for a given seed. Pixel centers sit on integer coordinates.
/// When fewer than `n` static pixels exist, all of them are returned.
pub fn sample_static_points(ctx: &SceneContext, n: usize, seed: u64) -> Result<Vec<Pixel>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let w = ctx.width as usize;
    let candidates: Vec<usize> = ctx
        .moving_mask
        .data()
        .iter()
        .enumerate()
        .filter_map(|(i, &label)| (label == 0).then_some(i))
        .collect();
    if candidates.is_empty() {
        return Err(Error::NoStaticRegion);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = index::sample(&mut rng, candidates.len(), n.min(candidates.len()));
    Ok(picks
        .into_iter()
        .map(|i| {
            let idx = candidates[i];
            [(idx % w) as f64, (idx / w) as f64]
        })
        .collect())
}

/// Warp seed pixels through the camera path at their frame-0 depth.
pub fn warp_pixels(ctx: &SceneContext, path: &CameraPath, seeds: &[Pixel]) -> Result<Vec<PointTrack>> {
    seeds
        .par_iter()
        .map(|&px| {
            let d = ctx.depth.bilinear(px[0], px[1]);
            let x = unproject(px, d, &ctx.intrinsics0)?;
            let mut track = PointTrack {
                positions: Vec::with_capacity(path.len()),
                visible: Vec::with_capacity(path.len()),
            };
            for (l, (e, k)) in path.frames().iter().enumerate() {
                // frame 0 and identity frames reuse the seed pixel bit-exactly
                if l == 0 || (e.is_identity(0.0) && k == &ctx.intrinsics0) {
                    track.positions.push(px);
                    track.visible.push(k.contains(px));
                } else {
                    let p = project(&x, e, k);
                    track.positions.push(p.pixel);
                    track.visible.push(p.visible);
                }
            }
            Ok(track)
        })
        .collect()
}

/// Camera-induced tracks of `n` sampled static points.
pub fn synthesize_camera_tracks(ctx: &SceneContext, path: &CameraPath, n: usize, seed: u64) -> Result<Vec<PointTrack>> {
    if path.len() < 2 {
        return Err(Error::Validation("camera path needs at least 2 frames".into()));
    }
    let seeds = sample_static_points(ctx, n, seed)?;
    warp_pixels(ctx, path, &seeds)
}

fn check_image(image: &RgbImage, ctx: &SceneContext) -> Result<()> {
    if image.width() != ctx.width || image.height() != ctx.height {
        return Err(Error::DimensionMismatch(format!(
            "image is {}x{} but the scene is {}x{}",
            image.width(),
            image.height(),
            ctx.width,
            ctx.height
        )));
    }
    Ok(())
}

/// Forward-splat every source pixel into frame `l` with a nearest-wins
/// z-buffer. Unfilled pixels stay black.
pub fn render_preview_frame(image: &RgbImage, ctx: &SceneContext, path: &CameraPath, l: usize) -> Result<RgbImage> {
    check_image(image, ctx)?;
    if l >= path.len() {
        return Err(Error::Index {
            index: l,
            len: path.len(),
        });
    }
    let (w, h) = (ctx.width as usize, ctx.height as usize);
    let (e, k) = &path.frames()[l];
    let k0 = &ctx.intrinsics0;
    let mut zbuf = vec![f64::INFINITY; w * h];
    let mut out = RgbImage::new(ctx.width, ctx.height);
    for y in 0..h {
        for x in 0..w {
            let d = ctx.depth.get(x, y);
            let src = Vector3::new(d * (x as f64 - k0.cx) / k0.fx, d * (y as f64 - k0.cy) / k0.fy, d);
            let xc = e.transform(&src);
            if xc.z <= Z_MIN {
                continue;
            }
            let u = (k.cx + k.fx * xc.x / xc.z + 0.5).floor();
            let v = (k.cy + k.fy * xc.y / xc.z + 0.5).floor();
            if u < 0.0 || v < 0.0 || u >= w as f64 || v >= h as f64 {
                continue;
            }
            let (tu, tv) = (u as usize, v as usize);
            let slot = tv * w + tu;
            if xc.z < zbuf[slot] {
                zbuf[slot] = xc.z;
                out.put_pixel(tu as u32, tv as u32, *image.get_pixel(x as u32, y as u32));
            }
        }
    }
    Ok(out)
}

pub fn render_preview(image: &RgbImage, ctx: &SceneContext, path: &CameraPath) -> Result<Vec<RgbImage>> {
    check_image(image, ctx)?;
    (0..path.len())
        .into_par_iter()
        .map(|l| render_preview_frame(image, ctx, path, l))
        .collect()
}
