//! Pose recovery from emitted tracks and control-quality metrics.
//!
//! Metric definitions:
//! - `rot_err`: sum over frames of the geodesic angle between rotations.
//! - `trans_err`: sum over frames of the distance between translations, each
//!   sequence divided by its own largest translation norm (1 if all zero).
//! - `cam_mc`: sum over frames of the Frobenius norm of the `[R|t]`
//!   difference, with the same translation normalization.
//! - `obj_mc`: mean per-frame Euclidean distance between two tracks.

use nalgebra::{DMatrix, Matrix3, Matrix3x4, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundle::SignalBundle;
use crate::design::MotionDesign;
use crate::error::{Error, Result};
use crate::pipeline::{translate, TranslateOptions};
use crate::types::{CameraPath, Extrinsics, Intrinsics, Pixel, SceneContext, POSE_TOLERANCE};
use crate::warp::{unproject, ScenePoint};

/// Minimum number of correspondences for [`recover_pose`].
pub const MIN_CORRESPONDENCES: usize = 6;

/// Relative singular-value threshold below which a linear system counts as
/// rank deficient.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveredPose {
    pub extrinsics: Extrinsics,
    /// Root-mean-square reprojection error in pixels.
    pub reproj_rms: f64,
}

/// Nearest rotation (orthogonal polar factor) with `det = +1`.
fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut r = u * vt;
    if r.determinant() < 0.0 {
        let mut d = Matrix3::identity();
        d[(2, 2)] = -1.0;
        r = u * d * vt;
    }
    r
}

/// Right singular vector of the smallest singular value of `a`, and the
/// ratio of the second smallest singular value to the largest.
fn null_vector(a: &DMatrix<f64>) -> (Vec<f64>, f64) {
    let svd = a.clone().svd(false, true);
    let vt = svd.v_t.unwrap();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let smallest = order[0];
    let gap = svd.singular_values[order[1]] / svd.singular_values[order[order.len() - 1]];
    (vt.row(smallest).iter().copied().collect(), gap)
}

/// Centroid and RMS radius, for conditioning the linear systems.
fn normalization(points: &[ScenePoint]) -> (Vector3<f64>, f64) {
    let n = points.len() as f64;
    let c = points.iter().sum::<Vector3<f64>>() / n;
    let s = (points.iter().map(|p| (p - c).norm_squared()).sum::<f64>() / n).sqrt();
    (c, if s > 0.0 { s } else { 1.0 })
}

/// Linear pose from a general (non-coplanar) point set, in normalized image
/// coordinates. `None` when the points are coplanar or otherwise degenerate.
fn dlt_general(world: &[ScenePoint], image: &[[f64; 2]]) -> Option<Extrinsics> {
    let (c, s) = normalization(world);
    let n = world.len();
    let mut a = DMatrix::zeros(2 * n, 12);
    for (i, (x, p)) in world.iter().zip(image).enumerate() {
        let xn = (x - c) / s;
        let h = [xn.x, xn.y, xn.z, 1.0];
        for j in 0..4 {
            a[(2 * i, j)] = h[j];
            a[(2 * i, 8 + j)] = -p[0] * h[j];
            a[(2 * i + 1, 4 + j)] = h[j];
            a[(2 * i + 1, 8 + j)] = -p[1] * h[j];
        }
    }
    let (v, gap) = null_vector(&a);
    if gap < RANK_TOL {
        return None;
    }
    // P' acts on normalized points; undo the normalization: M = M'/s, p4 = p4' - M c
    let pn = Matrix3x4::from_row_slice(&v);
    let mut m: Matrix3<f64> = pn.fixed_view::<3, 3>(0, 0).into_owned() / s;
    let mut p4: Vector3<f64> = pn.column(3).into_owned() - m * c;
    if m.determinant() < 0.0 {
        m = -m;
        p4 = -p4;
    }
    let scale = m.singular_values().mean();
    let r = nearest_rotation(&m);
    Some(Extrinsics {
        rotation: r,
        translation: p4 / scale,
    })
}

/// Pose from coplanar points via a plane-to-image homography.
fn homography_pose(world: &[ScenePoint], image: &[[f64; 2]]) -> Result<Extrinsics> {
    let degenerate = || Error::DegenerateConfiguration("points are collinear or coincident".into());
    let (c, s) = normalization(world);
    // plane basis: rows of q are the principal directions, the last one the normal
    let cov = world
        .iter()
        .fold(Matrix3::zeros(), |acc, p| acc + (p - c) * (p - c).transpose());
    let eig = cov.symmetric_eigen();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    if eig.eigenvalues[order[1]] <= RANK_TOL * eig.eigenvalues[order[0]] {
        return Err(degenerate());
    }
    let mut q = Matrix3::from_rows(&[
        eig.eigenvectors.column(order[0]).transpose(),
        eig.eigenvectors.column(order[1]).transpose(),
        eig.eigenvectors.column(order[2]).transpose(),
    ]);
    if q.determinant() < 0.0 {
        q.row_mut(2).neg_mut();
    }
    let n = world.len();
    let mut a = DMatrix::zeros(2 * n, 9);
    for (i, (x, p)) in world.iter().zip(image).enumerate() {
        let y = q * (x - c) / s;
        let h = [y.x, y.y, 1.0];
        for j in 0..3 {
            a[(2 * i, j)] = h[j];
            a[(2 * i, 6 + j)] = -p[0] * h[j];
            a[(2 * i + 1, 3 + j)] = h[j];
            a[(2 * i + 1, 6 + j)] = -p[1] * h[j];
        }
    }
    let (v, gap) = null_vector(&a);
    if gap < RANK_TOL {
        return Err(degenerate());
    }
    let h = Matrix3::from_row_slice(&v);
    let (h1, h2, mut h3) = (
        h.column(0).into_owned(),
        h.column(1).into_owned(),
        h.column(2).into_owned(),
    );
    let lambda = 0.5 * (h1.norm() + h2.norm());
    let (mut r1, mut r2) = (h1 / lambda, h2 / lambda);
    h3 /= lambda;
    // the plane origin (the centroid) must lie in front of the camera
    if h3.z < 0.0 {
        r1 = -r1;
        r2 = -r2;
        h3 = -h3;
    }
    let rp = nearest_rotation(&Matrix3::from_columns(&[r1, r2, r1.cross(&r2)]));
    // X_cam = Rp * (Q (X - c) / s) + h3, with the plane scale folded back in
    let rotation = rp * q;
    let translation = h3 * s - rotation * c;
    Ok(Extrinsics { rotation, translation })
}

/// Camera pose from 3D-2D correspondences (pixels under `k`).
pub fn recover_pose(world: &[ScenePoint], pixels: &[Pixel], k: &Intrinsics) -> Result<RecoveredPose> {
    if world.len() != pixels.len() {
        return Err(Error::LengthMismatch {
            left: world.len(),
            right: pixels.len(),
        });
    }
    if world.len() < MIN_CORRESPONDENCES {
        return Err(Error::DegenerateConfiguration(format!(
            "{} correspondences, need at least {MIN_CORRESPONDENCES}",
            world.len()
        )));
    }
    let image: Vec<[f64; 2]> = pixels.iter().map(|&p| k.normalize(p)).collect();
    let extrinsics = match dlt_general(world, &image) {
        Some(e) => e,
        None => homography_pose(world, &image)?,
    };
    let sq: f64 = world
        .iter()
        .zip(pixels)
        .map(|(x, p)| {
            let xc = extrinsics.transform(x);
            let u = k.cx + k.fx * xc.x / xc.z;
            let v = k.cy + k.fy * xc.y / xc.z;
            (u - p[0]).powi(2) + (v - p[1]).powi(2)
        })
        .sum();
    Ok(RecoveredPose {
        extrinsics,
        reproj_rms: (sq / world.len() as f64).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraErrors {
    pub rot_err: f64,
    pub trans_err: f64,
    pub cam_mc: f64,
}

/// Max translation norm of a sequence; 1 when every translation is zero to
/// within the pose tolerance, so rotation-only paths compare unscaled.
fn max_translation_norm(e: &[&Extrinsics]) -> f64 {
    let m = e.iter().map(|e| e.translation.norm()).fold(0.0, f64::max);
    if m > POSE_TOLERANCE {
        m
    } else {
        1.0
    }
}

pub fn camera_errors(gt: &CameraPath, est: &[Extrinsics]) -> Result<CameraErrors> {
    if gt.len() != est.len() {
        return Err(Error::LengthMismatch {
            left: gt.len(),
            right: est.len(),
        });
    }
    let gt: Vec<&Extrinsics> = gt.frames().iter().map(|(e, _)| e).collect();
    let est: Vec<&Extrinsics> = est.iter().collect();
    let (sg, se) = (max_translation_norm(&gt), max_translation_norm(&est));
    let mut out = CameraErrors {
        rot_err: 0.0,
        trans_err: 0.0,
        cam_mc: 0.0,
    };
    for (g, e) in gt.iter().zip(&est) {
        let cos = (((g.rotation * e.rotation.transpose()).trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        out.rot_err += cos.acos();
        let (tg, te) = (g.translation / sg, e.translation / se);
        out.trans_err += (tg - te).norm();
        let mut d = Matrix3x4::zeros();
        d.fixed_view_mut::<3, 3>(0, 0).copy_from(&(g.rotation - e.rotation));
        d.set_column(3, &(tg - te));
        out.cam_mc += d.norm();
    }
    Ok(out)
}

pub fn obj_mc(generated: &[Pixel], target: &[Pixel]) -> Result<f64> {
    if generated.len() != target.len() {
        return Err(Error::LengthMismatch {
            left: generated.len(),
            right: target.len(),
        });
    }
    if generated.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = generated
        .iter()
        .zip(target)
        .map(|(a, b)| (a[0] - b[0]).hypot(a[1] - b[1]))
        .sum();
    Ok(sum / generated.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub rot_err: f64,
    pub trans_err: f64,
    pub cam_mc: f64,
    pub obj_mc: f64,
    /// Reprojection RMS over every frame's correspondences, in pixels.
    pub reproj_rms: f64,
}

/// Per-frame poses recovered from a bundle's camera tracks. World points
/// come from unprojecting each track's frame-0 position at its scene depth;
/// only points marked visible in a frame are used for that frame.
pub fn recover_path(bundle: &SignalBundle, ctx: &SceneContext, path: &CameraPath) -> Result<(Vec<Extrinsics>, f64)> {
    if bundle.frame_count != path.len() {
        return Err(Error::LengthMismatch {
            left: bundle.frame_count,
            right: path.len(),
        });
    }
    let world = bundle
        .camera_tracks
        .iter()
        .map(|t| {
            let p = t.positions[0];
            unproject(p, ctx.depth.bilinear(p[0], p[1]), &ctx.intrinsics0)
        })
        .collect::<Result<Vec<_>>>()?;
    let per_frame = (0..path.len())
        .into_par_iter()
        .map(|l| {
            let (mut xs, mut ps) = (Vec::new(), Vec::new());
            for (x, t) in world.iter().zip(&bundle.camera_tracks) {
                if t.visible[l] {
                    xs.push(*x);
                    ps.push(t.positions[l]);
                }
            }
            recover_pose(&xs, &ps, path.intrinsics(l))
                .map(|r| (r, xs.len()))
                .map_err(|e| match e {
                    Error::DegenerateConfiguration(m) => Error::DegenerateConfiguration(format!("frame {l}: {m}")),
                    other => other,
                })
        })
        .collect::<Result<Vec<_>>>()?;
    let (sq, n) = per_frame.iter().fold((0.0, 0usize), |(sq, n), (r, m)| {
        (sq + r.reproj_rms.powi(2) * *m as f64, n + m)
    });
    let rms = if n > 0 { (sq / n as f64).sqrt() } else { 0.0 };
    Ok((per_frame.into_iter().map(|(r, _)| r.extrinsics).collect(), rms))
}

/// Compare a bundle against the design it claims to realize: camera metrics
/// from recovered poses, `obj_mc` averaged over box centers and local tracks.
pub fn verify_bundle(bundle: &SignalBundle, design: &MotionDesign, ctx: &SceneContext) -> Result<VerifyReport> {
    let reference = translate(
        design,
        ctx,
        &TranslateOptions {
            points: 0,
            ..TranslateOptions::default()
        },
    )?;
    let ctx = crate::pipeline::resolve_scene(design, ctx)?;
    let (est, reproj_rms) = recover_path(bundle, &ctx, &reference.path)?;
    let cam = camera_errors(&reference.path, &est)?;

    if bundle.screen_boxes.len() != reference.bundle.screen_boxes.len() {
        return Err(Error::LengthMismatch {
            left: bundle.screen_boxes.len(),
            right: reference.bundle.screen_boxes.len(),
        });
    }
    if bundle.local_tracks.len() != reference.bundle.local_tracks.len() {
        return Err(Error::LengthMismatch {
            left: bundle.local_tracks.len(),
            right: reference.bundle.local_tracks.len(),
        });
    }
    let mut errs = Vec::new();
    for (a, b) in bundle.screen_boxes.iter().zip(&reference.bundle.screen_boxes) {
        let ca: Vec<Pixel> = a.track.boxes.iter().map(|b| b.center()).collect();
        let cb: Vec<Pixel> = b.track.boxes.iter().map(|b| b.center()).collect();
        errs.push(obj_mc(&ca, &cb)?);
    }
    for (a, b) in bundle.local_tracks.iter().zip(&reference.bundle.local_tracks) {
        errs.push(obj_mc(&a.positions, &b.positions)?);
    }
    let obj = if errs.is_empty() {
        0.0
    } else {
        errs.iter().sum::<f64>() / errs.len() as f64
    };
    Ok(VerifyReport {
        rot_err: cam.rot_err,
        trans_err: cam.trans_err,
        cam_mc: cam.cam_mc,
        obj_mc: obj,
        reproj_rms,
    })
}
