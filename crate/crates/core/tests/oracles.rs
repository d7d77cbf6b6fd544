//! Hand-computed and independently computed reference values.

mod common;

use approx::assert_abs_diff_eq;
use common::*;
use motionforge::bundle::{read_bundle, write_bundle, TRACKS_FILE};
use motionforge::camera::{mix_patterns, pattern_pose, Pattern, PatternSpec};
use motionforge::codec::{dct_decode, dct_encode, palette_color};
use motionforge::design::parse_design;
use motionforge::objmotion::{project_boxes, SceneBoxTrack};
use motionforge::pipeline::{translate, TranslateOptions};
use motionforge::types::{BBox2D, Extrinsics, SceneContext};
use motionforge::verify::camera_errors;
use motionforge::warp::{project, unproject};
use nalgebra::{Matrix3, Vector3};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Orthonormal DCT-II coefficients 1..k via a length-2L FFT of the
/// symmetrically extended signal.
fn dct2_fft(x: &[f64], k: usize) -> Vec<f64> {
    let n = x.len();
    let mut buf: Vec<Complex<f64>> = x.iter().chain(x.iter().rev()).map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(2 * n).process(&mut buf);
    (1..k)
        .map(|kk| {
            let phase = Complex::from_polar(1.0, -std::f64::consts::PI * kk as f64 / (2 * n) as f64);
            (buf[kk] * phase).re / 2.0 * (2.0 / n as f64).sqrt()
        })
        .collect()
}

#[test]
fn ramp_coefficients_match_fft_dct() {
    let ramp: Vec<[f64; 2]> = (0..32).map(|l| [l as f64, -2.0 * l as f64]).collect();
    let enc = dct_encode(&ramp, 10).unwrap();
    let xs: Vec<f64> = ramp.iter().map(|p| p[0]).collect();
    let ys: Vec<f64> = ramp.iter().map(|p| p[1]).collect();
    for (kk, (ex, ey)) in dct2_fft(&xs, 10).iter().zip(dct2_fft(&ys, 10)).enumerate() {
        assert_abs_diff_eq!(enc.coeffs[kk + 1][0], *ex, epsilon = 1e-9);
        assert_abs_diff_eq!(enc.coeffs[kk + 1][1], ey, epsilon = 1e-9);
    }
    assert_eq!(enc.coeffs[0], [0.0, 0.0]);
}

#[test]
fn half_period_sinusoid_truncation_error() {
    // reference value from a standalone float64 implementation
    let sine: Vec<[f64; 2]> = (0..32)
        .map(|l| [100.0 + 30.0 * (std::f64::consts::PI * l as f64 / 31.0).sin(), 0.0])
        .collect();
    let dec = dct_decode(&dct_encode(&sine, 10).unwrap(), 32);
    let max = dec
        .iter()
        .zip(&sine)
        .map(|(a, b)| (a[0] - b[0]).abs())
        .fold(0.0, f64::max);
    assert_abs_diff_eq!(max, 1.656_535_092_389_347_6, epsilon = 1e-9);
}

#[test]
fn dolly_projection() {
    let k = k400();
    let (e, _) = pattern_pose(&PatternSpec::new(Pattern::Dolly, 0.5), 1.0, &k).unwrap();
    let x = unproject([480.0, 176.0], 2.0, &k).unwrap();
    assert_abs_diff_eq!(x.x, 0.8, epsilon = 1e-12);
    let p = project(&x, &e, &k);
    assert_abs_diff_eq!(p.pixel[0], 320.0 + 400.0 * 0.8 / 1.5, epsilon = 1e-9);
    assert_abs_diff_eq!(p.pixel[0], 533.333, epsilon = 1e-3);
    assert_abs_diff_eq!(p.pixel[1], 176.0, epsilon = 1e-9);
}

#[test]
fn trucking_projection() {
    let k = k400();
    let path = mix_patterns(&[PatternSpec::new(Pattern::Trucking, 0.1)], 2, &k).unwrap();
    let x = unproject([320.0, 176.0], 2.0, &k).unwrap();
    assert_abs_diff_eq!(project(&x, path.extrinsics(1), &k).pixel[0], 300.0, epsilon = 1e-9);
}

#[test]
fn perspective_similar_triangles() {
    let k = k400();
    let scene = SceneBoxTrack {
        boxes: vec![BBox2D::new(320.0, 176.0, 100.0, 100.0).unwrap(); 2],
        depth: vec![4.0, 4.0],
    };
    let path = mix_patterns(&[PatternSpec::new(Pattern::Dolly, 1.0)], 2, &k).unwrap();
    let b = project_boxes(&scene, &path, &k, 1).unwrap().boxes[1];
    assert_abs_diff_eq!(b.w, 133.333, epsilon = 1e-3);
}

#[test]
fn rotation_error_of_a_pan() {
    let k = k400();
    let (e, _) = pattern_pose(&PatternSpec::new(Pattern::Pan, 0.1), 1.0, &k).unwrap();
    let gt = motionforge::types::CameraPath::stationary(k, 1);
    let errs = camera_errors(&gt, &[e]).unwrap();
    assert_abs_diff_eq!(errs.rot_err, 0.1, epsilon = 1e-12);
    let ry = Matrix3::new(
        0.1f64.cos(),
        0.0,
        0.1f64.sin(),
        0.0,
        1.0,
        0.0,
        -0.1f64.sin(),
        0.0,
        0.1f64.cos(),
    );
    let direct = Extrinsics::new(ry, Vector3::zeros()).unwrap();
    assert_abs_diff_eq!(camera_errors(&gt, &[direct]).unwrap().rot_err, 0.1, epsilon = 1e-12);
}

#[test]
fn first_palette_color() {
    assert_eq!(palette_color(0), [0, 74, 255]);
}

#[test]
fn bundle_round_trip_and_determinism() {
    let design = parse_design(
        r#"{"frame_count": 16, "fps": 8,
            "camera": {"patterns": [["dolly", 0.5], ["pan", 0.1]]},
            "objects": [{"id": 1, "depth_mode": "mask_mean", "key_boxes": [
                {"frame": 0, "cx": 300, "cy": 170, "w": 80, "h": 60},
                {"frame": 15, "cx": 360, "cy": 180, "w": 90, "h": 70}]}],
            "local_tracks": [{"parent": 1, "samples": [
                {"frame": 0, "x": 310, "y": 175}, {"frame": 15, "x": 330, "y": 160}]}]}"#,
    )
    .unwrap();
    let ctx = SceneContext::new(wavy_depth_map(), Some(rect_mask(1, (250, 350, 130, 210))), None).unwrap();
    let t = translate(&design, &ctx, &TranslateOptions::default()).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_bundle(&t.bundle, a.path()).unwrap();
    write_bundle(&t.bundle, b.path()).unwrap();
    assert_eq!(tree(a.path()), tree(b.path()));

    let back = read_bundle(a.path()).unwrap();
    assert_eq!(back.frame_count, 16);
    assert_eq!(back.track_count(), t.bundle.track_count());
    for ((_, x), (_, y)) in back.tracks().zip(t.bundle.tracks()) {
        for (p, q) in x.positions.iter().zip(&y.positions) {
            assert_abs_diff_eq!(p[0], q[0], epsilon = 1e-9);
            assert_abs_diff_eq!(p[1], q[1], epsilon = 1e-9);
        }
    }
    assert!(a.path().join(TRACKS_FILE).is_file());
}
