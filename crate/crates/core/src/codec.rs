//! Compact signal representations: DCT trajectory coefficients and
//! color-coded box rasters.
//!
//! A trajectory of `L` positions is stored as `K` slots per axis. Slot 0 holds
//! the frame-0 position verbatim; slots `1..K` hold orthonormal DCT-II
//! coefficients of the residual `p_l - p_0`. Decoding drops the residual's
//! DC term and re-grounds the result on slot 0, so the decoded start point is
//! always exactly slot 0.

use std::f64::consts::PI;

use image::{Rgb, RgbImage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objmotion::ScreenBoxTrack;
use crate::types::Pixel;

/// Coefficient slots per trajectory.
pub const DEFAULT_K: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajCoeffs {
    /// `K` rows of `[u, v]`.
    pub coeffs: Vec<[f64; 2]>,
}

impl TrajCoeffs {
    pub fn k(&self) -> usize {
        self.coeffs.len()
    }

    pub fn start(&self) -> Pixel {
        self.coeffs[0]
    }
}

/// Orthonormal DCT-II basis rows `1..k` for length-`len` signals.
struct DctBasis {
    len: usize,
    // (k - 1) * len + l -> sqrt(2/L) cos(pi k (2l + 1) / 2L)
    rows: Vec<f64>,
}

impl DctBasis {
    fn new(len: usize, k: usize) -> Self {
        let scale = (2.0 / len as f64).sqrt();
        let rows = (1..k)
            .flat_map(|kk| {
                (0..len).map(move |l| scale * (PI * kk as f64 * (2 * l + 1) as f64 / (2 * len) as f64).cos())
            })
            .collect();
        DctBasis { len, rows }
    }

    fn row(&self, kk: usize) -> &[f64] {
        &self.rows[(kk - 1) * self.len..kk * self.len]
    }
}

pub fn dct_encode(track: &[Pixel], k: usize) -> Result<TrajCoeffs> {
    let len = track.len();
    if len < 2 {
        return Err(Error::Domain(format!(
            "trajectory of length {len} is too short to encode"
        )));
    }
    if k == 0 || k > len {
        return Err(Error::Domain(format!("K = {k} must lie in 1..={len}")));
    }
    let p0 = track[0];
    let basis = DctBasis::new(len, k);
    let mut coeffs = Vec::with_capacity(k);
    coeffs.push(p0);
    for kk in 1..k {
        let mut acc = [0.0; 2];
        for (b, p) in basis.row(kk).iter().zip(track) {
            acc[0] += b * (p[0] - p0[0]);
            acc[1] += b * (p[1] - p0[1]);
        }
        coeffs.push(acc);
    }
    Ok(TrajCoeffs { coeffs })
}

pub fn dct_decode(coeffs: &TrajCoeffs, len: usize) -> Vec<Pixel> {
    let k = coeffs.k();
    let start = coeffs.start();
    if len == 0 {
        return Vec::new();
    }
    let basis = DctBasis::new(len, k);
    let mut residual = vec![[0.0f64; 2]; len];
    for kk in 1..k {
        let c = coeffs.coeffs[kk];
        for (r, b) in residual.iter_mut().zip(basis.row(kk)) {
            r[0] += c[0] * b;
            r[1] += c[1] * b;
        }
    }
    let r0 = residual[0];
    residual
        .iter()
        .map(|r| [start[0] + (r[0] - r0[0]), start[1] + (r[1] - r0[1])])
        .collect()
}

/// Distinct color for object slot `index`: golden-ratio hue steps at full
/// saturation and value.
pub fn palette_color(index: usize) -> [u8; 3] {
    const GOLDEN: f64 = 0.618033988749895;
    let hue = (((index + 1) as f64 * GOLDEN).fract()) * 360.0;
    hsv_to_rgb(hue, 1.0, 1.0)
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let c = v * s;
    let hp = h / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    let to_byte = |f: f64| ((f + m) * 255.0).round().clamp(0.0, 255.0) as u8;
    [to_byte(r), to_byte(g), to_byte(b)]
}

/// Draw each object's box in its palette color on black frames; later
/// objects paint over earlier ones. Rectangles are half-open
/// `[cx - w/2, cx + w/2) x [cy - h/2, cy + h/2)`.
pub fn rasterize_boxes(
    tracks: &[ScreenBoxTrack],
    width: u32,
    height: u32,
    frame_count: usize,
) -> Result<Vec<RgbImage>> {
    if width == 0 || height == 0 {
        return Err(Error::Validation("canvas must be non-empty".into()));
    }
    if let Some(t) = tracks.iter().find(|t| t.boxes.len() != frame_count) {
        return Err(Error::LengthMismatch {
            left: t.boxes.len(),
            right: frame_count,
        });
    }
    Ok((0..frame_count)
        .into_par_iter()
        .map(|l| {
            let mut img = RgbImage::new(width, height);
            for (index, track) in tracks.iter().enumerate() {
                let color = Rgb(palette_color(index));
                if let Some((x0, x1, y0, y1)) = track.boxes[l].pixel_span(width as usize, height as usize) {
                    for y in y0..y1 {
                        for x in x0..x1 {
                            img.put_pixel(x as u32, y as u32, color);
                        }
                    }
                }
            }
            img
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::BBox2D;

    #[test]
    fn constant_track_encodes_to_its_start() {
        let track = vec![[5.0, 7.0]; 16];
        let c = dct_encode(&track, DEFAULT_K).unwrap();
        assert_eq!(c.start(), [5.0, 7.0]);
        assert!(c.coeffs[1..].iter().all(|x| *x == [0.0, 0.0]));
        assert_eq!(dct_decode(&c, 16), track);
    }

    #[test]
    fn default_k_is_ten() {
        assert_eq!(DEFAULT_K, 10);
    }

    #[test]
    fn k_bounds_are_checked() {
        let track = vec![[0.0, 0.0]; 4];
        assert!(matches!(dct_encode(&track, 5), Err(Error::Domain(_))));
        assert!(matches!(dct_encode(&track, 0), Err(Error::Domain(_))));
        assert!(matches!(dct_encode(&track[..1], 1), Err(Error::Domain(_))));
        assert!(dct_encode(&track, 4).is_ok());
    }

    #[test]
    fn full_length_encoding_is_lossless() {
        let track: Vec<Pixel> = (0..12)
            .map(|l| [(l * l) as f64 * 0.7, (l as f64).sin() * 20.0])
            .collect();
        let back = dct_decode(&dct_encode(&track, 12).unwrap(), 12);
        for (a, b) in back.iter().zip(&track) {
            assert!((a[0] - b[0]).abs() < 1e-9 && (a[1] - b[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn palette_first_color() {
        assert_eq!(palette_color(0), [0, 74, 255]);
        assert_eq!(palette_color(3), palette_color(3));
    }

    #[test]
    fn palette_is_injective_on_first_64() {
        let mut colors: Vec<[u8; 3]> = (0..64).map(palette_color).collect();
        colors.sort();
        colors.dedup();
        assert_eq!(colors.len(), 64);
    }

    fn track_of(b: BBox2D, n: usize) -> ScreenBoxTrack {
        ScreenBoxTrack {
            boxes: vec![b; n],
            z: vec![1.0; n],
        }
    }

    #[test]
    fn no_objects_give_black_frames() {
        let frames = rasterize_boxes(&[], 8, 4, 3).unwrap();
        assert_eq!(frames.len(), 3);
        assert!(frames.iter().all(|f| f.pixels().all(|p| p.0 == [0, 0, 0])));
    }

    #[test]
    fn full_canvas_box_fills_every_pixel() {
        let t = track_of(BBox2D::new(4.0, 2.0, 8.0, 4.0).unwrap(), 2);
        let frames = rasterize_boxes(&[t], 8, 4, 2).unwrap();
        assert!(frames[1].pixels().all(|p| p.0 == [0, 74, 255]));
    }

    #[test]
    fn later_objects_paint_over_earlier_ones() {
        let a = track_of(BBox2D::new(3.0, 3.0, 4.0, 4.0).unwrap(), 1);
        let b = track_of(BBox2D::new(5.0, 5.0, 4.0, 4.0).unwrap(), 1);
        let frames = rasterize_boxes(&[a, b], 10, 10, 1).unwrap();
        assert_eq!(frames[0].get_pixel(4, 4).0, palette_color(1));
        assert_eq!(frames[0].get_pixel(1, 1).0, palette_color(0));
        assert_eq!(frames[0].get_pixel(6, 6).0, palette_color(1));
        assert_eq!(frames[0].get_pixel(9, 9).0, [0, 0, 0]);
    }

    #[test]
    fn off_canvas_boxes_draw_nothing() {
        let t = track_of(BBox2D::new(-50.0, -50.0, 10.0, 10.0).unwrap(), 1);
        let frames = rasterize_boxes(&[t], 10, 10, 1).unwrap();
        assert!(frames[0].pixels().all(|p| p.0 == [0, 0, 0]));
    }
}
