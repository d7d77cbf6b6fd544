//! Raster IO: depth maps (PFM, 16-bit PNG with a scale), label masks and
//! RGB images.
//!
//! PFM files store rows bottom-up; every grid returned here is top-left
//! origin, row-major.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, ImageFormat, Luma, RgbImage};

use crate::error::{Error, Result};
use crate::types::{DepthMap, LabelMask};

const PNG_MAGIC: &[u8] = b"\x89PNG\r\n\x1a\n";

/// Path of the sidecar holding the metres-per-unit scale of a PNG16 depth
/// map: `depth.png` -> `depth.png.scale`.
pub fn scale_sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".scale");
    PathBuf::from(s)
}

/// Load a depth map from PFM, or from 16-bit grayscale PNG multiplied by
/// `png_scale` (or the value in the `.scale` sidecar when `None`).
/// Every value must be positive after scaling.
pub fn load_depth(path: &Path, png_scale: Option<f64>) -> Result<DepthMap> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    load_depth_bytes(&bytes, png_scale, path, || {
        let side = scale_sidecar(path);
        let text = fs::read_to_string(&side).map_err(|_| {
            Error::format(
                path,
                format!("16-bit PNG depth needs a scale (pass one or write {})", side.display()),
            )
        })?;
        text.trim()
            .parse::<f64>()
            .map_err(|e| Error::format(&side, format!("bad scale: {e}")))
    })
}

/// Decode depth from memory. `name` is only used in diagnostics.
pub fn load_depth_bytes(
    bytes: &[u8],
    png_scale: Option<f64>,
    name: &Path,
    sidecar: impl FnOnce() -> Result<f64>,
) -> Result<DepthMap> {
    let grid = if bytes.starts_with(b"Pf") || bytes.starts_with(b"PF") {
        parse_pfm(bytes, name)?
    } else if bytes.starts_with(PNG_MAGIC) {
        let scale = match png_scale {
            Some(s) => s,
            None => sidecar()?,
        };
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::format(name, format!("depth scale {scale} must be positive")));
        }
        let raw = decode_png16(bytes, name)?;
        let data = raw.data().iter().map(|&v| f64::from(v) * scale).collect();
        DepthMap::new(raw.width(), raw.height(), data)?
    } else {
        return Err(Error::format(name, "not a PFM or PNG file"));
    };
    check_positive(&grid)?;
    Ok(grid)
}

fn check_positive(grid: &DepthMap) -> Result<()> {
    let w = grid.width();
    match grid.data().iter().position(|&d| !(d.is_finite() && d > 0.0)) {
        Some(i) => Err(Error::NonPositiveDepth {
            x: i % w,
            y: i / w,
            value: grid.data()[i],
        }),
        None => Ok(()),
    }
}

fn decode_png16(bytes: &[u8], name: &Path) -> Result<crate::types::Grid<u16>> {
    let img =
        image::load_from_memory_with_format(bytes, ImageFormat::Png).map_err(|e| Error::format(name, e.to_string()))?;
    let DynamicImage::ImageLuma16(buf) = img else {
        return Err(Error::format(name, "depth PNG must be 16-bit grayscale"));
    };
    let (w, h) = buf.dimensions();
    crate::types::Grid::new(w as usize, h as usize, buf.into_raw())
}

/// Parse a single-channel PFM ("Pf"). A negative scale marks little-endian
/// data, a positive one big-endian.
pub fn parse_pfm(bytes: &[u8], name: &Path) -> Result<DepthMap> {
    let bad = |m: &str| Error::format(name, m.to_string());
    // header: magic, width, height, scale, each whitespace-separated, then a
    // single whitespace byte before the raster
    let mut tokens = Vec::with_capacity(4);
    let mut pos = 0;
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated PFM header"));
        }
        tokens.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ASCII PFM header"))?);
    }
    pos += 1;
    if tokens[0] != "Pf" {
        return Err(bad("only single-channel `Pf` PFM depth is supported"));
    }
    let width: usize = tokens[1].parse().map_err(|_| bad("bad PFM width"))?;
    let height: usize = tokens[2].parse().map_err(|_| bad("bad PFM height"))?;
    let scale: f64 = tokens[3].parse().map_err(|_| bad("bad PFM scale"))?;
    if width == 0 || height == 0 || scale == 0.0 {
        return Err(bad("degenerate PFM header"));
    }
    let little = scale < 0.0;
    let need = width * height * 4;
    let raster = bytes.get(pos..pos + need).ok_or_else(|| bad("truncated PFM raster"))?;
    let mut data = vec![0.0; width * height];
    for (i, chunk) in raster.chunks_exact(4).enumerate() {
        let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little {
            f32::from_le_bytes(b)
        } else {
            f32::from_be_bytes(b)
        };
        let (x, stored_row) = (i % width, i / width);
        data[(height - 1 - stored_row) * width + x] = f64::from(v);
    }
    DepthMap::new(width, height, data)
}

/// Little-endian single-channel PFM, rows stored bottom-up. Values are
/// narrowed to `f32`.
pub fn encode_pfm(grid: &DepthMap) -> Vec<u8> {
    let (w, h) = (grid.width(), grid.height());
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(w * h * 4);
    for row in grid.rows().collect::<Vec<_>>().into_iter().rev() {
        for &v in row {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn write_pfm(path: &Path, grid: &DepthMap) -> Result<()> {
    fs::write(path, encode_pfm(grid)).map_err(|e| Error::io(path, e))
}

/// Write 16-bit grayscale PNG depth plus its `.scale` sidecar.
pub fn write_png16_depth(path: &Path, raw: &crate::types::Grid<u16>, scale: f64) -> Result<()> {
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(raw.width() as u32, raw.height() as u32, raw.data().to_vec())
            .expect("grid dimensions match");
    buf.save_with_format(path, ImageFormat::Png)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let side = scale_sidecar(path);
    fs::write(&side, format!("{scale}\n")).map_err(|e| Error::io(&side, e))
}

/// Object labels from an 8- or 16-bit grayscale PNG.
pub fn load_mask(path: &Path) -> Result<LabelMask> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_mask(&bytes, path)
}

pub fn decode_mask(bytes: &[u8], name: &Path) -> Result<LabelMask> {
    let img =
        image::load_from_memory_with_format(bytes, ImageFormat::Png).map_err(|e| Error::format(name, e.to_string()))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<u32> = match img {
        DynamicImage::ImageLuma8(b) => b.into_raw().into_iter().map(u32::from).collect(),
        DynamicImage::ImageLuma16(b) => b.into_raw().into_iter().map(u32::from).collect(),
        _ => return Err(Error::format(name, "mask must be single-channel grayscale")),
    };
    LabelMask::new(w, h, data)
}

pub fn encode_mask_png(mask: &LabelMask) -> Result<Vec<u8>> {
    let raw: Vec<u16> = mask.data().iter().map(|&v| v.min(u32::from(u16::MAX)) as u16).collect();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(mask.width() as u32, mask.height() as u32, raw).expect("grid dimensions match");
    let mut out = Vec::new();
    buf.write_to(&mut std::io::Cursor::new(&mut out), ImageFormat::Png)
        .map_err(|e| Error::format("<mask>", e.to_string()))?;
    Ok(out)
}

pub fn load_rgb(path: &Path) -> Result<RgbImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_rgb(&bytes, path)
}

pub fn decode_rgb(bytes: &[u8], name: &Path) -> Result<RgbImage> {
    image::load_from_memory(bytes)
        .map(|i| i.to_rgb8())
        .map_err(|e| Error::format(name, e.to_string()))
}

/// 8-bit RGB PNG bytes.
pub fn encode_png(img: &RgbImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    img.write_to(&mut std::io::Cursor::new(&mut out), ImageFormat::Png)
        .map_err(|e| Error::format("<png>", e.to_string()))?;
    Ok(out)
}

pub fn write_png(path: &Path, img: &RgbImage) -> Result<()> {
    let bytes = encode_png(img)?;
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Grid;

    #[test]
    fn constant_pfm_reads_back() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.pfm");
        write_pfm(&p, &DepthMap::filled(2, 2, 1.0)).unwrap();
        let g = load_depth(&p, None).unwrap();
        assert_eq!(g.data(), &[1.0; 4]);
    }

    #[test]
    fn pfm_rows_are_flipped_to_top_left() {
        // stored bottom-up: first stored row is the image's bottom row
        let mut bytes = b"Pf\n2 2\n-1.0\n".to_vec();
        for v in [1.0f32, 2.0, 3.0, 4.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let g = parse_pfm(&bytes, Path::new("x.pfm")).unwrap();
        assert_eq!(g.data(), &[3.0, 4.0, 1.0, 2.0]);
        assert_eq!(encode_pfm(&g), bytes);
    }

    #[test]
    fn big_endian_pfm() {
        let mut bytes = b"Pf 1 1 1.0\n".to_vec();
        bytes.extend_from_slice(&2.5f32.to_be_bytes());
        assert_eq!(parse_pfm(&bytes, Path::new("x")).unwrap().data(), &[2.5]);
    }

    #[test]
    fn truncated_pfm_is_a_format_error() {
        let bytes = b"Pf\n4 4\n-1.0\n\0\0\0\0".to_vec();
        assert!(matches!(parse_pfm(&bytes, Path::new("x")), Err(Error::Format { .. })));
        assert!(matches!(
            parse_pfm(b"PF\n1 1\n-1\n\0\0\0\0\0\0\0\0\0\0\0\0", Path::new("x")),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn png16_applies_scale() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.png");
        write_png16_depth(&p, &Grid::new(1, 1, vec![1000u16]).unwrap(), 0.002).unwrap();
        assert_eq!(load_depth(&p, None).unwrap().data(), &[2.0]);
        assert_eq!(load_depth(&p, Some(0.001)).unwrap().data(), &[1.0]);
    }

    #[test]
    fn png16_zero_is_non_positive() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.png");
        write_png16_depth(&p, &Grid::new(2, 1, vec![5u16, 0]).unwrap(), 1.0).unwrap();
        assert!(matches!(
            load_depth(&p, None),
            Err(Error::NonPositiveDepth { x: 1, y: 0, .. })
        ));
    }

    #[test]
    fn png16_without_scale_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.png");
        write_png16_depth(&p, &Grid::new(1, 1, vec![7u16]).unwrap(), 1.0).unwrap();
        fs::remove_file(scale_sidecar(&p)).unwrap();
        assert!(matches!(load_depth(&p, None), Err(Error::Format { .. })));
    }

    #[test]
    fn missing_file_is_io() {
        let err = load_depth(Path::new("/nonexistent/depth.pfm"), None).unwrap_err();
        assert!(err.is_io());
        assert!(err.to_string().contains("/nonexistent/depth.pfm"));
    }

    #[test]
    fn mask_round_trip() {
        let m = LabelMask::new(3, 1, vec![0, 2, 300]).unwrap();
        let back = decode_mask(&encode_mask_png(&m).unwrap(), Path::new("m")).unwrap();
        assert_eq!(back, m);
    }
}
