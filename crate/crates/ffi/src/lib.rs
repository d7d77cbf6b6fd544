//! C ABI over motionforge.
//!
//! Handles (`MfDesign`, `MfScene`, `MfBundle`) are opaque and owned by the
//! caller once returned; release each with its `_free` function. Every
//! fallible call returns an `MfStatus`; on failure the message is available
//! from `mf_last_error_message` on the same thread until the next call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use motionforge::bundle::{write_bundle, SignalBundle};
use motionforge::codec::{dct_decode, dct_encode, TrajCoeffs};
use motionforge::design::{parse_design, MotionDesign};
use motionforge::io::{load_depth, load_mask};
use motionforge::pipeline::{translate, TranslateOptions};
use motionforge::types::{DepthMap, LabelMask, SceneContext};
use motionforge::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MfStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Format = 4,
    Schema = 5,
    Validation = 6,
    Domain = 7,
    DimensionMismatch = 8,
    Degenerate = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

impl From<&Error> for MfStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Io { .. } => MfStatus::Io,
            Error::Format { .. } => MfStatus::Format,
            Error::Schema { .. } => MfStatus::Schema,
            Error::Validation(_) => MfStatus::Validation,
            Error::DimensionMismatch(_) => MfStatus::DimensionMismatch,
            Error::DegenerateConfiguration(_) => MfStatus::Degenerate,
            _ => MfStatus::Domain,
        }
    }
}

/// Parsed motion design.
pub struct MfDesign(MotionDesign);

/// Depth, optional object mask and default intrinsics for one image.
pub struct MfScene(SceneContext);

/// Translated control signals.
pub struct MfBundle(SignalBundle);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(MfStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(MfStatus::from(&e), e.to_string())
    }
}

type FfiResult<T = ()> = Result<T, Fail>;

fn guard(f: impl FnOnce() -> FfiResult) -> MfStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MfStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            MfStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(MfStatus::NullArgument, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(MfStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> FfiResult {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failure on this thread, or NULL. Valid until the next
/// call into the library on this thread.
#[no_mangle]
pub extern "C" fn mf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parse and validate a design document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mf_design_parse(json: *const c_char, out: *mut *mut MfDesign) -> MfStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        put(out, MfDesign(parse_design(text)?))
    })
}

/// # Safety
/// `design` must come from `mf_design_parse` (or be NULL) and not be used again.
#[no_mangle]
pub unsafe extern "C" fn mf_design_free(design: *mut MfDesign) {
    if !design.is_null() {
        drop(Box::from_raw(design));
    }
}

/// Frame count of a design, 0 for NULL.
///
/// # Safety
/// `design` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn mf_design_frame_count(design: *const MfDesign) -> usize {
    design.as_ref().map_or(0, |d| d.0.frame_count)
}

/// Build a scene from row-major buffers of `width * height` values.
/// `labels` may be NULL for a fully static scene.
///
/// # Safety
/// `depth` (and `labels` when non-NULL) must point to `width * height`
/// readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mf_scene_new(
    width: usize,
    height: usize,
    depth: *const f64,
    labels: *const u32,
    out: *mut *mut MfScene,
) -> MfStatus {
    guard(|| {
        if depth.is_null() {
            return Err(null("depth"));
        }
        let n = width
            .checked_mul(height)
            .ok_or_else(|| Fail(MfStatus::Domain, "scene size overflows".into()))?;
        let depth = DepthMap::new(width, height, std::slice::from_raw_parts(depth, n).to_vec())?;
        let mask = if labels.is_null() {
            None
        } else {
            Some(LabelMask::new(
                width,
                height,
                std::slice::from_raw_parts(labels, n).to_vec(),
            )?)
        };
        put(out, MfScene(SceneContext::new(depth, mask, None)?))
    })
}

/// Load a scene from a depth file (PFM or 16-bit PNG) and an optional mask
/// PNG. `depth_scale <= 0` reads the PNG scale from the `.scale` sidecar.
///
/// # Safety
/// Paths must be NUL-terminated strings (`mask_path` may be NULL); `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn mf_scene_load(
    depth_path: *const c_char,
    depth_scale: f64,
    mask_path: *const c_char,
    out: *mut *mut MfScene,
) -> MfStatus {
    guard(|| {
        let depth_path = PathBuf::from(str_arg(depth_path, "depth_path")?);
        let scale = (depth_scale > 0.0).then_some(depth_scale);
        let depth = load_depth(&depth_path, scale)?;
        let mask = if mask_path.is_null() {
            None
        } else {
            Some(load_mask(&PathBuf::from(str_arg(mask_path, "mask_path")?))?)
        };
        put(out, MfScene(SceneContext::new(depth, mask, None)?))
    })
}

/// # Safety
/// `scene` must come from `mf_scene_new`/`mf_scene_load` (or be NULL) and not
/// be used again.
#[no_mangle]
pub unsafe extern "C" fn mf_scene_free(scene: *mut MfScene) {
    if !scene.is_null() {
        drop(Box::from_raw(scene));
    }
}

/// Translate a design over a scene.
///
/// # Safety
/// `design` and `scene` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mf_translate(
    design: *const MfDesign,
    scene: *const MfScene,
    points: usize,
    seed: u64,
    k: usize,
    out: *mut *mut MfBundle,
) -> MfStatus {
    guard(|| {
        let design = handle(design, "design")?;
        let scene = handle(scene, "scene")?;
        let opts = TranslateOptions { points, seed, k };
        put(out, MfBundle(translate(&design.0, &scene.0, &opts)?.bundle))
    })
}

/// # Safety
/// `bundle` must come from `mf_translate` (or be NULL) and not be used again.
#[no_mangle]
pub unsafe extern "C" fn mf_bundle_free(bundle: *mut MfBundle) {
    if !bundle.is_null() {
        drop(Box::from_raw(bundle));
    }
}

/// Frame count of a bundle, 0 for NULL.
///
/// # Safety
/// `bundle` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn mf_bundle_frame_count(bundle: *const MfBundle) -> usize {
    bundle.as_ref().map_or(0, |b| b.0.frame_count)
}

/// Number of point tracks (camera tracks first, then local tracks), 0 for NULL.
///
/// # Safety
/// `bundle` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn mf_bundle_track_count(bundle: *const MfBundle) -> usize {
    bundle.as_ref().map_or(0, |b| b.0.track_count())
}

/// Copy track `index` as interleaved x, y pairs into `out_xy`, which holds
/// `capacity` doubles and needs `2 * frame_count`.
///
/// # Safety
/// `bundle` must be a live handle; `out_xy` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn mf_bundle_track_positions(
    bundle: *const MfBundle,
    index: usize,
    out_xy: *mut f64,
    capacity: usize,
) -> MfStatus {
    guard(|| {
        let b = handle(bundle, "bundle")?;
        let count = b.0.track_count();
        let (_, track) = b.0.tracks().nth(index).ok_or(Error::Index { index, len: count })?;
        write_pairs(&track.positions, out_xy, capacity)
    })
}

/// Write the bundle directory (manifest, JSON files, box frames).
///
/// # Safety
/// `bundle` must be a live handle; `dir` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn mf_bundle_write(bundle: *const MfBundle, dir: *const c_char) -> MfStatus {
    guard(|| {
        let b = handle(bundle, "bundle")?;
        let dir = PathBuf::from(str_arg(dir, "dir")?);
        write_bundle(&b.0, &dir)?;
        Ok(())
    })
}

unsafe fn read_pairs(xy: *const f64, n: usize) -> FfiResult<Vec<[f64; 2]>> {
    if xy.is_null() {
        return Err(null("input buffer"));
    }
    Ok(std::slice::from_raw_parts(xy, 2 * n)
        .chunks_exact(2)
        .map(|c| [c[0], c[1]])
        .collect())
}

unsafe fn write_pairs(pairs: &[[f64; 2]], out_xy: *mut f64, capacity: usize) -> FfiResult {
    if out_xy.is_null() {
        return Err(null("output buffer"));
    }
    if capacity < 2 * pairs.len() {
        return Err(Fail(
            MfStatus::BufferTooSmall,
            format!("need {} doubles, got {capacity}", 2 * pairs.len()),
        ));
    }
    let out = std::slice::from_raw_parts_mut(out_xy, 2 * pairs.len());
    for (dst, p) in out.chunks_exact_mut(2).zip(pairs) {
        dst.copy_from_slice(p);
    }
    Ok(())
}

/// Encode a trajectory of `len` interleaved x, y pairs into `k` coefficient
/// pairs (`2 * k` doubles in `out_coeffs`). Slot 0 holds the start point.
///
/// # Safety
/// `xy` must hold `2 * len` doubles and `out_coeffs` `2 * k`.
#[no_mangle]
pub unsafe extern "C" fn mf_dct_encode(xy: *const f64, len: usize, k: usize, out_coeffs: *mut f64) -> MfStatus {
    guard(|| {
        let track = read_pairs(xy, len)?;
        let enc = dct_encode(&track, k)?;
        write_pairs(&enc.coeffs, out_coeffs, 2 * k)
    })
}

/// Decode `k` coefficient pairs into `len` interleaved x, y pairs.
///
/// # Safety
/// `coeffs` must hold `2 * k` doubles and `out_xy` `2 * len`.
#[no_mangle]
pub unsafe extern "C" fn mf_dct_decode(coeffs: *const f64, k: usize, len: usize, out_xy: *mut f64) -> MfStatus {
    guard(|| {
        if k == 0 {
            return Err(Fail(MfStatus::Domain, "K must be at least 1".into()));
        }
        let coeffs = TrajCoeffs {
            coeffs: read_pairs(coeffs, k)?,
        };
        write_pairs(&dct_decode(&coeffs, len), out_xy, 2 * len)
    })
}
