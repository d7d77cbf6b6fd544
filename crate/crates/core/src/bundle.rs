//! The translated signal set and its on-disk layout.
//!
//! ```text
//! DIR/manifest.json
//! DIR/tracks.json        [{kind, positions, visible}]
//! DIR/boxes.json         [{id, boxes, depth}]
//! DIR/coeffs.json        [{track_index, kind, K, coeffs}]
//! DIR/bbox_frames/0000.png ...
//! ```
//!
//! Camera tracks come first in `tracks.json`, then local tracks;
//! `track_index` in `coeffs.json` indexes that list.

use std::fs;
use std::path::Path;

use image::RgbImage;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::codec::{dct_encode, rasterize_boxes, TrajCoeffs};
use crate::design::Canvas;
use crate::error::{Error, Result};
use crate::objmotion::ScreenBoxTrack;
use crate::types::{BBox2D, PointTrack};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRACKS_FILE: &str = "tracks.json";
pub const BOXES_FILE: &str = "boxes.json";
pub const COEFFS_FILE: &str = "coeffs.json";
pub const BBOX_FRAMES_DIR: &str = "bbox_frames";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackKind {
    Camera,
    Local,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectBoxes {
    pub object_id: u32,
    pub track: ScreenBoxTrack,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedTrack {
    pub track_index: usize,
    pub kind: TrackKind,
    pub coeffs: TrajCoeffs,
}

/// Everything the video model is conditioned on, for one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalBundle {
    pub frame_count: usize,
    pub fps: u32,
    pub canvas: Canvas,
    pub camera_tracks: Vec<PointTrack>,
    pub screen_boxes: Vec<ObjectBoxes>,
    pub local_tracks: Vec<PointTrack>,
    pub traj_coeffs: Vec<EncodedTrack>,
    pub bbox_frames: Vec<RgbImage>,
    pub warnings: Vec<String>,
    pub text_prompt: String,
}

/// Inputs of [`SignalBundle::assemble`]; coefficients and rasters are
/// derived from them.
#[derive(Debug, Clone, Default)]
pub struct BundleParts {
    pub frame_count: usize,
    pub fps: u32,
    pub canvas: Canvas,
    pub camera_tracks: Vec<PointTrack>,
    pub screen_boxes: Vec<ObjectBoxes>,
    pub local_tracks: Vec<PointTrack>,
    pub warnings: Vec<String>,
    pub text_prompt: String,
}

impl SignalBundle {
    /// Encode every track with `min(k, L)` slots and rasterize the boxes.
    pub fn assemble(parts: BundleParts, k: usize) -> Result<SignalBundle> {
        let l = parts.frame_count;
        let lengths = parts
            .camera_tracks
            .iter()
            .chain(&parts.local_tracks)
            .flat_map(|t| [t.positions.len(), t.visible.len()])
            .chain(
                parts
                    .screen_boxes
                    .iter()
                    .flat_map(|o| [o.track.boxes.len(), o.track.z.len()]),
            );
        for n in lengths {
            if n != l {
                return Err(Error::LengthMismatch { left: n, right: l });
            }
        }
        let traj_coeffs = encode_tracks(&parts.camera_tracks, &parts.local_tracks, k)?;
        let screen: Vec<ScreenBoxTrack> = parts.screen_boxes.iter().map(|o| o.track.clone()).collect();
        let bbox_frames = rasterize_boxes(&screen, parts.canvas.width, parts.canvas.height, l)?;
        Ok(SignalBundle {
            frame_count: l,
            fps: parts.fps,
            canvas: parts.canvas,
            camera_tracks: parts.camera_tracks,
            screen_boxes: parts.screen_boxes,
            local_tracks: parts.local_tracks,
            traj_coeffs,
            bbox_frames,
            warnings: parts.warnings,
            text_prompt: parts.text_prompt,
        })
    }

    /// All point tracks in file order: camera tracks, then local tracks.
    pub fn tracks(&self) -> impl Iterator<Item = (TrackKind, &PointTrack)> {
        self.camera_tracks
            .iter()
            .map(|t| (TrackKind::Camera, t))
            .chain(self.local_tracks.iter().map(|t| (TrackKind::Local, t)))
    }

    pub fn track_count(&self) -> usize {
        self.camera_tracks.len() + self.local_tracks.len()
    }

    /// Frames `[start, start + len)` with coefficients re-encoded on the
    /// slice, so slot 0 is the slice's first position.
    pub fn slice(&self, start: usize, len: usize, k: usize) -> Result<SignalBundle> {
        let end = start + len;
        if len < 2 || end > self.frame_count {
            return Err(Error::Index {
                index: end,
                len: self.frame_count,
            });
        }
        let camera_tracks: Vec<PointTrack> = self.camera_tracks.iter().map(|t| t.slice(start, end)).collect();
        let local_tracks: Vec<PointTrack> = self.local_tracks.iter().map(|t| t.slice(start, end)).collect();
        let traj_coeffs = encode_tracks(&camera_tracks, &local_tracks, k)?;
        Ok(SignalBundle {
            frame_count: len,
            fps: self.fps,
            canvas: self.canvas,
            camera_tracks,
            screen_boxes: self
                .screen_boxes
                .iter()
                .map(|o| ObjectBoxes {
                    object_id: o.object_id,
                    track: o.track.slice(start, end),
                })
                .collect(),
            local_tracks,
            traj_coeffs,
            bbox_frames: self.bbox_frames[start..end].to_vec(),
            warnings: self.warnings.clone(),
            text_prompt: self.text_prompt.clone(),
        })
    }

    pub fn tracks_doc(&self) -> Vec<TrackDoc> {
        self.tracks()
            .map(|(kind, t)| TrackDoc {
                kind,
                positions: t.positions.clone(),
                visible: t.visible.clone(),
            })
            .collect()
    }

    pub fn boxes_doc(&self) -> Vec<BoxesDoc> {
        self.screen_boxes
            .iter()
            .map(|o| BoxesDoc {
                id: o.object_id,
                boxes: o.track.boxes.clone(),
                depth: o.track.z.clone(),
            })
            .collect()
    }

    pub fn coeffs_doc(&self) -> Vec<CoeffsDoc> {
        self.traj_coeffs
            .iter()
            .map(|c| CoeffsDoc {
                track_index: c.track_index,
                kind: c.kind,
                k: c.coeffs.k(),
                coeffs: c.coeffs.coeffs.clone(),
            })
            .collect()
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            frame_count: self.frame_count,
            fps: self.fps,
            canvas: self.canvas,
            files: ManifestFiles {
                tracks: TRACKS_FILE.into(),
                boxes: BOXES_FILE.into(),
                coeffs: COEFFS_FILE.into(),
                bbox_frames_dir: BBOX_FRAMES_DIR.into(),
            },
            versions: Versions { format: FORMAT_VERSION },
            counts: Counts {
                camera_tracks: self.camera_tracks.len(),
                local_tracks: self.local_tracks.len(),
                objects: self.screen_boxes.len(),
            },
            warnings: self.warnings.clone(),
            text_prompt: self.text_prompt.clone(),
        }
    }
}

fn encode_tracks(camera: &[PointTrack], local: &[PointTrack], k: usize) -> Result<Vec<EncodedTrack>> {
    camera
        .iter()
        .map(|t| (TrackKind::Camera, t))
        .chain(local.iter().map(|t| (TrackKind::Local, t)))
        .enumerate()
        .map(|(track_index, (kind, t))| {
            Ok(EncodedTrack {
                track_index,
                kind,
                coeffs: dct_encode(&t.positions, k.min(t.len()))?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackDoc {
    pub kind: TrackKind,
    pub positions: Vec<[f64; 2]>,
    pub visible: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxesDoc {
    pub id: u32,
    pub boxes: Vec<BBox2D>,
    pub depth: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffsDoc {
    pub track_index: usize,
    pub kind: TrackKind,
    #[serde(rename = "K")]
    pub k: usize,
    pub coeffs: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestFiles {
    pub tracks: String,
    pub boxes: String,
    pub coeffs: String,
    pub bbox_frames_dir: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Versions {
    pub format: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub camera_tracks: usize,
    pub local_tracks: usize,
    pub objects: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub frame_count: usize,
    pub fps: u32,
    pub canvas: Canvas,
    pub files: ManifestFiles,
    pub versions: Versions,
    pub counts: Counts,
    pub warnings: Vec<String>,
    pub text_prompt: String,
}

pub fn frame_file_name(l: usize) -> String {
    format!("{l:04}.png")
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("bundle documents serialize");
    out.push(b'\n');
    out
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Write the bundle under `dir`, replacing any previous bundle there. The
/// bytes depend only on the bundle contents.
pub fn write_bundle(bundle: &SignalBundle, dir: &Path) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let frames_dir = dir.join(BBOX_FRAMES_DIR);
    if frames_dir.exists() {
        fs::remove_dir_all(&frames_dir).map_err(|e| Error::io(&frames_dir, e))?;
    }
    fs::create_dir_all(&frames_dir).map_err(|e| Error::io(&frames_dir, e))?;

    write_file(&dir.join(TRACKS_FILE), &to_json(&bundle.tracks_doc()))?;
    write_file(&dir.join(BOXES_FILE), &to_json(&bundle.boxes_doc()))?;
    write_file(&dir.join(COEFFS_FILE), &to_json(&bundle.coeffs_doc()))?;
    bundle.bbox_frames.par_iter().enumerate().try_for_each(|(l, img)| {
        let bytes = crate::io::encode_png(img)?;
        write_file(&frames_dir.join(frame_file_name(l)), &bytes)
    })?;
    let manifest = bundle.manifest();
    write_file(&dir.join(MANIFEST_FILE), &to_json(&manifest))?;
    Ok(manifest)
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| Error::format(path, e.to_string()))
}

/// Read a bundle written by [`write_bundle`].
pub fn read_bundle(dir: &Path) -> Result<SignalBundle> {
    let manifest: Manifest = read_json(&dir.join(MANIFEST_FILE))?;
    if manifest.versions.format != FORMAT_VERSION {
        return Err(Error::format(
            dir.join(MANIFEST_FILE),
            format!("unsupported format version {}", manifest.versions.format),
        ));
    }
    let tracks: Vec<TrackDoc> = read_json(&dir.join(&manifest.files.tracks))?;
    let boxes: Vec<BoxesDoc> = read_json(&dir.join(&manifest.files.boxes))?;
    let coeffs: Vec<CoeffsDoc> = read_json(&dir.join(&manifest.files.coeffs))?;
    let frames_dir = dir.join(&manifest.files.bbox_frames_dir);
    let bbox_frames = (0..manifest.frame_count)
        .into_par_iter()
        .map(|l| crate::io::load_rgb(&frames_dir.join(frame_file_name(l))))
        .collect::<Result<Vec<_>>>()?;

    let mut camera_tracks = Vec::new();
    let mut local_tracks = Vec::new();
    for t in tracks {
        let track = PointTrack {
            positions: t.positions,
            visible: t.visible,
        };
        match t.kind {
            TrackKind::Camera => camera_tracks.push(track),
            TrackKind::Local => local_tracks.push(track),
        }
    }
    Ok(SignalBundle {
        frame_count: manifest.frame_count,
        fps: manifest.fps,
        canvas: manifest.canvas,
        camera_tracks,
        screen_boxes: boxes
            .into_iter()
            .map(|b| ObjectBoxes {
                object_id: b.id,
                track: ScreenBoxTrack {
                    boxes: b.boxes,
                    z: b.depth,
                },
            })
            .collect(),
        local_tracks,
        traj_coeffs: coeffs
            .into_iter()
            .map(|c| EncodedTrack {
                track_index: c.track_index,
                kind: c.kind,
                coeffs: TrajCoeffs { coeffs: c.coeffs },
            })
            .collect(),
        bbox_frames,
        warnings: manifest.warnings,
        text_prompt: manifest.text_prompt,
    })
}
