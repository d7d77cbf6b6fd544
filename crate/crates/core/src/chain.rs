//! Overlapping chunks for clip-by-clip generation of long shots.
//!
//! Signals are translated once over the whole design and then sliced, so the
//! overlap frames of consecutive chunks agree exactly. Each chunk's camera
//! path is re-anchored on its first frame.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundle::{write_bundle, SignalBundle};
use crate::design::MotionDesign;
use crate::error::{Error, Result};
use crate::pipeline::{translate, TranslateOptions, Translation};
use crate::types::{CameraPath, Extrinsics, PointTrack, SceneContext};

pub const DEFAULT_CHUNK_LEN: usize = 64;
pub const DEFAULT_OVERLAP: usize = 16;
pub const CHAIN_MANIFEST_FILE: &str = "chain_manifest.json";

/// Path relative to frame `anchor`: `E'_l = E_{anchor+l} * E_anchor^-1`.
pub fn rebase_path(path: &CameraPath, anchor: usize) -> Result<CameraPath> {
    if anchor >= path.len() {
        return Err(Error::Index {
            index: anchor,
            len: path.len(),
        });
    }
    let inv = path.extrinsics(anchor).inverse();
    let frames = path.frames()[anchor..]
        .iter()
        .enumerate()
        .map(|(l, (e, k))| {
            // the anchor frame is the identity by construction
            let e = if l == 0 {
                Extrinsics::identity()
            } else {
                e.compose(&inv)
            };
            (e, *k)
        })
        .collect();
    CameraPath::new(frames)
}

/// Chunk start frames `i * (chunk_len - overlap)`; chunks are added until one
/// reaches the last frame, and the last chunk may be shorter.
pub fn chunk_starts(frame_count: usize, chunk_len: usize, overlap: usize) -> Result<Vec<usize>> {
    if overlap == 0 || overlap >= chunk_len {
        return Err(Error::Validation(format!(
            "overlap must lie in 1..{chunk_len}, got {overlap}"
        )));
    }
    if frame_count < chunk_len {
        return Err(Error::Validation(format!(
            "frame_count {frame_count} is shorter than chunk_len {chunk_len}"
        )));
    }
    let step = chunk_len - overlap;
    let mut starts = vec![0];
    while starts.last().unwrap() + chunk_len < frame_count {
        starts.push(starts.last().unwrap() + step);
    }
    Ok(starts)
}

#[derive(Debug, Clone)]
pub struct Chunk {
    pub start: usize,
    pub path: CameraPath,
    pub bundle: SignalBundle,
}

impl Chunk {
    pub fn len(&self) -> usize {
        self.bundle.frame_count
    }

    pub fn is_empty(&self) -> bool {
        self.bundle.frame_count == 0
    }

    /// Replace the first frames of every point track with positions recovered
    /// from an already generated clip, in [`SignalBundle::tracks`] order, and
    /// re-encode the coefficients.
    pub fn splice_overlap(&mut self, recovered: &[PointTrack], k: usize) -> Result<()> {
        if recovered.len() != self.bundle.track_count() {
            return Err(Error::LengthMismatch {
                left: recovered.len(),
                right: self.bundle.track_count(),
            });
        }
        let n_cam = self.bundle.camera_tracks.len();
        for (i, r) in recovered.iter().enumerate() {
            let target = if i < n_cam {
                &mut self.bundle.camera_tracks[i]
            } else {
                &mut self.bundle.local_tracks[i - n_cam]
            };
            if r.positions.len() > target.len() || r.visible.len() != r.positions.len() {
                return Err(Error::LengthMismatch {
                    left: r.positions.len(),
                    right: target.len(),
                });
            }
            target.positions[..r.len()].copy_from_slice(&r.positions);
            target.visible[..r.len()].copy_from_slice(&r.visible);
        }
        let rebuilt = self.bundle.slice(0, self.bundle.frame_count, k)?;
        self.bundle.traj_coeffs = rebuilt.traj_coeffs;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ChunkPlan {
    pub chunk_len: usize,
    pub overlap: usize,
    pub chunks: Vec<Chunk>,
}

impl ChunkPlan {
    pub fn starts(&self) -> Vec<usize> {
        self.chunks.iter().map(|c| c.start).collect()
    }
}

/// Split an existing global translation into chunks.
pub fn plan_chunks(global: &Translation, chunk_len: usize, overlap: usize, k: usize) -> Result<ChunkPlan> {
    let l = global.bundle.frame_count;
    let starts = chunk_starts(l, chunk_len, overlap)?;
    let chunks = starts
        .par_iter()
        .map(|&start| {
            let len = chunk_len.min(l - start);
            let rebased = rebase_path(&global.path, start)?;
            let path = CameraPath::new(rebased.frames()[..len].to_vec())?;
            Ok(Chunk {
                start,
                path,
                bundle: global.bundle.slice(start, len, k)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ChunkPlan {
        chunk_len,
        overlap,
        chunks,
    })
}

pub fn chain_chunks(
    design: &MotionDesign,
    ctx: &SceneContext,
    chunk_len: usize,
    overlap: usize,
    opts: &TranslateOptions,
) -> Result<ChunkPlan> {
    chunk_starts(design.frame_count, chunk_len, overlap)?;
    let global = translate(design, ctx, opts)?;
    plan_chunks(&global, chunk_len, overlap, opts.k)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainManifest {
    pub chunk_len: usize,
    pub overlap: usize,
    pub starts: Vec<usize>,
    pub chunks: Vec<String>,
}

pub fn chunk_dir_name(i: usize) -> String {
    format!("chunk_{i:03}")
}

/// One bundle directory per chunk plus `chain_manifest.json`.
pub fn write_chain(plan: &ChunkPlan, dir: &Path) -> Result<ChainManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut names = Vec::with_capacity(plan.chunks.len());
    for (i, chunk) in plan.chunks.iter().enumerate() {
        let name = chunk_dir_name(i);
        write_bundle(&chunk.bundle, &dir.join(&name))?;
        names.push(name);
    }
    let manifest = ChainManifest {
        chunk_len: plan.chunk_len,
        overlap: plan.overlap,
        starts: plan.starts(),
        chunks: names,
    };
    let path = dir.join(CHAIN_MANIFEST_FILE);
    let mut bytes = serde_json::to_vec_pretty(&manifest).expect("chain manifest serializes");
    bytes.push(b'\n');
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
