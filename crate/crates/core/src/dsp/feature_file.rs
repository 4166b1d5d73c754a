//! `MELF` feature files: one per song, holding every clip's log-mel matrix.
//!
//! Layout (little-endian): magic `MELF`, version u32, n_clips u32, n_mels u32,
//! n_frames u32, then `n_clips * n_mels * n_frames` f32 values, clip-major
//! and bin-major within a clip.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const FEATURE_MAGIC: &[u8; 4] = b"MELF";
pub const FEATURE_VERSION: u32 = 1;
const HEADER_LEN: usize = 20;

pub fn write_features(path: &Path, clips: &[Matrix]) -> Result<()> {
    let (n_mels, n_frames) = clips.first().map(Matrix::shape).unwrap_or((0, 0));
    if let Some(bad) = clips.iter().find(|c| c.shape() != (n_mels, n_frames)) {
        return Err(Error::ShapeMismatch(format!(
            "clip of shape {:?} among {n_mels}x{n_frames} clips",
            bad.shape()
        )));
    }
    let mut buf = Vec::with_capacity(HEADER_LEN + 4 * clips.len() * n_mels * n_frames);
    buf.extend_from_slice(FEATURE_MAGIC);
    for v in [FEATURE_VERSION, clips.len() as u32, n_mels as u32, n_frames as u32] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for clip in clips {
        for &v in clip.data() {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_features(path: &Path) -> Result<Vec<Matrix>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: &str| Error::Format(format!("{}: {msg}", path.display()));
    if bytes.len() < HEADER_LEN || &bytes[..4] != FEATURE_MAGIC {
        return Err(bad("not a MELF feature file"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let version = word(0);
    if version != FEATURE_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let (n_clips, n_mels, n_frames) = (word(1) as usize, word(2) as usize, word(3) as usize);
    let per_clip = n_mels * n_frames;
    if bytes.len() != HEADER_LEN + 4 * n_clips * per_clip {
        return Err(bad("payload length does not match header"));
    }
    let values: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    values
        .chunks_exact(per_clip.max(1))
        .take(n_clips)
        .map(|chunk| Matrix::new(n_mels, n_frames, chunk.to_vec()))
        .collect()
}
