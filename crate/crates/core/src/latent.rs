//! Sidecar metadata that travels next to every latent `.npy` file, since the
//! npy format itself cannot say which codec produced the frames.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::codec::LatentSequence;
use crate::error::{Error, Result};
use crate::tensor_io::{read_npy, write_atomically, write_npy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentMeta {
    pub codec_id: String,
    pub frame_rate: f64,
    pub latent_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_rate: Option<u32>,
}

impl LatentMeta {
    pub fn for_sequence(z: &LatentSequence, sample_rate: Option<u32>) -> Self {
        Self {
            codec_id: z.codec_id.clone(),
            frame_rate: z.frame_rate,
            latent_dim: z.dim(),
            sample_rate,
        }
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::MalformedHeader(format!("latent metadata: {e}")))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("metadata serializes");
        text.push('\n');
        write_atomically(path.as_ref(), |w| Ok(std::io::Write::write_all(w, text.as_bytes())?))
    }
}

/// Default sidecar location: the npy path with its extension replaced by `json`.
pub fn default_meta_path(npy: &Path) -> PathBuf {
    npy.with_extension("json")
}

/// Loads an npy latent matrix and checks it against its sidecar.
pub fn read_latents(npy: impl AsRef<Path>, meta: impl AsRef<Path>) -> Result<(LatentSequence, LatentMeta)> {
    let frames = read_npy(npy)?;
    let meta = LatentMeta::read(meta)?;
    if frames.cols() != meta.latent_dim {
        return Err(Error::DimensionMismatch {
            expected: meta.latent_dim,
            found: frames.cols(),
        });
    }
    let z = LatentSequence::new(frames, meta.frame_rate, meta.codec_id.clone())?;
    Ok((z, meta))
}

pub fn write_latents(npy: impl AsRef<Path>, meta_path: impl AsRef<Path>, z: &LatentSequence, sample_rate: Option<u32>) -> Result<()> {
    write_npy(npy, &z.frames)?;
    LatentMeta::for_sequence(z, sample_rate).write(meta_path)
}
