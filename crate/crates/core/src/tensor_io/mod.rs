//! Latent interchange (a strict npy subset) and WAV audio I/O.

mod matrix;
mod npy;
mod wav;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

pub use matrix::Matrix;
pub use npy::{read_npy, read_npy_from, write_npy, write_npy_to, NPY_MAGIC};
pub use wav::{read_wav, write_wav, AudioBuffer, WavEncoding};

use crate::error::Result;

/// Writes `path` through a sibling temporary file and renames it into place,
/// so a failed write never leaves a partial file behind.
pub fn write_atomically<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<&mut File>) -> Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut writer = BufWriter::new(tmp.as_file_mut());
        body(&mut writer)?;
        writer.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
