//! The granular codebook: latent sequences cut into grains of `grain_size`
//! consecutive frames every `stride` frames, flattened row-major, and
//! indexed with the source position each grain came from.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codec::LatentSequence;
use crate::error::{Error, Result};
use crate::matcher::l2_norm;
use crate::tensor_io::{write_atomically, AudioBuffer, Matrix};

pub const CODEBOOK_MAGIC: [u8; 4] = *b"LGCB";
pub const CODEBOOK_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrainParams {
    pub grain_size: usize,
    pub stride: usize,
}

impl GrainParams {
    pub fn new(grain_size: usize, stride: usize) -> Result<Self> {
        if grain_size == 0 || stride == 0 {
            return Err(Error::InvalidGrainParams);
        }
        Ok(Self { grain_size, stride })
    }

    /// Number of grains in a sequence of `frames` frames, or 0 if it is shorter than one grain.
    pub fn grain_count(&self, frames: usize) -> usize {
        if frames < self.grain_size {
            0
        } else {
            (frames - self.grain_size) / self.stride + 1
        }
    }
}

/// A flattened run of `g` latent frames with its cached L2 norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Grain {
    vector: Vec<f32>,
    norm: f64,
}

impl Grain {
    pub fn new(vector: Vec<f32>) -> Self {
        let norm = l2_norm(&vector);
        Self { vector, norm }
    }

    pub fn vector(&self) -> &[f32] {
        &self.vector
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn len(&self) -> usize {
        self.vector.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vector.is_empty()
    }

    pub fn into_vector(self) -> Vec<f32> {
        self.vector
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source_id: String,
    pub start_frame: usize,
    #[serde(default)]
    pub augmentation_tag: String,
}

/// Cuts `z` into grains at starts 0, s, 2s, ... while start + g <= T.
/// Returns each grain with its start frame.
pub fn extract_grains(z: &LatentSequence, p: GrainParams) -> Result<Vec<(Grain, usize)>> {
    let t = z.len();
    if t < p.grain_size {
        return Err(Error::SequenceTooShort {
            frames: t,
            grain_size: p.grain_size,
        });
    }
    Ok((0..p.grain_count(t))
        .map(|i| {
            let start = i * p.stride;
            (Grain::new(z.frames.row_block(start, p.grain_size).to_vec()), start)
        })
        .collect())
}

/// One encoded corpus item.
#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub source_id: String,
    pub augmentation_tag: String,
    pub latents: LatentSequence,
}

impl CorpusEntry {
    pub fn new(source_id: impl Into<String>, latents: LatentSequence) -> Self {
        Self {
            source_id: source_id.into(),
            augmentation_tag: String::new(),
            latents,
        }
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.augmentation_tag = tag.into();
        self
    }
}

/// Per-source grain tally, in order of first appearance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SourceCount {
    pub source_id: String,
    pub augmentation_tag: String,
    pub grains: usize,
}

/// Immutable after construction; share freely across matcher threads.
#[derive(Debug, Clone, PartialEq)]
pub struct GrainCodebook {
    grains: Matrix,
    norms: Vec<f64>,
    provenance: Vec<Provenance>,
    params: GrainParams,
    latent_dim: usize,
    frame_rate: f64,
    codec_id: String,
    skipped_sources: usize,
}

impl GrainCodebook {
    /// Assembles a codebook from already-flattened grains (one per row).
    pub fn from_parts(
        grains: Matrix,
        provenance: Vec<Provenance>,
        params: GrainParams,
        latent_dim: usize,
        frame_rate: f64,
        codec_id: impl Into<String>,
    ) -> Result<Self> {
        if grains.rows() == 0 {
            return Err(Error::NoGrains { skipped: 0 });
        }
        if grains.cols() != params.grain_size * latent_dim {
            return Err(Error::DimensionMismatch {
                expected: params.grain_size * latent_dim,
                found: grains.cols(),
            });
        }
        if provenance.len() != grains.rows() {
            return Err(Error::DimensionMismatch {
                expected: grains.rows(),
                found: provenance.len(),
            });
        }
        let norms = grains.iter_rows().map(l2_norm).collect();
        Ok(Self {
            grains,
            norms,
            provenance,
            params,
            latent_dim,
            frame_rate,
            codec_id: codec_id.into(),
            skipped_sources: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.grains.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.grains.rows() == 0
    }

    /// Flattened grain width, g·D.
    pub fn grain_dim(&self) -> usize {
        self.grains.cols()
    }

    pub fn grain(&self, i: usize) -> &[f32] {
        self.grains.row(i)
    }

    pub fn norm(&self, i: usize) -> f64 {
        self.norms[i]
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn grains(&self) -> &Matrix {
        &self.grains
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn params(&self) -> GrainParams {
        self.params
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn codec_id(&self) -> &str {
        &self.codec_id
    }

    /// Corpus sources that were shorter than one grain and contributed nothing.
    pub fn skipped_sources(&self) -> usize {
        self.skipped_sources
    }

    pub fn source_counts(&self) -> Vec<SourceCount> {
        let mut out: Vec<SourceCount> = Vec::new();
        for p in &self.provenance {
            match out
                .iter_mut()
                .find(|c| c.source_id == p.source_id && c.augmentation_tag == p.augmentation_tag)
            {
                Some(c) => c.grains += 1,
                None => out.push(SourceCount {
                    source_id: p.source_id.clone(),
                    augmentation_tag: p.augmentation_tag.clone(),
                    grains: 1,
                }),
            }
        }
        out
    }

    fn check_compatible(&self, other: &GrainCodebook) -> Result<()> {
        let incompatible = |what: String| Err(Error::IncompatibleCodebooks(what));
        if self.params != other.params {
            return incompatible(format!("grain params {:?} vs {:?}", self.params, other.params));
        }
        if self.latent_dim != other.latent_dim {
            return incompatible(format!("latent dim {} vs {}", self.latent_dim, other.latent_dim));
        }
        if self.frame_rate != other.frame_rate {
            return incompatible(format!("frame rate {} vs {}", self.frame_rate, other.frame_rate));
        }
        if self.codec_id != other.codec_id {
            return incompatible(format!("codec {:?} vs {:?}", self.codec_id, other.codec_id));
        }
        Ok(())
    }
}

/// Segments every corpus entry in order and concatenates the grains.
/// Entries shorter than one grain are skipped and counted.
pub fn build_codebook(corpus: &[CorpusEntry], p: GrainParams) -> Result<GrainCodebook> {
    let first = corpus.first().ok_or(Error::EmptyCorpus)?;
    let d = first.latents.dim();
    let frame_rate = first.latents.frame_rate;
    let codec_id = &first.latents.codec_id;
    for e in corpus {
        let z = &e.latents;
        if z.dim() != d {
            return Err(Error::InconsistentLatents(format!(
                "{}: latent dim {} differs from {}",
                e.source_id,
                z.dim(),
                d
            )));
        }
        if z.frame_rate != frame_rate {
            return Err(Error::InconsistentLatents(format!(
                "{}: frame rate {} differs from {}",
                e.source_id, z.frame_rate, frame_rate
            )));
        }
        if &z.codec_id != codec_id {
            return Err(Error::InconsistentLatents(format!(
                "{}: codec {:?} differs from {:?}",
                e.source_id, z.codec_id, codec_id
            )));
        }
    }

    let mut grains = Matrix::with_cols(p.grain_size * d);
    let mut provenance = Vec::new();
    let mut skipped = 0;
    for e in corpus {
        match extract_grains(&e.latents, p) {
            Ok(list) => {
                for (grain, start) in list {
                    grains.push_row(grain.vector())?;
                    provenance.push(Provenance {
                        source_id: e.source_id.clone(),
                        start_frame: start,
                        augmentation_tag: e.augmentation_tag.clone(),
                    });
                }
            }
            Err(Error::SequenceTooShort { .. }) => skipped += 1,
            Err(other) => return Err(other),
        }
    }
    if grains.rows() == 0 {
        return Err(Error::NoGrains { skipped });
    }
    let mut cb = GrainCodebook::from_parts(grains, provenance, p, d, frame_rate, codec_id.clone())?;
    cb.skipped_sources = skipped;
    Ok(cb)
}

/// Rows of `a` followed by rows of `b`.
pub fn merge_codebooks(a: &GrainCodebook, b: &GrainCodebook) -> Result<GrainCodebook> {
    a.check_compatible(b)?;
    let mut grains = a.grains.clone();
    grains.append(&b.grains)?;
    let mut norms = a.norms.clone();
    norms.extend_from_slice(&b.norms);
    let mut provenance = a.provenance.clone();
    provenance.extend_from_slice(&b.provenance);
    Ok(GrainCodebook {
        grains,
        norms,
        provenance,
        params: a.params,
        latent_dim: a.latent_dim,
        frame_rate: a.frame_rate,
        codec_id: a.codec_id.clone(),
        skipped_sources: a.skipped_sources + b.skipped_sources,
    })
}

/// One scaled copy of `a` per gain, tagged `gain={value}`. Not clamped.
pub fn gain_augment(a: &AudioBuffer, gains: &[f32]) -> Result<Vec<(AudioBuffer, String)>> {
    if gains.is_empty() {
        return Err(Error::EmptyGainList);
    }
    if let Some(&g) = gains.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
        return Err(Error::NonPositiveGain(g));
    }
    Ok(gains
        .iter()
        .map(|&g| {
            let samples = a.samples.iter().map(|&s| s * g).collect();
            let buf = AudioBuffer {
                samples,
                sample_rate: a.sample_rate,
            };
            (buf, gain_tag(g))
        })
        .collect())
}

pub fn gain_tag(gain: f32) -> String {
    format!("gain={gain:?}")
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CodebookHeader {
    pub grain_size: usize,
    pub stride: usize,
    pub latent_dim: usize,
    pub count: usize,
    pub frame_rate: f64,
    pub codec_id: String,
    #[serde(default)]
    pub skipped_sources: usize,
    pub provenance: Vec<Provenance>,
}

/// Serializes to the `.lgcb` layout: magic, u32 version, u32 header length,
/// JSON header, little-endian f32 grain payload, CRC32 of the payload.
pub fn write_codebook_to<W: Write>(mut w: W, cb: &GrainCodebook) -> Result<()> {
    let header = CodebookHeader {
        grain_size: cb.params.grain_size,
        stride: cb.params.stride,
        latent_dim: cb.latent_dim,
        count: cb.len(),
        frame_rate: cb.frame_rate,
        codec_id: cb.codec_id.clone(),
        skipped_sources: cb.skipped_sources,
        provenance: cb.provenance.clone(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut payload = Vec::with_capacity(cb.grains.data().len() * 4);
    for v in cb.grains.data() {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&CODEBOOK_MAGIC)?;
    w.write_all(&CODEBOOK_VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(&json)?;
    w.write_all(&payload)?;
    w.write_all(&crc32fast::hash(&payload).to_le_bytes())?;
    Ok(())
}

pub fn save_codebook(path: impl AsRef<Path>, cb: &GrainCodebook) -> Result<()> {
    write_atomically(path.as_ref(), |w| write_codebook_to(w, cb))
}

pub fn load_codebook(path: impl AsRef<Path>) -> Result<GrainCodebook> {
    let bytes = std::fs::read(path)?;
    parse_codebook(&bytes)
}

/// Reads only the JSON header of a codebook image (no payload validation).
pub fn parse_codebook_header(bytes: &[u8]) -> Result<CodebookHeader> {
    Ok(split_codebook(bytes)?.0)
}

fn split_codebook(bytes: &[u8]) -> Result<(CodebookHeader, &[u8])> {
    if bytes.len() < 4 || bytes[..4] != CODEBOOK_MAGIC {
        return Err(Error::BadMagic);
    }
    let word = |at: usize| -> Result<u32> {
        bytes
            .get(at..at + 4)
            .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .ok_or(Error::TruncatedData {
                expected: at + 4,
                found: bytes.len(),
            })
    };
    let version = word(4)?;
    if version != CODEBOOK_VERSION {
        return Err(Error::VersionUnsupported(version));
    }
    let header_len = word(8)? as usize;
    let body = &bytes[12..];
    if body.len() < header_len {
        return Err(Error::TruncatedData {
            expected: 12 + header_len,
            found: bytes.len(),
        });
    }
    let header: CodebookHeader = serde_json::from_slice(&body[..header_len])
        .map_err(|e| Error::MalformedHeader(format!("codebook header: {e}")))?;
    Ok((header, &body[header_len..]))
}

pub fn parse_codebook(bytes: &[u8]) -> Result<GrainCodebook> {
    let (header, rest) = split_codebook(bytes)?;
    let params = GrainParams::new(header.grain_size, header.stride)
        .map_err(|_| Error::MalformedHeader("grain size and stride must be >= 1".into()))?;
    if header.latent_dim == 0 || header.count == 0 {
        return Err(Error::MalformedHeader("codebook header describes no grains".into()));
    }
    if header.provenance.len() != header.count {
        return Err(Error::MalformedHeader(format!(
            "{} provenance entries for {} grains",
            header.provenance.len(),
            header.count
        )));
    }
    let width = header.grain_size * header.latent_dim;
    let payload_len = header
        .count
        .checked_mul(width)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::MalformedHeader("grain payload size overflows".into()))?;
    if rest.len() < payload_len + 4 {
        return Err(Error::TruncatedData {
            expected: payload_len + 4,
            found: rest.len(),
        });
    }
    if rest.len() > payload_len + 4 {
        return Err(Error::MalformedHeader("trailing bytes after checksum".into()));
    }
    let (payload, crc) = rest.split_at(payload_len);
    let stored = u32::from_le_bytes([crc[0], crc[1], crc[2], crc[3]]);
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(Error::ChecksumMismatch { stored, computed });
    }
    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    let grains = Matrix::new(header.count, width, data)?;
    if let Some(i) = grains.first_non_finite() {
        return Err(Error::NonFinite(i));
    }
    let mut cb = GrainCodebook::from_parts(
        grains,
        header.provenance,
        params,
        header.latent_dim,
        header.frame_rate,
        header.codec_id,
    )?;
    cb.skipped_sources = header.skipped_sources;
    Ok(cb)
}
