//! End-to-end resynthesis: encode the target, tile it into non-overlapping
//! grains, match each one against the codebook, concatenate the chosen
//! grains and decode. Grain boundaries are left to the decoder's overlap-add;
//! nothing is crossfaded here.
//!
//! The streaming form emits each grain as soon as its last frame arrives.
//! Because every match is keyed only by its grain index, streamed output is
//! bit-identical to the batch output for any chunking of the input.

use serde::{Deserialize, Serialize};

use crate::codebook::{Grain, GrainCodebook, GrainParams};
use crate::codec::{Codec, LatentSequence};
use crate::error::{Error, Result};
use crate::matcher::{match_all, sample_grain, GrainSelection, MatchParams};
use crate::tensor_io::{AudioBuffer, Matrix};

/// What to do with the last `T mod g` target frames.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailPolicy {
    /// Zero-pad to a full grain, match, keep only the real frames' worth.
    #[default]
    Pad,
    /// Drop the partial grain.
    Truncate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResynthConfig {
    pub grain: GrainParams,
    pub matching: MatchParams,
    pub tail: TailPolicy,
}

impl ResynthConfig {
    /// Mirrors the codebook's grain parameters.
    pub fn for_codebook(cb: &GrainCodebook, matching: MatchParams, tail: TailPolicy) -> Self {
        Self {
            grain: cb.params(),
            matching,
            tail,
        }
    }

    fn check(&self, cb: &GrainCodebook) -> Result<()> {
        if self.grain != cb.params() {
            return Err(Error::GrainParamsMismatch {
                target: self.grain,
                codebook: cb.params(),
            });
        }
        self.matching.validate(cb.len())
    }
}

/// One line of the selections trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub grain_index: usize,
    pub codebook_index: usize,
    pub distance: f64,
    pub probability: f64,
    pub source_id: String,
    pub start_frame: usize,
}

pub fn trace_entries(selections: &[GrainSelection], cb: &GrainCodebook) -> Vec<TraceEntry> {
    selections
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let p = &cb.provenance()[s.codebook_index];
            TraceEntry {
                grain_index: i,
                codebook_index: s.codebook_index,
                distance: s.distance,
                probability: s.probability,
                source_id: p.source_id.clone(),
                start_frame: p.start_frame,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resynthesis {
    pub latents: LatentSequence,
    pub selections: Vec<GrainSelection>,
}

impl Resynthesis {
    pub fn trace(&self, cb: &GrainCodebook) -> Vec<TraceEntry> {
        trace_entries(&self.selections, cb)
    }
}

fn check_target(target: &LatentSequence, cb: &GrainCodebook) -> Result<()> {
    if target.codec_id != cb.codec_id() {
        return Err(Error::CodecMismatch {
            expected: cb.codec_id().to_string(),
            found: target.codec_id.clone(),
        });
    }
    if target.dim() != cb.latent_dim() {
        return Err(Error::DimensionMismatch {
            expected: cb.latent_dim(),
            found: target.dim(),
        });
    }
    Ok(())
}

/// Zero-pads `frames` (fewer than g rows' worth of data) up to a full grain.
fn padded_grain(partial: &[f32], grain_dim: usize) -> Grain {
    let mut v = partial.to_vec();
    v.resize(grain_dim, 0.0);
    Grain::new(v)
}

/// Matches every grain of `target` and returns the concatenated selection.
pub fn resynthesize_latent(target: &LatentSequence, cb: &GrainCodebook, cfg: &ResynthConfig) -> Result<Resynthesis> {
    check_target(target, cb)?;
    cfg.check(cb)?;
    let g = cfg.grain.grain_size;
    let d = cb.latent_dim();
    let t = target.len();
    let full = t / g;
    let tail = t % g;
    if cfg.tail == TailPolicy::Truncate && full == 0 {
        return Err(Error::TargetTooShort {
            frames: t,
            grain_size: g,
        });
    }

    let mut grains: Vec<Grain> = (0..full)
        .map(|i| Grain::new(target.frames.row_block(i * g, g).to_vec()))
        .collect();
    let pad_tail = cfg.tail == TailPolicy::Pad && tail > 0;
    if pad_tail {
        grains.push(padded_grain(target.frames.row_block(full * g, tail), g * d));
    }

    let selections = match_all(&grains, cb, &cfg.matching, 0)?;

    let mut out = Matrix::with_cols(d);
    for (i, s) in selections.iter().enumerate() {
        let rows = if pad_tail && i == full { tail } else { g };
        let chosen = &cb.grain(s.codebook_index)[..rows * d];
        out.append(&Matrix::new(rows, d, chosen.to_vec())?)?;
    }
    Ok(Resynthesis {
        latents: LatentSequence::new(out, target.frame_rate, target.codec_id.clone())?,
        selections,
    })
}

/// Frames and selections produced by one streaming step.
#[derive(Debug, Clone, PartialEq)]
pub struct Emission {
    pub frames: Matrix,
    pub selections: Vec<GrainSelection>,
}

impl Emission {
    fn empty(d: usize) -> Self {
        Self {
            frames: Matrix::with_cols(d),
            selections: Vec::new(),
        }
    }
}

/// Incremental resynthesis over a shared codebook. Holds fewer than `g`
/// pending frames between pushes.
pub struct StreamState<'a> {
    cb: &'a GrainCodebook,
    cfg: ResynthConfig,
    pending: Vec<f32>,
    next_grain: usize,
}

impl<'a> StreamState<'a> {
    pub fn new(cb: &'a GrainCodebook, cfg: ResynthConfig) -> Result<Self> {
        cfg.check(cb)?;
        Ok(Self {
            cb,
            cfg,
            pending: Vec::with_capacity(cfg.grain.grain_size * cb.latent_dim()),
            next_grain: 0,
        })
    }

    pub fn pending_frames(&self) -> usize {
        self.pending.len() / self.cb.latent_dim()
    }

    /// Index the next emitted grain will carry.
    pub fn next_grain_index(&self) -> usize {
        self.next_grain
    }

    fn emit(&mut self, grain: Grain, keep_rows: usize, out: &mut Emission) -> Result<()> {
        let d = self.cb.latent_dim();
        let sel = sample_grain(&grain, self.cb, &self.cfg.matching, self.next_grain)?;
        self.next_grain += 1;
        let chosen = &self.cb.grain(sel.codebook_index)[..keep_rows * d];
        out.frames.append(&Matrix::new(keep_rows, d, chosen.to_vec())?)?;
        out.selections.push(sel);
        Ok(())
    }

    /// Buffers `frames` and emits every grain that became complete.
    pub fn push(&mut self, frames: &Matrix) -> Result<Emission> {
        let d = self.cb.latent_dim();
        if frames.cols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: frames.cols(),
            });
        }
        let grain_dim = self.cfg.grain.grain_size * d;
        let mut out = Emission::empty(d);
        for row in frames.iter_rows() {
            self.pending.extend_from_slice(row);
            if self.pending.len() == grain_dim {
                let grain = Grain::new(std::mem::take(&mut self.pending));
                self.pending.reserve(grain_dim);
                self.emit(grain, self.cfg.grain.grain_size, &mut out)?;
            }
        }
        Ok(out)
    }

    /// Applies the tail policy to whatever is still pending.
    pub fn flush(mut self) -> Result<Emission> {
        let d = self.cb.latent_dim();
        let mut out = Emission::empty(d);
        let rows = self.pending_frames();
        if rows == 0 || self.cfg.tail == TailPolicy::Truncate {
            return Ok(out);
        }
        let grain = padded_grain(&self.pending, self.cfg.grain.grain_size * d);
        self.pending.clear();
        self.emit(grain, rows, &mut out)?;
        Ok(out)
    }
}

/// Encode, resynthesize in latent space, decode. The decoded audio is
/// trimmed to the target's length when the decoder overshoots it.
pub fn resynthesize_audio(
    target: &AudioBuffer,
    cb: &GrainCodebook,
    cfg: &ResynthConfig,
    codec: &dyn Codec,
) -> Result<(AudioBuffer, Resynthesis)> {
    if codec.codec_id() != cb.codec_id() {
        return Err(Error::CodecMismatch {
            expected: cb.codec_id().to_string(),
            found: codec.codec_id().to_string(),
        });
    }
    let z = codec.encode(target)?;
    let r = resynthesize_latent(&z, cb, cfg)?;
    let mut audio = codec.decode(&r.latents)?;
    audio.samples.truncate(target.len());
    Ok((audio, r))
}
