//! Codec abstraction and the reference transform codec.
//!
//! The reference codec frames the signal with a periodic Hann window, applies
//! an orthonormal DCT-II per frame and keeps the first `kept_dims`
//! coefficients as the latent frame. Decoding zero-fills the dropped
//! coefficients, inverts the transform and overlap-adds with the same window,
//! normalizing by the accumulated squared window. With `kept_dims ==
//! frame_size` the round trip is exact up to float rounding; with fewer
//! dimensions it behaves like a lossy bottleneck whose overlap-add smooths
//! across frame (and therefore grain) boundaries.

use std::f64::consts::PI;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor_io::{AudioBuffer, Matrix};

/// Squared-window sums below this are treated as uncovered and decode to 0.
const MIN_WINDOW_SUM: f64 = 1e-8;

const REFERENCE_PREFIX: &str = "ref-dct";

/// A T×D sequence of latent frames tagged with the codec that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSequence {
    pub frames: Matrix,
    pub frame_rate: f64,
    pub codec_id: String,
}

impl LatentSequence {
    pub fn new(frames: Matrix, frame_rate: f64, codec_id: impl Into<String>) -> Result<Self> {
        let codec_id = codec_id.into();
        if frames.is_empty() {
            return Err(Error::EmptyMatrix);
        }
        if !(frame_rate.is_finite() && frame_rate > 0.0) {
            return Err(Error::InvalidConfig(format!("frame rate must be positive, got {frame_rate}")));
        }
        if codec_id.is_empty() {
            return Err(Error::InvalidConfig("codec id must not be empty".into()));
        }
        if let Some(i) = frames.first_non_finite() {
            return Err(Error::NonFinite(i));
        }
        Ok(Self {
            frames,
            frame_rate,
            codec_id,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.frames.cols()
    }
}

/// Anything that maps audio to latent frames and back.
pub trait Codec {
    fn codec_id(&self) -> &str;
    fn encode(&self, audio: &AudioBuffer) -> Result<LatentSequence>;
    fn decode(&self, latents: &LatentSequence) -> Result<AudioBuffer>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodecConfig {
    pub frame_size: usize,
    pub hop: usize,
    pub kept_dims: usize,
    pub sample_rate: u32,
}

impl CodecConfig {
    pub const DEFAULT_FRAME_SIZE: usize = 512;
    pub const DEFAULT_KEPT_DIMS: usize = 64;

    pub fn new(frame_size: usize, hop: usize, kept_dims: usize, sample_rate: u32) -> Result<Self> {
        let cfg = Self {
            frame_size,
            hop,
            kept_dims,
            sample_rate,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// F = 512, H = F/2, D = 64.
    pub fn with_sample_rate(sample_rate: u32) -> Result<Self> {
        Self::new(
            Self::DEFAULT_FRAME_SIZE,
            Self::DEFAULT_FRAME_SIZE / 2,
            Self::DEFAULT_KEPT_DIMS,
            sample_rate,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !self.frame_size.is_power_of_two() {
            return bad(format!("frame size {} is not a power of two", self.frame_size));
        }
        if self.hop == 0 || !self.frame_size.is_multiple_of(self.hop) {
            return bad(format!("hop {} does not divide frame size {}", self.hop, self.frame_size));
        }
        if self.kept_dims == 0 || self.kept_dims > self.frame_size {
            return bad(format!(
                "kept dims {} outside 1..={}",
                self.kept_dims, self.frame_size
            ));
        }
        if self.sample_rate == 0 {
            return bad("sample rate must be positive".into());
        }
        Ok(())
    }

    pub fn frame_rate(&self) -> f64 {
        self.sample_rate as f64 / self.hop as f64
    }

    /// Number of frames for a signal of `len` samples: ceil(max(len - F, 0) / H) + 1.
    pub fn frame_count(&self, len: usize) -> usize {
        len.saturating_sub(self.frame_size).div_ceil(self.hop) + 1
    }

    /// Length of decoded audio for `frames` latent frames.
    pub fn decoded_len(&self, frames: usize) -> usize {
        frames.saturating_sub(1) * self.hop + self.frame_size
    }

    pub fn codec_id(&self) -> String {
        self.to_string()
    }

    /// Parses a `ref-dct/F{F}/H{H}/D{D}/sr{rate}` tag.
    pub fn from_codec_id(id: &str) -> Result<Self> {
        let mismatch = || Error::CodecMismatch {
            expected: format!("{REFERENCE_PREFIX}/F../H../D../sr.."),
            found: id.to_string(),
        };
        let mut parts = id.split('/');
        if parts.next() != Some(REFERENCE_PREFIX) {
            return Err(mismatch());
        }
        let mut field = |prefix: &str| -> Result<u64> {
            parts
                .next()
                .and_then(|p| p.strip_prefix(prefix))
                .and_then(|v| v.parse().ok())
                .ok_or_else(mismatch)
        };
        let f = field("F")? as usize;
        let h = field("H")? as usize;
        let d = field("D")? as usize;
        let sr = u32::try_from(field("sr")?).map_err(|_| mismatch())?;
        if parts.next().is_some() {
            return Err(mismatch());
        }
        Self::new(f, h, d, sr)
    }
}

impl fmt::Display for CodecConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{REFERENCE_PREFIX}/F{}/H{}/D{}/sr{}",
            self.frame_size, self.hop, self.kept_dims, self.sample_rate
        )
    }
}

/// Periodic Hann window of length `n`.
pub fn periodic_hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

pub struct ReferenceCodec {
    cfg: CodecConfig,
    id: String,
    window: Vec<f64>,
    /// Row k holds the k-th orthonormal DCT-II basis vector, for k < kept_dims.
    basis: Vec<f64>,
}

impl ReferenceCodec {
    pub fn new(cfg: CodecConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.frame_size;
        let mut basis = Vec::with_capacity(cfg.kept_dims * n);
        for k in 0..cfg.kept_dims {
            let scale = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
            // reduce the phase index mod 4N before scaling to keep the angle small
            basis.extend((0..n).map(|i| {
                let phase = ((2 * i + 1) * k) % (4 * n);
                scale * (PI * phase as f64 / (2 * n) as f64).cos()
            }));
        }
        Ok(Self {
            id: cfg.codec_id(),
            window: periodic_hann(n),
            basis,
            cfg,
        })
    }

    pub fn config(&self) -> &CodecConfig {
        &self.cfg
    }

    fn analyze_frame(&self, frame: &[f64], out: &mut [f32]) {
        let n = self.cfg.frame_size;
        for (k, coef) in out.iter_mut().enumerate() {
            let row = &self.basis[k * n..(k + 1) * n];
            *coef = row.iter().zip(frame).map(|(b, x)| b * x).sum::<f64>() as f32;
        }
    }

    fn synthesize_frame(&self, coefs: &[f32]) -> Vec<f64> {
        let n = self.cfg.frame_size;
        let mut out = vec![0.0f64; n];
        for (k, &c) in coefs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let row = &self.basis[k * n..(k + 1) * n];
            let c = c as f64;
            for (o, b) in out.iter_mut().zip(row) {
                *o += c * b;
            }
        }
        for (o, w) in out.iter_mut().zip(&self.window) {
            *o *= w;
        }
        out
    }
}

impl Codec for ReferenceCodec {
    fn codec_id(&self) -> &str {
        &self.id
    }

    fn encode(&self, audio: &AudioBuffer) -> Result<LatentSequence> {
        if audio.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        if audio.sample_rate != self.cfg.sample_rate {
            return Err(Error::SampleRateMismatch {
                expected: self.cfg.sample_rate,
                found: audio.sample_rate,
            });
        }
        let CodecConfig {
            frame_size: n,
            hop,
            kept_dims: d,
            ..
        } = self.cfg;
        let t = self.cfg.frame_count(audio.len());

        let mut data = vec![0.0f32; t * d];
        data.par_chunks_mut(d).enumerate().for_each(|(idx, out)| {
            let start = idx * hop;
            let frame: Vec<f64> = (0..n)
                .map(|i| {
                    let x = audio.samples.get(start + i).copied().unwrap_or(0.0);
                    x as f64 * self.window[i]
                })
                .collect();
            self.analyze_frame(&frame, out);
        });

        LatentSequence::new(Matrix::new(t, d, data)?, self.cfg.frame_rate(), self.id.clone())
    }

    fn decode(&self, latents: &LatentSequence) -> Result<AudioBuffer> {
        if latents.codec_id != self.id {
            return Err(Error::CodecMismatch {
                expected: self.id.clone(),
                found: latents.codec_id.clone(),
            });
        }
        if latents.dim() != self.cfg.kept_dims {
            return Err(Error::DimensionMismatch {
                expected: self.cfg.kept_dims,
                found: latents.dim(),
            });
        }
        let n = self.cfg.frame_size;
        let hop = self.cfg.hop;
        let t = latents.len();
        let len = self.cfg.decoded_len(t);

        let frames: Vec<Vec<f64>> = (0..t)
            .into_par_iter()
            .map(|i| self.synthesize_frame(latents.frames.row(i)))
            .collect();

        let mut acc = vec![0.0f64; len];
        let mut weight = vec![0.0f64; len];
        for (i, frame) in frames.iter().enumerate() {
            let start = i * hop;
            for j in 0..n {
                acc[start + j] += frame[j];
                weight[start + j] += self.window[j] * self.window[j];
            }
        }
        let samples = acc
            .iter()
            .zip(&weight)
            .map(|(&a, &w)| if w < MIN_WINDOW_SUM { 0.0 } else { (a / w) as f32 })
            .collect();
        AudioBuffer::new(samples, self.cfg.sample_rate)
    }
}
