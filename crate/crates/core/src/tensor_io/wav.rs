use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::write_atomically;
use crate::error::{Error, Result};

/// Mono audio in the nominal range [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidConfig("sample rate must be positive".into()));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

/// Reads a 16-bit PCM or 32-bit float WAV file, downmixing to mono by the
/// arithmetic mean of the channels.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let file = File::open(path)?;
    let reader = hound::WavReader::new(BufReader::new(file)).map_err(map_hound)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::MalformedRiff("zero channels".into()));
    }

    let interleaved: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f32 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(map_hound)?,
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .collect::<std::result::Result<_, _>>()
            .map_err(map_hound)?,
        (fmt, bits) => {
            return Err(Error::UnsupportedEncoding(format!(
                "{bits}-bit {fmt:?} samples"
            )))
        }
    };

    AudioBuffer::new(downmix(&interleaved, channels), spec.sample_rate)
}

/// Mean of each interleaved frame. Mono input is returned unchanged.
pub(crate) fn downmix(interleaved: &[f32], channels: usize) -> Vec<f32> {
    if channels == 1 {
        return interleaved.to_vec();
    }
    interleaved
        .chunks_exact(channels)
        .map(|frame| (frame.iter().map(|&v| v as f64).sum::<f64>() / channels as f64) as f32)
        .collect()
}

/// Quantizes one sample to 16-bit PCM: clamp to [-1, 1 - 2^-15], then round
/// half away from zero.
pub(crate) fn quantize_pcm16(x: f32) -> i16 {
    const MAX: f64 = 1.0 - 1.0 / 32768.0;
    ((x as f64).clamp(-1.0, MAX) * 32768.0).round() as i16
}

/// Writes a mono WAV at the buffer's sample rate: format tag 1 with a
/// 16-byte `fmt ` chunk for PCM16, or format tag 3 with an 18-byte `fmt `
/// chunk and a `fact` chunk for float32.
pub fn write_wav(path: impl AsRef<Path>, audio: &AudioBuffer, encoding: WavEncoding) -> Result<()> {
    if audio.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    let bytes = encode_wav(audio, encoding)?;
    write_atomically(path.as_ref(), |w| Ok(w.write_all(&bytes)?))
}

fn encode_wav(audio: &AudioBuffer, encoding: WavEncoding) -> Result<Vec<u8>> {
    let n = audio.samples.len();
    let (tag, width, fmt_len, fact) = match encoding {
        WavEncoding::Pcm16 => (1u16, 2usize, 16u32, false),
        WavEncoding::Float32 => (3u16, 4usize, 18u32, true),
    };
    let data_len = n * width;
    let riff_len = 4 + (8 + fmt_len as usize) + if fact { 12 } else { 0 } + 8 + data_len;
    let too_big = || Error::UnsupportedEncoding("audio too long for a RIFF file".into());
    let riff_len = u32::try_from(riff_len).map_err(|_| too_big())?;

    let mut out = Vec::with_capacity(riff_len as usize + 8);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&riff_len.to_le_bytes());
    out.extend_from_slice(b"WAVE");

    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&fmt_len.to_le_bytes());
    out.extend_from_slice(&tag.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&audio.sample_rate.to_le_bytes());
    out.extend_from_slice(&(audio.sample_rate * width as u32).to_le_bytes());
    out.extend_from_slice(&(width as u16).to_le_bytes());
    out.extend_from_slice(&(width as u16 * 8).to_le_bytes());
    if fmt_len == 18 {
        out.extend_from_slice(&0u16.to_le_bytes());
    }
    if fact {
        out.extend_from_slice(b"fact");
        out.extend_from_slice(&4u32.to_le_bytes());
        out.extend_from_slice(&(u32::try_from(n).map_err(|_| too_big())?).to_le_bytes());
    }

    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    match encoding {
        WavEncoding::Pcm16 => {
            for &s in &audio.samples {
                out.extend_from_slice(&quantize_pcm16(s).to_le_bytes());
            }
        }
        WavEncoding::Float32 => {
            for &s in &audio.samples {
                out.extend_from_slice(&s.to_le_bytes());
            }
        }
    }
    Ok(out)
}

fn map_hound(e: hound::Error) -> Error {
    match e {
        // the file is already open, so any read failure means bad contents
        hound::Error::IoError(io) => Error::MalformedRiff(io.to_string()),
        hound::Error::FormatError(msg) => Error::MalformedRiff(msg.to_string()),
        hound::Error::Unsupported => Error::UnsupportedEncoding("unsupported wav format".into()),
        other => Error::MalformedRiff(other.to_string()),
    }
}
