use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the engine can report.
///
/// Variants are grouped loosely by the subsystem that raises them; callers
/// that need to distinguish usage mistakes from bad data (the CLI does) can
/// match on them directly.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o failure: {0}")]
    IoFailure(#[from] io::Error),

    // npy
    #[error("malformed npy header: {0}")]
    MalformedHeader(String),
    #[error("unsupported npy dtype {0:?} (only little-endian float32 '<f4' is accepted)")]
    UnsupportedDtype(String),
    #[error("unsupported array rank {0} (exactly 2 dimensions required)")]
    UnsupportedRank(usize),
    #[error("truncated data: expected {expected} bytes, found {found}")]
    TruncatedData { expected: usize, found: usize },
    #[error("matrix is empty")]
    EmptyMatrix,
    #[error("non-finite value at flat index {0}")]
    NonFinite(usize),

    // wav
    #[error("unsupported wav encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("malformed RIFF/WAVE data: {0}")]
    MalformedRiff(String),
    #[error("audio buffer is empty")]
    EmptyBuffer,

    // codec
    #[error("invalid codec configuration: {0}")]
    InvalidConfig(String),
    #[error("sample rate mismatch: audio is {found} Hz, codec expects {expected} Hz")]
    SampleRateMismatch { expected: u32, found: u32 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("codec mismatch: expected {expected:?}, found {found:?}")]
    CodecMismatch { expected: String, found: String },

    // codebook
    #[error("latent sequence too short: {frames} frames, grain size {grain_size}")]
    SequenceTooShort { frames: usize, grain_size: usize },
    #[error("invalid grain parameters: grain size and stride must both be >= 1")]
    InvalidGrainParams,
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("inconsistent latents in corpus: {0}")]
    InconsistentLatents(String),
    #[error("no grains could be extracted from the corpus ({skipped} sources shorter than one grain)")]
    NoGrains { skipped: usize },
    #[error("incompatible codebooks: {0}")]
    IncompatibleCodebooks(String),
    #[error("gain list is empty")]
    EmptyGainList,
    #[error("gain must be positive and finite, got {0}")]
    NonPositiveGain(f32),
    #[error("bad magic: not a codebook file")]
    BadMagic,
    #[error("unsupported codebook version {0}")]
    VersionUnsupported(u32),
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },

    // matcher
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("temperature must be positive for sampling, got {0}")]
    NonPositiveTemperature(f64),
    #[error("invalid match parameters: {0}")]
    InvalidMatchParams(String),

    // pipeline
    #[error("target too short: {frames} frames cannot fill one grain of {grain_size} under truncate")]
    TargetTooShort { frames: usize, grain_size: usize },
    #[error("grain parameters {target:?} do not match the codebook's {codebook:?}")]
    GrainParamsMismatch {
        target: crate::codebook::GrainParams,
        codebook: crate::codebook::GrainParams,
    },
}
