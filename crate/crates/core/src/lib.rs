//! Latent granular resynthesis.
//!
//! A source corpus is encoded into latent frames and cut into grains to form
//! a [`GrainCodebook`]. A target is encoded the same way, each of its grains
//! is matched to a codebook grain by cosine distance (greedily or by
//! temperature-controlled sampling), and the chosen grains are concatenated
//! and decoded back to audio.
//!
//! The crate ships a deterministic [`ReferenceCodec`] so the whole chain runs
//! without a neural model; any other codec plugs in through the [`Codec`]
//! trait or through npy latent files.

pub mod codebook;
pub mod codec;
pub mod error;
pub mod latent;
pub mod matcher;
pub mod pipeline;
pub mod tensor_io;

pub use codebook::{
    build_codebook, extract_grains, gain_augment, load_codebook, merge_codebooks, save_codebook, CorpusEntry,
    Grain, GrainCodebook, GrainParams, Provenance,
};
pub use codec::{Codec, CodecConfig, LatentSequence, ReferenceCodec};
pub use error::{Error, Result};
pub use latent::LatentMeta;
pub use matcher::{cosine_distance, match_distribution, match_greedy, sample_grain, GrainSelection, MatchParams};
pub use pipeline::{
    resynthesize_audio, resynthesize_latent, Emission, ResynthConfig, Resynthesis, StreamState, TailPolicy,
    TraceEntry,
};
pub use tensor_io::{read_npy, read_wav, write_npy, write_wav, AudioBuffer, Matrix, WavEncoding};
