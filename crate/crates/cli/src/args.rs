use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use latgran_core::{TailPolicy, WavEncoding};

#[derive(Debug, Parser)]
#[command(name = "latgran", version, about = "Latent granular resynthesis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Encode a source corpus and cut it into a grain codebook.
    BuildCodebook(BuildArgs),
    /// Rebuild a target from codebook grains.
    Resynth(ResynthArgs),
    /// Encode a WAV file to npy latents with the reference codec.
    Encode(EncodeArgs),
    /// Decode npy latents to a WAV file with the reference codec.
    Decode(DecodeArgs),
    /// Print the metadata of a codebook or npy file as JSON.
    Inspect(InspectArgs),
}

/// Reference codec settings. All optional so each command can fill its own defaults.
#[derive(Debug, Clone, Args)]
pub struct CodecArgs {
    /// Analysis frame size in samples [default: 512]
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub frame_size: Option<u64>,
    /// Hop size in samples [default: frame size / 2]
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub hop: Option<u64>,
    /// Number of DCT coefficients kept per frame [default: 64]
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub dims: Option<u64>,
    /// Expected sample rate of the audio [default: taken from the input]
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub sample_rate: Option<u32>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("corpus").required(true).args(["input", "latent_input"])))]
pub struct BuildArgs {
    /// WAV files or directories of WAV files
    #[arg(long, num_args = 1..)]
    pub input: Vec<PathBuf>,
    /// Pre-encoded npy latents, each with a sidecar JSON next to it
    #[arg(long, num_args = 1.., conflicts_with_all = ["input", "gain_aug"])]
    pub latent_input: Vec<PathBuf>,
    /// Frames per grain
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub grain_size: u64,
    /// Frames between consecutive grain starts
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub stride: u64,
    /// Output codebook path
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub codec: CodecArgs,
    /// Comma-separated gains; each source is added once per gain
    #[arg(long, value_delimiter = ',', value_parser = positive_gain)]
    pub gain_aug: Vec<f32>,
}

#[derive(Debug, Args)]
pub struct ResynthArgs {
    /// Codebook built by build-codebook
    #[arg(long)]
    pub codebook: PathBuf,
    /// Target WAV (or npy with --latent-target)
    #[arg(long)]
    pub target: PathBuf,
    /// Treat --target as npy latents and write npy output
    #[arg(long)]
    pub latent_target: bool,
    /// Sidecar for a latent target [default: target path with .json]
    #[arg(long, requires = "latent_target")]
    pub meta: Option<PathBuf>,
    /// Sampling temperature; 0 selects the nearest grain
    #[arg(long, default_value_t = 0.0, value_parser = temperature)]
    pub temperature: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sample only among the k nearest grains
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub top_k: Option<u64>,
    #[arg(long, value_enum, default_value_t = Tail::Pad)]
    pub tail: Tail,
    /// Write the selection trace as JSON ("-" for stdout)
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Encoding::Float32)]
    pub encoding: Encoding,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Sidecar path [default: output path with .json]
    #[arg(long)]
    pub meta: Option<PathBuf>,
    #[command(flatten)]
    pub codec: CodecArgs,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Sidecar path [default: input path with .json]
    #[arg(long)]
    pub meta: Option<PathBuf>,
    /// Codec settings; omitted values are read from the sidecar
    #[command(flatten)]
    pub codec: CodecArgs,
    #[arg(long, value_enum, default_value_t = Encoding::Float32)]
    pub encoding: Encoding,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("file").required(true).args(["path", "codebook"])))]
pub struct InspectArgs {
    /// Codebook or npy file
    pub path: Option<PathBuf>,
    #[arg(long, conflicts_with = "path")]
    pub codebook: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Tail {
    Pad,
    Truncate,
}

impl From<Tail> for TailPolicy {
    fn from(t: Tail) -> Self {
        match t {
            Tail::Pad => TailPolicy::Pad,
            Tail::Truncate => TailPolicy::Truncate,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Encoding {
    Pcm16,
    Float32,
}

impl From<Encoding> for WavEncoding {
    fn from(e: Encoding) -> Self {
        match e {
            Encoding::Pcm16 => WavEncoding::Pcm16,
            Encoding::Float32 => WavEncoding::Float32,
        }
    }
}

fn positive_gain(s: &str) -> Result<f32, String> {
    let g: f32 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
    if g.is_finite() && g > 0.0 {
        Ok(g)
    } else {
        Err(format!("gain must be positive and finite, got {s}"))
    }
}

fn temperature(s: &str) -> Result<f64, String> {
    let t: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if t.is_finite() && t >= 0.0 {
        Ok(t)
    } else {
        Err(format!("temperature must be finite and >= 0, got {s}"))
    }
}
