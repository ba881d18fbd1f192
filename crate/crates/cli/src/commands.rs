use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use latgran_core::codebook::{build_codebook, gain_augment, load_codebook, parse_codebook, save_codebook, CODEBOOK_MAGIC, CODEBOOK_VERSION};
use latgran_core::latent::{default_meta_path, read_latents, write_latents};
use latgran_core::tensor_io::{read_npy_from, write_atomically, NPY_MAGIC};
use latgran_core::{
    read_wav, resynthesize_audio, resynthesize_latent, write_wav, Codec, CodecConfig, CorpusEntry, Error,
    GrainParams, LatentMeta, MatchParams, ReferenceCodec, ResynthConfig, TraceEntry,
};
use serde_json::json;

use crate::args::{BuildArgs, CodecArgs, DecodeArgs, EncodeArgs, InspectArgs, ResynthArgs};
use crate::Failure;

const DEFAULT_FRAME_SIZE: usize = 512;
const DEFAULT_DIMS: usize = 64;

type Outcome = Result<(), Failure>;

impl CodecArgs {
    /// Flag values over encoder defaults; the sample rate falls back to `audio_rate`.
    fn resolve(&self, audio_rate: u32) -> latgran_core::Result<CodecConfig> {
        let frame = self.frame_size.map_or(DEFAULT_FRAME_SIZE, |v| v as usize);
        let hop = self.hop.map_or((frame / 2).max(1), |v| v as usize);
        let dims = self.dims.map_or(DEFAULT_DIMS, |v| v as usize);
        CodecConfig::new(frame, hop, dims, self.sample_rate.unwrap_or(audio_rate))
    }

    /// Rejects impossible flag combinations before any input is read.
    fn precheck(&self) -> Result<(), Failure> {
        self.resolve(1).map(|_| ()).map_err(|e| Failure::Usage(e.to_string()))
    }
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("json value serializes"));
}

/// Expands directories into their `.wav` files, sorted by name.
fn expand_inputs(paths: &[PathBuf]) -> latgran_core::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && f.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

pub fn build(args: BuildArgs) -> Outcome {
    let params = GrainParams::new(args.grain_size as usize, args.stride as usize).map_err(|e| Failure::Usage(e.to_string()))?;
    args.codec.precheck()?;

    let mut corpus = Vec::new();
    let sources;
    if args.latent_input.is_empty() {
        let files = expand_inputs(&args.input)?;
        sources = files.len();
        let mut codec: Option<ReferenceCodec> = None;
        for file in &files {
            let audio = read_wav(file)?;
            let codec = match &codec {
                Some(c) => c,
                None => codec.insert(ReferenceCodec::new(args.codec.resolve(audio.sample_rate)?)?),
            };
            let id = file.display().to_string();
            if args.gain_aug.is_empty() {
                corpus.push(CorpusEntry::new(id, codec.encode(&audio)?));
            } else {
                for (scaled, tag) in gain_augment(&audio, &args.gain_aug)? {
                    corpus.push(CorpusEntry::new(id.clone(), codec.encode(&scaled)?).with_tag(tag));
                }
            }
        }
    } else {
        sources = args.latent_input.len();
        for npy in &args.latent_input {
            let (z, _) = read_latents(npy, default_meta_path(npy))?;
            corpus.push(CorpusEntry::new(npy.display().to_string(), z));
        }
    }

    let cb = build_codebook(&corpus, params)?;
    save_codebook(&args.out, &cb)?;
    print_json(&json!({
        "grains": cb.len(),
        "sources": sources,
        "entries": corpus.len(),
        "skipped_sources": cb.skipped_sources(),
        "codec_id": cb.codec_id(),
        "out": args.out.display().to_string(),
    }));
    Ok(())
}

fn write_trace(path: &Path, trace: &[TraceEntry]) -> latgran_core::Result<()> {
    let mut text = serde_json::to_string_pretty(trace).expect("trace serializes");
    text.push('\n');
    if path == Path::new("-") {
        std::io::stdout().write_all(text.as_bytes())?;
        return Ok(());
    }
    write_atomically(path, |w| Ok(w.write_all(text.as_bytes())?))
}

pub fn resynth(args: ResynthArgs) -> Outcome {
    let cb = load_codebook(&args.codebook)?;
    let mut matching = MatchParams::sampled(args.temperature, args.seed);
    if let Some(k) = args.top_k {
        matching = matching.with_top_k(k as usize);
    }
    let cfg = ResynthConfig::for_codebook(&cb, matching, args.tail.into());

    let selections = if args.latent_target {
        let meta = args.meta.clone().unwrap_or_else(|| default_meta_path(&args.target));
        let (target, meta) = read_latents(&args.target, meta)?;
        let r = resynthesize_latent(&target, &cb, &cfg)?;
        write_latents(&args.out, default_meta_path(&args.out), &r.latents, meta.sample_rate)?;
        r.selections
    } else {
        let codec = ReferenceCodec::new(CodecConfig::from_codec_id(cb.codec_id())?)?;
        let target = read_wav(&args.target)?;
        let (audio, r) = resynthesize_audio(&target, &cb, &cfg, &codec)?;
        write_wav(&args.out, &audio, args.encoding.into())?;
        r.selections
    };

    if let Some(path) = &args.trace {
        write_trace(path, &latgran_core::pipeline::trace_entries(&selections, &cb))?;
    }
    Ok(())
}

pub fn encode(args: EncodeArgs) -> Outcome {
    args.codec.precheck()?;
    let audio = read_wav(&args.input)?;
    let codec = ReferenceCodec::new(args.codec.resolve(audio.sample_rate)?)?;
    let z = codec.encode(&audio)?;
    let meta = args.meta.unwrap_or_else(|| default_meta_path(&args.out));
    write_latents(&args.out, meta, &z, Some(codec.config().sample_rate))?;
    Ok(())
}

pub fn decode(args: DecodeArgs) -> Outcome {
    let meta_path = args.meta.clone().unwrap_or_else(|| default_meta_path(&args.input));
    let meta = LatentMeta::read(&meta_path)?;
    let recorded = CodecConfig::from_codec_id(&meta.codec_id).ok();

    let c = &args.codec;
    let frame = c.frame_size.map(|v| v as usize).or(recorded.map(|r| r.frame_size)).unwrap_or(DEFAULT_FRAME_SIZE);
    let hop = c.hop.map(|v| v as usize).or(recorded.map(|r| r.hop)).unwrap_or((frame / 2).max(1));
    let dims = c.dims.map(|v| v as usize).or(recorded.map(|r| r.kept_dims)).unwrap_or(DEFAULT_DIMS);
    let rate = c
        .sample_rate
        .or(meta.sample_rate)
        .or(recorded.map(|r| r.sample_rate))
        .ok_or_else(|| Error::InvalidConfig("sidecar has no sample rate; pass --sample-rate".into()))?;
    let codec = ReferenceCodec::new(CodecConfig::new(frame, hop, dims, rate)?)?;

    let (z, _) = read_latents(&args.input, &meta_path)?;
    let audio = codec.decode(&z)?;
    write_wav(&args.out, &audio, args.encoding.into())?;
    Ok(())
}

pub fn inspect(args: InspectArgs) -> Outcome {
    let path = args.path.or(args.codebook).expect("clap requires one of path/codebook");
    let bytes = std::fs::read(&path).map_err(Error::from)?;

    if bytes.starts_with(&CODEBOOK_MAGIC) {
        let cb = parse_codebook(&bytes)?;
        let p = cb.params();
        let distinct: BTreeSet<&str> = cb.provenance().iter().map(|p| p.source_id.as_str()).collect();
        print_json(&json!({
            "format": "lgcb",
            "version": CODEBOOK_VERSION,
            "grains": cb.len(),
            "grain_size": p.grain_size,
            "stride": p.stride,
            "latent_dim": cb.latent_dim(),
            "frame_rate": cb.frame_rate(),
            "codec_id": cb.codec_id(),
            "skipped_sources": cb.skipped_sources(),
            "source_count": distinct.len(),
            "sources": cb.source_counts(),
        }));
    } else if bytes.starts_with(&NPY_MAGIC) {
        let m = read_npy_from(&bytes[..])?;
        let mut out = json!({
            "format": "npy",
            "shape": [m.rows(), m.cols()],
            "dtype": "<f4",
        });
        let sidecar = default_meta_path(&path);
        if sidecar.is_file() {
            out["meta"] = serde_json::to_value(LatentMeta::read(&sidecar)?).expect("metadata serializes");
        }
        print_json(&out);
    } else {
        return Err(Error::MalformedHeader(format!("{} is neither a codebook nor an npy file", path.display())).into());
    }
    Ok(())
}
