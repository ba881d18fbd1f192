//! Seeded fixtures shared by the benchmarks.

use latgran_core::codebook::{GrainCodebook, GrainParams, Provenance};
use latgran_core::{AudioBuffer, Grain, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_codebook(seed: u64, grains: usize, grain_size: usize, latent_dim: usize) -> GrainCodebook {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = grain_size * latent_dim;
    let data = (0..grains * width).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    let provenance = (0..grains)
        .map(|i| Provenance {
            source_id: "bench".into(),
            start_frame: i,
            augmentation_tag: String::new(),
        })
        .collect();
    GrainCodebook::from_parts(
        Matrix::new(grains, width, data).unwrap(),
        provenance,
        GrainParams::new(grain_size, 1).unwrap(),
        latent_dim,
        62.5,
        "bench",
    )
    .unwrap()
}

pub fn random_targets(seed: u64, count: usize, width: usize) -> Vec<Grain> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| Grain::new((0..width).map(|_| rng.random_range(-1.0f32..1.0)).collect()))
        .collect()
}

pub fn noise(seed: u64, seconds: f64, sample_rate: u32) -> AudioBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = (seconds * sample_rate as f64) as usize;
    AudioBuffer::new((0..len).map(|_| rng.random_range(-0.5f32..0.5)).collect(), sample_rate).unwrap()
}
