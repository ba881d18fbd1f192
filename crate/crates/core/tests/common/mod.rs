//! Independent reference implementations used as test oracles. None of these
//! call into the code paths they check.

#![allow(dead_code)]

use std::f64::consts::PI;

use latgran_core::codebook::{GrainCodebook, GrainParams, Provenance};
use latgran_core::{LatentSequence, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Orthonormal DCT-II by direct cosine summation.
pub fn dct2_direct(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            let s: f64 = x
                .iter()
                .enumerate()
                .map(|(i, v)| v * (PI * (2 * i + 1) as f64 * k as f64 / (2 * n) as f64).cos())
                .sum();
            let scale = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
            s * scale
        })
        .collect()
}

/// Naive cosine distance in f64 with the zero-norm convention.
pub fn cosine_distance_naive(a: &[f32], b: &[f32]) -> f64 {
    let mut ab = 0.0f64;
    let mut aa = 0.0f64;
    let mut bb = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (*x as f64, *y as f64);
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    let (na, nb) = (aa.sqrt(), bb.sqrt());
    if na < 1e-12 && nb < 1e-12 {
        return 0.0;
    }
    if na < 1e-12 || nb < 1e-12 {
        return 1.0;
    }
    1.0 - (ab / (na * nb)).clamp(-1.0, 1.0)
}

/// Argmin with lowest-index tie-breaking, by explicit scan.
pub fn argmin_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..values.len() {
        if values[i] < values[best] {
            best = i;
        }
    }
    best
}

/// Softmax over negative distances evaluated pairwise:
/// p_i = 1 / sum_j exp((d_i - d_j) / tau). No max-shift and no shared
/// normalizer, so it shares no arithmetic path with the implementation.
pub fn softmax_oracle(d: &[f64], tau: f64) -> Vec<f64> {
    d.iter()
        .map(|&di| {
            let mut terms: Vec<f64> = d.iter().map(|&dj| ((di - dj) / tau).exp()).collect();
            terms.sort_by(f64::total_cmp);
            1.0 / terms.iter().sum::<f64>()
        })
        .collect()
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f32> {
    (0..n).map(|_| rng.random_range(-1.0f32..1.0)).collect()
}

/// Codebook with grain size 1 whose rows are the given vectors.
pub fn codebook_from_rows(rows: &[Vec<f32>]) -> GrainCodebook {
    let m = Matrix::from_rows(rows).unwrap();
    let d = m.cols();
    let prov = (0..m.rows())
        .map(|i| Provenance {
            source_id: "rows".into(),
            start_frame: i,
            augmentation_tag: String::new(),
        })
        .collect();
    GrainCodebook::from_parts(m, prov, GrainParams::new(1, 1).unwrap(), d, 100.0, "test-codec").unwrap()
}

pub fn random_latents(rng: &mut ChaCha8Rng, t: usize, d: usize, codec_id: &str) -> LatentSequence {
    let data = (0..t * d).map(|_| rng.random_range(-2.0f32..2.0)).collect();
    LatentSequence::new(Matrix::new(t, d, data).unwrap(), 62.5, codec_id).unwrap()
}

/// Interior sample range excluding one frame at each end.
pub fn interior(len: usize, frame: usize) -> std::ops::Range<usize> {
    frame..len.saturating_sub(frame)
}
