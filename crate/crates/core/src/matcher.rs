//! Cosine matching of target grains against a codebook.
//!
//! Selection is either greedy (temperature 0: the nearest grain, lowest index
//! on ties) or a draw from the softmax over negative cosine distances,
//!
//! ```text
//! P(i) = exp(-d_i / tau) / sum_j exp(-d_j / tau)
//! ```
//!
//! Each draw uses its own ChaCha stream keyed by `(seed, grain_index)`, so a
//! grain's selection never depends on which grains were matched before it or
//! on which thread matched it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codebook::{Grain, GrainCodebook};
use crate::error::{Error, Result};

/// Norms below this make a vector direction-less. Its distance to any
/// non-silent vector is 1, and to another silent vector 0.
pub const ZERO_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchParams {
    /// 0 selects greedily.
    pub temperature: f64,
    pub seed: u64,
    /// Restrict sampling to the k nearest grains.
    pub top_k: Option<usize>,
}

impl MatchParams {
    pub fn greedy() -> Self {
        Self {
            temperature: 0.0,
            seed: 0,
            top_k: None,
        }
    }

    pub fn sampled(temperature: f64, seed: u64) -> Self {
        Self {
            temperature,
            seed,
            top_k: None,
        }
    }

    pub fn with_top_k(mut self, k: usize) -> Self {
        self.top_k = Some(k);
        self
    }

    pub fn validate(&self, codebook_len: usize) -> Result<()> {
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(Error::InvalidMatchParams(format!(
                "temperature must be finite and >= 0, got {}",
                self.temperature
            )));
        }
        match self.top_k {
            Some(0) => Err(Error::InvalidMatchParams("top_k must be >= 1".into())),
            Some(k) if k > codebook_len => Err(Error::InvalidMatchParams(format!(
                "top_k {k} exceeds codebook size {codebook_len}"
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrainSelection {
    #[serde(rename = "index")]
    pub codebook_index: usize,
    pub distance: f64,
    pub probability: f64,
}

/// Dot product accumulated in f64 over eight independent lanes.
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut lanes = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            lanes[k] += x[k] as f64 * y[k] as f64;
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += *x as f64 * *y as f64;
    }
    ((lanes[0] + lanes[4]) + (lanes[1] + lanes[5])) + ((lanes[2] + lanes[6]) + (lanes[3] + lanes[7])) + tail
}

pub fn l2_norm(a: &[f32]) -> f64 {
    dot(a, a).sqrt()
}

fn distance_with_norms(a: &[f32], a_norm: f64, b: &[f32], b_norm: f64) -> f64 {
    match (a_norm < ZERO_NORM, b_norm < ZERO_NORM) {
        (true, true) => return 0.0,
        (true, false) | (false, true) => return 1.0,
        (false, false) => {}
    }
    let cos = (dot(a, b) / (a_norm * b_norm)).clamp(-1.0, 1.0);
    1.0 - cos
}

/// 1 - <a,b> / (|a| |b|). A (near) zero-norm vector is at distance 1.0 from
/// everything except another zero-norm vector, where the distance is 0.
pub fn cosine_distance(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(distance_with_norms(a, l2_norm(a), b, l2_norm(b)))
}

fn check_dim(t: &Grain, cb: &GrainCodebook) -> Result<()> {
    if t.len() != cb.grain_dim() {
        return Err(Error::DimensionMismatch {
            expected: cb.grain_dim(),
            found: t.len(),
        });
    }
    Ok(())
}

/// Cosine distance from `t` to every codebook grain.
pub fn distances(t: &Grain, cb: &GrainCodebook) -> Result<Vec<f64>> {
    check_dim(t, cb)?;
    Ok((0..cb.len())
        .map(|i| distance_with_norms(t.vector(), t.norm(), cb.grain(i), cb.norm(i)))
        .collect())
}

/// Softmax over negative distances at temperature `tau`, shifted by the
/// minimum distance so the largest exponent is exactly 0.
pub fn softmax_neg_distances(distances: &[f64], tau: f64) -> Result<Vec<f64>> {
    if tau.is_nan() || tau <= 0.0 {
        return Err(Error::NonPositiveTemperature(tau));
    }
    let min = distances.iter().copied().fold(f64::INFINITY, f64::min);
    let mut weights: Vec<f64> = distances.iter().map(|&d| (-(d - min) / tau).exp()).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok(weights)
}

/// Selection probabilities for every codebook grain.
pub fn match_distribution(t: &Grain, cb: &GrainCodebook, tau: f64) -> Result<Vec<f64>> {
    if tau.is_nan() || tau <= 0.0 {
        return Err(Error::NonPositiveTemperature(tau));
    }
    softmax_neg_distances(&distances(t, cb)?, tau)
}

/// Nearest grain by cosine distance; the lowest index wins ties.
pub fn match_greedy(t: &Grain, cb: &GrainCodebook) -> Result<GrainSelection> {
    check_dim(t, cb)?;
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for i in 0..cb.len() {
        let d = distance_with_norms(t.vector(), t.norm(), cb.grain(i), cb.norm(i));
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    Ok(GrainSelection {
        codebook_index: best,
        distance: best_d,
        probability: 1.0,
    })
}

/// Indices of the `k` nearest grains, ordered by (distance, index), then
/// returned in ascending index order.
fn nearest_k(dist: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dist.len()).collect();
    let cmp = |a: &usize, b: &usize| dist[*a].total_cmp(&dist[*b]).then(a.cmp(b));
    if k < order.len() {
        order.select_nth_unstable_by(k, cmp);
        order.truncate(k);
    }
    order.sort_unstable();
    order
}

/// Uniform draw in [0, 1) from the substream owned by `grain_index`.
pub fn substream_uniform(seed: u64, grain_index: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(grain_index);
    rng.random::<f64>()
}

/// Inverse-CDF lookup. Always lands on an entry with nonzero probability.
fn inverse_cdf(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Selects a grain for the target grain at position `grain_index`.
pub fn sample_grain(t: &Grain, cb: &GrainCodebook, p: &MatchParams, grain_index: usize) -> Result<GrainSelection> {
    p.validate(cb.len())?;
    if p.temperature == 0.0 {
        return match_greedy(t, cb);
    }
    let dist = distances(t, cb)?;
    let u = substream_uniform(p.seed, grain_index as u64);
    let (index, distance, probability) = match p.top_k {
        Some(k) if k < dist.len() => {
            let candidates = nearest_k(&dist, k);
            let sub: Vec<f64> = candidates.iter().map(|&i| dist[i]).collect();
            let probs = softmax_neg_distances(&sub, p.temperature)?;
            let j = inverse_cdf(&probs, u);
            (candidates[j], sub[j], probs[j])
        }
        _ => {
            let probs = softmax_neg_distances(&dist, p.temperature)?;
            let i = inverse_cdf(&probs, u);
            (i, dist[i], probs[i])
        }
    };
    Ok(GrainSelection {
        codebook_index: index,
        distance,
        probability,
    })
}

/// Matches every target grain, in parallel; target `i` uses substream
/// `first_index + i`. Output equals the sequential result.
pub fn match_all(targets: &[Grain], cb: &GrainCodebook, p: &MatchParams, first_index: usize) -> Result<Vec<GrainSelection>> {
    p.validate(cb.len())?;
    targets
        .par_iter()
        .enumerate()
        .map(|(i, t)| sample_grain(t, cb, p, first_index + i))
        .collect()
}
