//! Seeded weighted sampling without replacement.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a path of indices into an independent stream seed.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// FNV-1a, stable across platforms and releases.
pub fn stable_hash(s: &str) -> u64 {
    s.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

pub fn stream_rng(seed: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, path))
}

/// Draws `k` distinct candidates, each step picking among the remaining ones
/// with probability proportional to weight. Once only zero-weight candidates
/// remain, draws continue uniformly. Returns candidates in draw order; with
/// `k >= candidates.len()` the result is a permutation of all of them.
///
/// Uses exponential keys (`ln(u) / w`), which induce the same distribution
/// as sequential proportional draws in a single pass.
pub fn weighted_sample_without_replacement<T: Clone, R: Rng + ?Sized>(
    candidates: &[T],
    weights: &[f64],
    k: usize,
    rng: &mut R,
) -> Result<Vec<T>> {
    if candidates.len() != weights.len() {
        return Err(Error::InvalidArgument(format!(
            "{} candidates but {} weights",
            candidates.len(),
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::InvalidArgument(format!("invalid sampling weight {w}")));
    }
    // (positive-weight class, key, index); larger sorts first.
    let mut keys: Vec<(bool, f64, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let u: f64 = 1.0 - rng.random::<f64>();
            if w > 0.0 {
                (true, u.ln() / w, i)
            } else {
                (false, u.ln(), i)
            }
        })
        .collect();
    let order = |a: &(bool, f64, usize), b: &(bool, f64, usize)| {
        b.0.cmp(&a.0)
            .then_with(|| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal))
            .then_with(|| a.2.cmp(&b.2))
    };
    let k = k.min(keys.len());
    if k == 0 {
        return Ok(Vec::new());
    }
    if k < keys.len() {
        keys.select_nth_unstable_by(k - 1, order);
        keys.truncate(k);
    }
    keys.sort_unstable_by(order);
    Ok(keys.into_iter().map(|(_, _, i)| candidates[i].clone()).collect())
}
