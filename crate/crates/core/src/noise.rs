//! Photon-counting noise: Poisson sampling with a counter-style generator
//! seeded per entry, so parallel or reordered evaluation cannot change the
//! draw of any entry.
//!
//! Sampling uses inversion by sequential search for small means and the
//! PTRS transformed-rejection scheme (Hormann 1993) for large ones.

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::ln_gamma;

use crate::error::{CoreError, Result};

/// Mean below which inversion by sequential search is used.
const INVERSION_CUTOFF: f64 = 30.0;

/// SplitMix64 finalizer; decorrelates the per-entry seeds.
fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn poisson_inversion(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    let mut k: u64 = 0;
    let mut p = (-mean).exp();
    let mut cdf = p;
    let u: f64 = rng.gen();
    // bounded walk; the cutoff keeps the loop short
    let k_max = (mean + 20.0 * mean.sqrt() + 50.0) as u64;
    while u > cdf && k < k_max {
        k += 1;
        p *= mean / k as f64;
        cdf += p;
    }
    k
}

/// PTRS transformed rejection with squeeze, valid for mean >= 10.
fn poisson_ptrs(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    let b = 0.931 + 2.53 * mean.sqrt();
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let v_r = 0.9277 - 3.6224 / (b - 2.0);
    let ln_mean = mean.ln();
    loop {
        let u: f64 = rng.gen::<f64>() - 0.5;
        let v: f64 = rng.gen();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + mean + 0.43).floor();
        if us >= 0.07 && v <= v_r && k >= 0.0 {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = (v * inv_alpha / (a / (us * us) + b)).ln();
        let rhs = k * ln_mean - mean - ln_gamma(k + 1.0);
        if lhs <= rhs {
            return k as u64;
        }
    }
}

/// One Poisson draw with the given mean.
pub fn poisson_draw(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        0
    } else if mean < INVERSION_CUTOFF {
        poisson_inversion(rng, mean)
    } else {
        poisson_ptrs(rng, mean)
    }
}

/// Replace each entry `b_i >= 0` by `Poisson(photon_scale * b_i) /
/// photon_scale`. Deterministic for a given `(b, photon_scale, seed)`; each
/// entry draws from its own seeded stream.
pub fn poissonize(b: &Array1<f64>, photon_scale: f64, seed: u64) -> Result<Array1<f64>> {
    if !(photon_scale > 0.0) {
        return Err(CoreError::InvalidSystem(format!(
            "photon scale must be positive, got {photon_scale}"
        )));
    }
    let mut out = Array1::zeros(b.len());
    for (i, &v) in b.iter().enumerate() {
        if v < 0.0 {
            return Err(CoreError::InvalidSystem(format!(
                "negative measurement b[{i}] = {v} cannot be photon counted"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, i as u64));
        out[i] = poisson_draw(&mut rng, photon_scale * v) as f64 / photon_scale;
    }
    Ok(out)
}
