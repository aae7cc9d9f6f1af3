//! Deterministic random-stream derivation.
//!
//! Every random draw in an experiment comes from a ChaCha8 stream whose seed
//! is a hash of `(master seed, stage tag, user id, trial id)`. The hash is
//! FNV-1a over the little-endian encoding followed by a SplitMix64 finalizer,
//! so stream identities are stable across platforms and compiler versions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{CMatrix, CVector, C64};

pub type StreamRng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(mut h: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the stream identified by `(seed, tag, user, trial)`.
pub fn stream_seed(seed: u64, tag: &str, user: u64, trial: u64) -> u64 {
    let mut h = fnv1a(FNV_OFFSET, &seed.to_le_bytes());
    h = fnv1a(h, tag.as_bytes());
    // separator so ("ab", 1) and ("a", b1..) cannot collide
    h = fnv1a(h, &[0xff]);
    h = fnv1a(h, &user.to_le_bytes());
    h = fnv1a(h, &trial.to_le_bytes());
    splitmix64(h)
}

pub fn stream(seed: u64, tag: &str, user: u64, trial: u64) -> StreamRng {
    StreamRng::seed_from_u64(stream_seed(seed, tag, user, trial))
}

/// One draw of a circularly-symmetric complex Gaussian with unit variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn complex_gaussian_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVector {
    CVector::from_fn(n, |_, _| complex_gaussian(rng))
}

/// Row-major fill so the draw order does not depend on nalgebra's storage.
pub fn complex_gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    let data: Vec<C64> = (0..rows * cols).map(|_| complex_gaussian(rng)).collect();
    CMatrix::from_row_slice(rows, cols, &data)
}
