//! Keyed counter-based random streams.
//!
//! Every stream is a ChaCha8 keystream addressed by `(seed, domain, index)`,
//! so any shot or shard can be regenerated without touching its neighbours.

use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::{Rng, SeedableRng};

/// Separates the random streams used by different consumers of one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    SourcePattern = 0x5352_435f_5041_5454,
    BucketClick = 0x4255_434b_5f43_4c4b,
    PairSampling = 0x5041_4952_5f53_4d50,
    Verification = 0x5645_5249_4659_5f31,
}

/// Stream for `index` within `domain`, positioned at `word_offset` 32-bit words.
pub fn keyed_stream(seed: u64, domain: Domain, index: u64, word_offset: u128) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(domain as u64).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    if word_offset != 0 {
        rng.set_word_pos(word_offset);
    }
    rng
}

/// Uniform variate in `[0, 1)` with 53 random bits.
#[inline]
pub fn unit_f64<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform variate in `(0, 1]`, safe to pass to `ln`.
#[inline]
pub fn open_unit_f64<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Mixes two words into one; used to derive per-shard seeds.
pub fn mix64(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
