//! Keyed random streams.
//!
//! Every trajectory draws from its own stream, addressed by
//! `(master_seed, level, sample_index)`. The generator is ChaCha8 keyed by
//! the master seed and level, with the sample index selecting the ChaCha
//! stream, so a sample's draws never depend on how many draws any other
//! sample consumed, and results do not depend on thread scheduling.
//!
//! Normals use the Box-Muller transform: every pair of normals consumes
//! exactly two 64-bit words, the second normal of a pair is cached.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::Sign;

/// Source of the three kinds of randomness the particle schemes consume.
///
/// Stepping functions never generate randomness themselves; they pull it
/// from a `Draws` implementation, which lets tests script exact sequences.
pub trait Draws {
    /// A standard normal variate.
    fn normal(&mut self) -> f64;
    /// A uniform variate on `[0, 1)`.
    fn uniform(&mut self) -> f64;
    /// A fair sign.
    fn sign(&mut self) -> Sign;
}

impl<D: Draws + ?Sized> Draws for &mut D {
    fn normal(&mut self) -> f64 {
        (**self).normal()
    }
    fn uniform(&mut self) -> f64 {
        (**self).uniform()
    }
    fn sign(&mut self) -> Sign {
        (**self).sign()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    pub master_seed: u64,
    pub level: u32,
    pub sample_index: u64,
}

impl StreamKey {
    pub fn new(master_seed: u64, level: u32, sample_index: u64) -> Self {
        Self {
            master_seed,
            level,
            sample_index,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RngStream {
    inner: ChaCha8Rng,
    spare_normal: Option<f64>,
}

const TWO_POW_MINUS_53: f64 = 1.0 / (1u64 << 53) as f64;

/// Builds the deterministic stream for `key`.
pub fn stream_for(key: StreamKey) -> RngStream {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&key.master_seed.to_le_bytes());
    seed[8..12].copy_from_slice(&key.level.to_le_bytes());
    // domain tag, keeps the key space separate from plain u64-seeded ChaCha
    seed[16..24].copy_from_slice(&0x6b69_6e65_7469_6321u64.to_le_bytes());
    let mut inner = ChaCha8Rng::from_seed(seed);
    inner.set_stream(key.sample_index);
    RngStream {
        inner,
        spare_normal: None,
    }
}

impl RngStream {
    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }
}

impl Draws for RngStream {
    #[inline]
    fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // 1 - u lies in (0, 1], so the logarithm is finite
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        self.spare_normal = Some(radius * s);
        radius * c
    }

    #[inline]
    fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * TWO_POW_MINUS_53
    }

    #[inline]
    fn sign(&mut self) -> Sign {
        if self.next_u64() >> 63 == 1 {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }
}

/// Convenience wrappers matching the free-function style used elsewhere.
pub fn draw_normal(stream: &mut RngStream) -> f64 {
    stream.normal()
}

pub fn draw_uniform(stream: &mut RngStream) -> f64 {
    stream.uniform()
}

pub fn draw_sign(stream: &mut RngStream) -> Sign {
    stream.sign()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(i: u64) -> StreamKey {
        StreamKey::new(42, 3, i)
    }

    #[test]
    fn same_key_same_sequence() {
        let mut a = stream_for(key(7));
        let mut b = stream_for(key(7));
        for _ in 0..100 {
            assert_eq!(a.normal().to_bits(), b.normal().to_bits());
            assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
            assert_eq!(a.sign(), b.sign());
        }
    }

    #[test]
    fn level_changes_sequence() {
        let mut a = stream_for(StreamKey::new(1, 0, 0));
        let mut b = stream_for(StreamKey::new(1, 1, 0));
        let xs: Vec<u64> = (0..16).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..16).map(|_| b.next_u64()).collect();
        assert_ne!(xs, ys);
    }

    #[test]
    fn seed_changes_sequence() {
        let mut a = stream_for(StreamKey::new(1, 0, 0));
        let mut b = stream_for(StreamKey::new(2, 0, 0));
        assert_ne!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn normal_moments() {
        let mut s = stream_for(key(0));
        let n = 1_000_000;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..n {
            let z = s.normal();
            sum += z;
            sum2 += z * z;
        }
        let mean = sum / n as f64;
        let var = sum2 / n as f64 - mean * mean;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "var {var}");
    }

    #[test]
    fn sign_is_fair() {
        let mut s = stream_for(key(1));
        let n = 1_000_000;
        let plus = (0..n).filter(|_| s.sign() == Sign::Plus).count();
        let p = plus as f64 / n as f64;
        let se = (0.25 / n as f64).sqrt();
        assert!((p - 0.5).abs() < 4.0 * se, "p {p}");
    }

    #[test]
    fn uniform_in_half_open_unit_interval() {
        let mut s = stream_for(key(2));
        for _ in 0..100_000 {
            let u = s.uniform();
            assert!((0.0..1.0).contains(&u));
        }
    }
}
