//! Reproducible random streams. Each sample owns a ChaCha8 stream whose key
//! is derived from the run seed and whose stream id is a hash of the
//! sample's coordinates, so results do not depend on scheduling.

use rand::{Error as RandError, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One step of the splitmix64 sequence, used as a mixing function.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Folds a list of words into one 64-bit key.
pub fn mix_words(words: &[u64]) -> u64 {
    words.iter().fold(0x6A09_E667_F3BC_C909, |acc, &w| splitmix64(acc ^ splitmix64(w)))
}

#[derive(Clone, Debug)]
pub struct RandomStream {
    inner: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self::substream(seed, &[])
    }

    /// Independent stream for the coordinates `key` under `seed`.
    pub fn substream(seed: u64, key: &[u64]) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(mix_words(key));
        RandomStream { inner }
    }

    pub fn uniform(&mut self) -> f64 {
        // 53 random mantissa bits
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn coin(&mut self) -> bool {
        self.inner.next_u32() & 1 == 1
    }

    /// Number of failures before the first success of a Bernoulli(p) trial.
    pub fn geometric_failures(&mut self, p: f64) -> u64 {
        if p >= 1.0 {
            return 0;
        }
        if p <= 0.0 {
            return u64::MAX;
        }
        let u = 1.0 - self.uniform();
        (u.ln() / (1.0 - p).ln()).floor() as u64
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }
    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), RandError> {
        self.inner.try_fill_bytes(dest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substreams_are_reproducible_and_distinct() {
        let mut a = RandomStream::substream(7, &[1, 2, 3]);
        let mut b = RandomStream::substream(7, &[1, 2, 3]);
        let mut c = RandomStream::substream(7, &[1, 2, 4]);
        let va: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let vb: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        let vc: Vec<u64> = (0..8).map(|_| c.next_u64()).collect();
        assert_eq!(va, vb);
        assert_ne!(va, vc);
    }

    #[test]
    fn uniform_in_unit_interval() {
        let mut r = RandomStream::new(1);
        for _ in 0..10_000 {
            let u = r.uniform();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn geometric_mean() {
        let mut r = RandomStream::new(3);
        let n = 200_000;
        let s: u64 = (0..n).map(|_| r.geometric_failures(0.5)).sum();
        let mean = s as f64 / n as f64;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
    }
}
