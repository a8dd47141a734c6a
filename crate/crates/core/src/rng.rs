//! Seeded, splittable random streams.
//!
//! A [`StreamRng`] is identified by a 64-bit key. Children are derived from
//! `(key, index)` alone, never from the parent's consumed state, so a replica
//! computed on any thread sees the same stream.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug)]
pub struct StreamRng {
    key: u64,
    inner: ChaCha8Rng,
}

impl StreamRng {
    pub fn new(seed: u64) -> Self {
        let mut bytes = [0u8; 32];
        let mut s = seed;
        for chunk in bytes.chunks_exact_mut(8) {
            s = splitmix64(s);
            chunk.copy_from_slice(&s.to_le_bytes());
        }
        Self {
            key: seed,
            inner: ChaCha8Rng::from_seed(bytes),
        }
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    /// Independent child stream number `index`.
    pub fn split(&self, index: u64) -> Self {
        let child = splitmix64(splitmix64(self.key) ^ splitmix64(index.wrapping_mul(GOLDEN_GAMMA) ^ 0xD6E8_FEB8_6659_FD93));
        Self::new(child)
    }

    /// Follows a whole split path, e.g. `[replica, phase]`.
    pub fn split_path(&self, path: &[u64]) -> Self {
        path.iter().fold(self.clone(), |rng, &i| rng.split(i))
    }
}

impl RngCore for StreamRng {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    #[inline]
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Runs `f` once per replica in parallel, replica `i` on `parent.split(i)`.
/// Output order follows the replica index.
pub fn par_replicas<T, F>(parent: &StreamRng, replicas: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut StreamRng) -> T + Sync,
{
    (0..replicas)
        .into_par_iter()
        .map(|i| {
            let mut rng = parent.split(i as u64);
            f(i, &mut rng)
        })
        .collect()
}
