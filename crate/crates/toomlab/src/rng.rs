//! Counter-based random number streams.
//!
//! Every random draw in the crate is a pure function of a user seed and a
//! counter tuple (replica, time step, site, lane, ...). Replicas and worker
//! threads therefore see identical numbers regardless of scheduling, and a
//! run is reproducible from its seed alone.

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes a seed together with a counter tuple into one word.
#[inline]
pub fn hash_words(seed: u64, words: &[u64]) -> u64 {
    let mut acc = splitmix64(seed ^ 0x6A09_E667_F3BC_C909);
    for &w in words {
        acc = splitmix64(acc ^ splitmix64(w));
    }
    acc
}

/// Uniform in [0, 1) from the top 53 bits.
#[inline]
pub fn unit_f64(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Sequential stream derived from (seed, stream id); used where a draw
/// count per object is not known in advance (e.g. the contour sampler).
#[derive(Debug, Clone)]
pub struct Stream {
    key: u64,
    counter: u64,
}

impl Stream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Stream { key: hash_words(seed, &[stream]), counter: 0 }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let x = splitmix64(self.key ^ splitmix64(self.counter));
        self.counter = self.counter.wrapping_add(1);
        x
    }

    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        unit_f64(self.next_u64())
    }

    pub fn next_range(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_f64() * n as f64) as usize % n
    }
}
