//! Counter-based random numbers.
//!
//! Every random quantity in the crate is a pure function of a 64-bit key and
//! a counter, so any value can be regenerated independently of evaluation
//! order or thread layout. The mixer is the SplitMix64 finalizer applied
//! twice with distinct stream constants.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const STREAM: u64 = 0xD1B5_4A32_D192_ED03;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform 64-bit word for `(key, counter)`.
#[inline]
pub fn hash64(key: u64, counter: u64) -> u64 {
    let k = mix64(key.wrapping_add(GOLDEN));
    mix64(k ^ counter.wrapping_mul(STREAM).wrapping_add(GOLDEN))
}

/// Uniform double in `[0, 1)` with 53 random bits.
#[inline]
pub fn uniform(key: u64, counter: u64) -> f64 {
    (hash64(key, counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform double in `[0, 1)` keyed by a signed site index.
#[inline]
pub fn site_uniform(seed: u64, site: i64) -> f64 {
    uniform(seed, site as u64)
}

/// Seed of the `index`-th independent sample drawn under `master`.
#[inline]
pub fn derive_seed(master: u64, index: u64) -> u64 {
    hash64(master ^ 0x5EED_5EED_5EED_5EED, index)
}

/// Small deterministic stream for auxiliary draws (start vectors, sampled
/// subintervals, probe times).
#[derive(Debug, Clone)]
pub struct CounterStream {
    key: u64,
    counter: u64,
}

impl CounterStream {
    pub fn new(key: u64) -> Self {
        Self { key, counter: 0 }
    }

    pub fn next_u64(&mut self) -> u64 {
        let v = hash64(self.key, self.counter);
        self.counter += 1;
        v
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `lo..=hi`.
    pub fn next_range(&mut self, lo: i64, hi: i64) -> i64 {
        debug_assert!(lo <= hi);
        let span = (hi - lo) as u64 + 1;
        lo + (self.next_u64() % span) as i64
    }
}
