//! Counter-based random streams.
//!
//! Every uniform used by the samplers is addressed by
//! `(seed, replica, purpose, site, slot)`: the ChaCha stream number encodes
//! replica and purpose, and the word position encodes site and slot. Draws
//! are therefore independent of scheduling and of the order in which sites
//! are visited.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Purpose tags keeping independent uses of the same replica apart.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Sample = 0,
    Boundary = 1,
    Percolation = 2,
    Coupling = 3,
    Audit = 4,
}

const PURPOSES: u64 = 8;

/// Maps 64 random bits to `(0, 1]` with 53 bits of resolution.
#[inline]
pub fn open_unit(bits: u64) -> f64 {
    ((bits >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Generator for the given replica and purpose, positioned at word 0.
pub fn stream(seed: u64, replica: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica.wrapping_mul(PURPOSES).wrapping_add(purpose as u64));
    rng
}

/// Uniforms in `(0, 1]` for a contiguous range of site indices.
#[derive(Clone, Debug)]
pub struct UniformBlock {
    lo: usize,
    slots: usize,
    data: Vec<f64>,
}

impl UniformBlock {
    /// `slots` uniforms for every site index in `lo..hi`.
    pub fn new(seed: u64, replica: u64, purpose: Purpose, lo: usize, hi: usize, slots: usize) -> Self {
        let mut block = UniformBlock {
            lo,
            slots,
            data: Vec::new(),
        };
        block.refill(seed, replica, purpose, lo, hi);
        block
    }

    /// Reuses the allocation for another replica or range.
    pub fn refill(&mut self, seed: u64, replica: u64, purpose: Purpose, lo: usize, hi: usize) {
        let count = hi.saturating_sub(lo) * self.slots;
        let mut rng = stream(seed, replica, purpose);
        // two 32-bit words per u64
        rng.set_word_pos((lo as u128) * (self.slots as u128) * 2);
        self.lo = lo;
        self.data.clear();
        self.data.reserve(count);
        for _ in 0..count {
            self.data.push(open_unit(rng.next_u64()));
        }
    }

    #[inline]
    pub fn get(&self, site_index: usize, slot: usize) -> f64 {
        self.data[(site_index - self.lo) * self.slots + slot]
    }
}
