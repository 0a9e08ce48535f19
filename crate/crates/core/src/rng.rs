//! Counter-based random substreams.
//!
//! Every substream is a ChaCha8 generator keyed by the 64-bit seed with the
//! stream id set to a caller-chosen index (a replication number or a block of
//! draws). Results therefore depend only on `(seed, index)`, never on the
//! order in which substreams are consumed.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::normal;

pub struct Substream {
    rng: ChaCha8Rng,
}

impl Substream {
    pub fn new(seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        Self { rng }
    }

    /// Uniform on the open interval (0, 1), 53-bit resolution.
    pub fn uniform_open(&mut self) -> f64 {
        let bits = self.rng.next_u64() >> 11;
        (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal by inverse-cdf transform; one uniform per variate.
    pub fn standard_normal(&mut self) -> f64 {
        normal::quantile(self.uniform_open())
    }
}
