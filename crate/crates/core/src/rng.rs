//! Deterministic, labelled random streams.
//!
//! Every source of randomness in a run is a [`SeededRng`] obtained from the run
//! seed and a stream label, so that adding draws to one stream never shifts
//! another.

use rand::RngCore;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

/// xoshiro256++ stream keyed by `(seed, label)`.
///
/// The generator state is filled by splitmix64 from `seed ^ fnv1a64(label)`.
#[derive(Clone, Debug)]
pub struct SeededRng {
    seed: u64,
    label: String,
    inner: Xoshiro256PlusPlus,
}

impl SeededRng {
    pub fn new(seed: u64, label: impl Into<String>) -> Self {
        let label = label.into();
        let inner = Xoshiro256PlusPlus::seed_from_u64(seed ^ fnv1a64(label.as_bytes()));
        SeededRng { seed, label, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Child stream `"<label>/<sub>"` under the same seed. Does not advance `self`.
    pub fn fork(&self, sub: &str) -> SeededRng {
        SeededRng::new(self.seed, format!("{}/{}", self.label, sub))
    }
}

pub fn derive_rng(seed: u64, label: &str) -> SeededRng {
    SeededRng::new(seed, label)
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes
        .iter()
        .fold(OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}
