//! Seeded random streams.
//!
//! Every Monte Carlo run draws from its own ChaCha8 stream. The 256-bit key is
//! filled from a SplitMix64 sequence started at `seed ^ domain.tag()`, and the
//! ChaCha stream id (nonce) is the run index. Run `i` of a given domain therefore
//! sees the same numbers regardless of how runs are scheduled across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SenseRng = ChaCha8Rng;

/// Independent purposes that must never share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamDomain {
    /// Noise-only calibration / false-alarm runs.
    NoiseOnly,
    /// Signal-present detection runs.
    SignalPresent,
    /// Channel draws made once per experiment.
    Channel,
    /// Wigner-ensemble draws used to build or check limiting laws.
    Ensemble,
    /// Free-form purposes, for tests and tools.
    Custom(u32),
}

impl StreamDomain {
    fn tag(self) -> u64 {
        match self {
            StreamDomain::NoiseOnly => 0x5330_0000_0000_0001,
            StreamDomain::SignalPresent => 0x5331_0000_0000_0002,
            StreamDomain::Channel => 0x4348_0000_0000_0003,
            StreamDomain::Ensemble => 0x574e_0000_0000_0004,
            StreamDomain::Custom(c) => 0x4355_0000_0000_0000 | u64::from(c) << 8,
        }
    }
}

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream for run `index` of `domain` under the experiment `seed`.
pub fn stream(seed: u64, domain: StreamDomain, index: u64) -> SenseRng {
    let mut state = seed ^ domain.tag();
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let draw = |mut r: SenseRng| -> Vec<u64> { (0..4).map(|_| r.random()).collect() };
        let a = draw(stream(7, StreamDomain::NoiseOnly, 3));
        let b = draw(stream(7, StreamDomain::NoiseOnly, 3));
        assert_eq!(a, b);
        let mut other = stream(7, StreamDomain::NoiseOnly, 4);
        assert_ne!(a[0], other.random::<u64>());
        let mut dom = stream(7, StreamDomain::SignalPresent, 3);
        assert_ne!(a[0], dom.random::<u64>());
    }
}
