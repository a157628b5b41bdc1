//! Seeded random sources. All randomness in the crate flows through here.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_xoshiro::Xoshiro256PlusPlus;

/// The generator used everywhere a seed is accepted.
pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent child seed from a base seed and a path of tags
/// (e.g. `[epoch, sample]`), using the splitmix64 finaliser.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut h = splitmix(base ^ 0x9e37_79b9_7f4a_7c15);
    for &t in tags {
        h = splitmix(h ^ splitmix(t.wrapping_add(0x632b_e59b_d9b4_e019)));
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-step bias noise: entries uniform on `[-amplitude, amplitude]`.
#[derive(Clone, Debug)]
///
/// Drawn once per neuron per step, so it uses a cheaper generator than
/// [`SeededRng`].
pub struct NoiseSource {
    rng: Xoshiro256PlusPlus,
}

impl NoiseSource {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: Xoshiro256PlusPlus::seed_from_u64(seed),
        }
    }

    #[inline]
    pub fn symmetric(&mut self, amplitude: f64) -> f64 {
        amplitude * (2.0 * self.rng.gen::<f64>() - 1.0)
    }

    /// Fills `out` with fresh symmetric noise.
    pub fn fill(&mut self, amplitude: f64, out: &mut [f64]) {
        for v in out {
            *v = self.symmetric(amplitude);
        }
    }
}
