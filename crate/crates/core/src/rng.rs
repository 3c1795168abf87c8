//! Deterministic random streams with hierarchical seed derivation.
//!
//! Every Monte-Carlo draw in the simulator comes from a [`ChaCha8Rng`] whose
//! seed is derived from a master seed plus a list of tags (sweep point,
//! realization index, purpose). Two streams with different tag lists are
//! statistically independent, and a given tag list always yields the same
//! stream, independent of call order or worker count.

use num_complex::Complex;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::Real;

/// Purpose tags keep the sub-streams used by one realization disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamKind {
    Channel,
    Users,
    Data,
    Dither,
    Impairment,
    Noise,
    Generic,
}

impl StreamKind {
    fn tag(self) -> u64 {
        match self {
            StreamKind::Channel => 0x6368616e,
            StreamKind::Users => 0x75736572,
            StreamKind::Data => 0x64617461,
            StreamKind::Dither => 0x64697468,
            StreamKind::Impairment => 0x696d7061,
            StreamKind::Noise => 0x6e6f6973,
            StreamKind::Generic => 0x67656e65,
        }
    }
}

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a master seed and a tag list into a single 64-bit stream seed.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut state = master;
    let mut out = splitmix(&mut state);
    for &t in tags {
        state ^= t.wrapping_mul(0xff51_afd7_ed55_8ccd);
        out ^= splitmix(&mut state);
    }
    out
}

/// A seeded stream for `(master, point, realization, kind)`.
pub fn trial_stream(master: u64, point: u64, realization: u64, kind: StreamKind) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, &[point, realization, kind.tag()]))
}

/// A seeded stream for an explicit tag list.
pub fn tagged_stream(master: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, tags))
}

/// Standard normal draw converted into the working scalar type.
pub fn standard_normal<T: Real, R: Rng>(rng: &mut R) -> T {
    // Box-Muller on the rng's native f64 stream keeps the generic bound thin.
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
    crate::real(z)
}

/// Circularly symmetric complex Gaussian with unit variance (E|z|^2 = 1).
pub fn standard_complex<T: Real, R: Rng>(rng: &mut R) -> Complex<T> {
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    let r = (-u1.ln()).sqrt();
    let phase = 2.0 * std::f64::consts::PI * u2;
    Complex::new(crate::real(r * phase.cos()), crate::real(r * phase.sin()))
}

/// Uniform draw on `(-half, half)` for both rails of a complex sample.
pub fn uniform_complex<T: Real, R: Rng>(rng: &mut R, half: T) -> Complex<T> {
    let a: f64 = rng.random::<f64>() * 2.0 - 1.0;
    let b: f64 = rng.random::<f64>() * 2.0 - 1.0;
    Complex::new(half * crate::real(a), half * crate::real(b))
}
