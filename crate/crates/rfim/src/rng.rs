//! Counter-based random streams. Every draw is keyed by
//! (master seed, domain, replication index), and per-site Gaussian draws are
//! additionally keyed by site index through random access into the ChaCha
//! counter, so parallel replications reproduce bit-identically regardless of
//! scheduling or worker count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent usage domains. Distinct salts keep e.g. field sampling and
/// subset resampling decorrelated even at equal replication indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Field,
    FieldPrime,
    Resample,
    Interpolant,
    Scratch,
}

impl Domain {
    fn salt(self) -> u64 {
        match self {
            Domain::Field => 0x5261_6e64_4669_656c,
            Domain::FieldPrime => 0x4669_656c_6450_7269,
            Domain::Resample => 0x5265_7361_6d70_6c65,
            Domain::Interpolant => 0x496e_7465_7270_6f6c,
            Domain::Scratch => 0x5363_7261_7463_6801,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream for one (master, domain, replication) triple. Draws are sequential.
pub fn stream(master: u64, domain: Domain, rep: u64) -> ChaCha8Rng {
    let mut state = master ^ domain.salt();
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(rep);
    rng
}

/// 64-bit seed recorded in outputs for one replication.
pub fn derived_seed(master: u64, rep: u64) -> u64 {
    let mut state = master ^ rep.wrapping_mul(0xA076_1D64_78BD_642F);
    splitmix64(&mut state)
}

// ChaCha word budget per site: 2 u64 draws = 4 words.
const WORDS_PER_SITE: u128 = 4;

/// Standard normal keyed by site index: random access into the stream
/// counter followed by a fixed-consumption Box-Muller draw.
pub fn site_normal(stream: &mut ChaCha8Rng, site_index: usize) -> f64 {
    stream.set_word_pos(site_index as u128 * WORDS_PER_SITE);
    let u1 = unit_open(stream.gen::<u64>());
    let u2 = unit_open(stream.gen::<u64>());
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Sequential standard normal (same Box-Muller branch, two u64 of input).
pub fn next_normal(stream: &mut ChaCha8Rng) -> f64 {
    let u1 = unit_open(stream.gen::<u64>());
    let u2 = unit_open(stream.gen::<u64>());
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

// 53-bit mantissa mapped into the open interval (0,1).
fn unit_open(x: u64) -> f64 {
    ((x >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0)
}
