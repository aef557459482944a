//! Deterministic sub-stream derivation.
//!
//! Every random stream in a run is keyed by `(master seed, label, indices)`.
//! Streams never share state, so trials can run on any number of workers and
//! still reproduce bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used everywhere in the crate.
pub type StreamRng = ChaCha8Rng;

const fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derives a 64-bit seed for the stream named `label` under `master`.
pub fn derive(master: u64, label: &str, indices: &[u64]) -> u64 {
    let mut s = splitmix64(master ^ splitmix64(fnv1a(label)));
    for &i in indices {
        s = splitmix64(s ^ splitmix64(i.wrapping_add(0x632b_e59b_d9b4_e019)));
    }
    s
}

/// Opens the stream named `label` under `master`.
pub fn stream(master: u64, label: &str, indices: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive(master, label, indices))
}
