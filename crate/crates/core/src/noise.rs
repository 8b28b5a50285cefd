//! Counter-keyed random substreams.
//!
//! Every draw is keyed by `(seed, domain, particle, step)`, so the value a
//! particle receives does not depend on update order or thread count, and
//! two systems that share a seed can replay identical Brownian increments.

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;

/// Draws for the initial ensemble.
pub const DOMAIN_INIT: u64 = 0x494e_4954;
/// Draws for Brownian increments.
pub const DOMAIN_BROWNIAN: u64 = 0x4252_4f57;

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for one `(seed, domain, particle, step)` cell.
pub fn substream(seed: u64, domain: u64, particle: u64, step: u64) -> Xoshiro256PlusPlus {
    let key = splitmix(splitmix(splitmix(splitmix(seed) ^ domain) ^ particle) ^ step);
    Xoshiro256PlusPlus::seed_from_u64(key)
}

/// Fills `out` with an `N(0, dt I_d)` increment for particle `particle` at
/// step `step`.
pub fn brownian_increment(seed: u64, particle: usize, step: usize, dt: f64, out: &mut [f64]) {
    let mut rng = substream(seed, DOMAIN_BROWNIAN, particle as u64, step as u64);
    let scale = dt.sqrt();
    for x in out.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *x = scale * z;
    }
}
