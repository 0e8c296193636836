//! Deterministic random streams.
//!
//! One master seed fans out into independent ChaCha streams addressed by a
//! `(domain, index)` pair, so trial `i` draws the same numbers no matter which
//! worker runs it or in what order.

use crate::scalar::{lit, Cx, Real};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

pub type SimRng = ChaCha12Rng;

/// Stream domains. Kept distinct so that e.g. codebook draws never alias
/// trial draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum Domain {
    Codebook = 1,
    Trial = 2,
    StateEvolution = 3,
    Calibration = 4,
}

pub fn stream(seed: u64, domain: Domain, index: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(((domain as u64) << 48) ^ index);
    rng
}

/// Circularly-symmetric complex Gaussian sample with the given variance.
pub fn complex_normal<R: Real, G: Rng + ?Sized>(rng: &mut G, variance: f64) -> Cx<R> {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Cx::new(lit(re * s), lit(im * s))
}
