//! Seeded random streams and complex Gaussian sampling.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Generator for one (point, trial) cell of a sweep.
///
/// Each cell gets its own ChaCha stream, so results do not depend on how
/// trials are scheduled across threads.
pub fn stream_rng(master: u64, point: u64, trial: u64) -> ChaCha8Rng {
    debug_assert!(trial < 1 << 48 && point < 1 << 16);
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream((point << 48) | trial);
    rng
}

/// CN(0, var): real and imaginary parts each N(0, var/2).
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}
