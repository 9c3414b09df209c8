//! Per-trial random streams and complex Gaussian sampling.
//!
//! Every trial draws from its own ChaCha stream addressed by
//! `(master seed, stream id)`, so trials can run on any worker in any order
//! and still reproduce bit-for-bit.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type TrialRng = ChaCha8Rng;

/// Stream for trial `trial` of sweep point `point`.
pub fn stream_id(point: u32, trial: u32) -> u64 {
    ((point as u64) << 32) | trial as u64
}

pub fn trial_rng(master_seed: u64, stream: u64) -> TrialRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// CN(0, 1): two independent real normals, each scaled by 1/sqrt(2).
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Uniform draw on [-1, 1].
pub fn uniform_pm1<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    2.0 * rng.random::<f64>() - 1.0
}
