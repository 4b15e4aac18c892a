//! Seed plumbing shared by the random pieces of the simulator.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Returns the random stream for one Monte-Carlo trial.
///
/// Streams are derived from `(master_seed, trial_index)` only, so trials can
/// run on any thread in any order and still draw identical values.
pub fn trial_rng(master_seed: u64, trial_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial_index);
    rng
}

/// Draws one circularly-symmetric complex Gaussian sample with total
/// variance `var` (split evenly between the real and imaginary parts).
pub(crate) fn draw_cn(rng: &mut impl Rng, var: f64) -> Complex64 {
    let scale = (var * 0.5).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * scale, im * scale)
}
