//! Inputs shared by the benchmarks.

use deptopo_core::samplers::sample_uniform_code;
use deptopo_core::tree::ExtendedPrueferCode;
use deptopo_core::Population;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Uniform random extended codes of size `n`, reproducible from `seed`.
pub fn codes(n: usize, count: usize, seed: u64) -> Vec<ExtendedPrueferCode> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| sample_uniform_code(n, &mut rng).expect("n >= 2")).collect()
}

pub fn population(n: usize, size: usize, seed: u64) -> Population {
    Population::from_codes(codes(n, size, seed)).expect("valid codes")
}
