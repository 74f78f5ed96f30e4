//! Shared inputs for the benchmarks.

use paraproj::SeedStream;

/// `len` samples uniform on `[-1, 1)`.
pub fn random_signal(len: usize, seed: u64) -> Vec<f64> {
    let mut s = SeedStream::new(seed);
    (0..len).map(|_| 2.0 * s.uniform_unit() - 1.0).collect()
}

/// `count` blocks of `m` samples.
pub fn random_blocks(m: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    random_signal(m * count, seed)
        .chunks(m)
        .map(<[f64]>::to_vec)
        .collect()
}
