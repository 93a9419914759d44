//! Seeded fixtures shared by the benchmarks.

use ndarray::Array2;
use rand_distr::{Distribution, Normal};

use hcx_core::rng::rng_for;

/// `n` rows in `d` dimensions from `k` well-separated Gaussian blobs, with the
/// true blob of every row.
pub fn blobs(n: usize, d: usize, k: usize, seed: u64) -> (Array2<f64>, Vec<i32>) {
    let mut rng = rng_for(seed, "bench/blobs");
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let labels: Vec<i32> = (0..n).map(|i| (i % k) as i32).collect();
    let x = Array2::from_shape_fn((n, d), |(i, j)| {
        let centre = if j % k == labels[i] as usize { 8.0 } else { 0.0 };
        centre + noise.sample(&mut rng)
    });
    (x, labels)
}
