//! Seeded fixtures shared by the benchmarks.

use ectensor::sim::random_scale_matrix;
use ectensor::{DensityGenerator, EcParams, Matrix, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Parameters with Wishart-drawn scales and a smooth mean.
pub fn params(shape: &[usize], gen: DensityGenerator, seed: u64) -> EcParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scales: Vec<Matrix> = shape.iter().map(|&m| random_scale_matrix(m, &mut rng).unwrap()).collect();
    let mean = Tensor::from_fn(shape, |i| i.iter().enumerate().map(|(k, &v)| ((k + 1) * v) as f64).sum::<f64>().sin());
    EcParams::new(mean, scales, 1.0, gen).unwrap()
}

/// `n` draws from [`params`].
pub fn samples(shape: &[usize], gen: DensityGenerator, n: usize, seed: u64) -> Vec<Tensor> {
    params(shape, gen, seed).sample_seeded(n, seed + 1).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_seeded() {
        let a = samples(&[2, 3], DensityGenerator::Normal, 4, 1);
        assert_eq!(a, samples(&[2, 3], DensityGenerator::Normal, 4, 1));
        assert_eq!(a.len(), 4);
    }
}
