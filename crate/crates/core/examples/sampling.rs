//! Draw correlated background errors and compare their sample covariance with the model.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use varcond::covariance::{dense_covariance, CorrelationSpec, Sampler};

fn main() -> varcond::Result<()> {
    let spec = CorrelationSpec::new(1.0, 4, 3.0, 1.0, 64)?;
    let sampler = Sampler::new(&spec);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let draws = 20_000;
    let n = spec.size;
    let mut cov = vec![0.0; n];
    for _ in 0..draws {
        let x = sampler.sample(&mut rng);
        for (lag, c) in cov.iter_mut().enumerate() {
            *c += x[0] * x[lag];
        }
    }
    let exact = dense_covariance(&spec)?;
    println!("{:>4} {:>9} {:>9}", "lag", "sample", "model");
    for lag in 0..12 {
        println!("{lag:>4} {:>9.4} {:>9.4}", cov[lag] / draws as f64, exact[(0, lag)]);
    }
    Ok(())
}
