//! Seeded randomness shared by the mechanisms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A ChaCha generator for `seed`, positioned on an independent `stream`.
///
/// Work items that may run in parallel each take their own stream, which makes
/// outputs independent of scheduling.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws from a zero-mean Laplace distribution by inverting its CDF.
pub fn sample_laplace<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> f64 {
    // u in (-1/2, 1/2); 1 - 2|u| is then in (0, 1].
    let u: f64 = loop {
        let u = rng.gen::<f64>() - 0.5;
        if u != -0.5 {
            break u;
        }
    };
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// Natural log of the Laplace density with location `mu` and scale `scale` at `x`.
pub fn laplace_log_density(x: f64, mu: f64, scale: f64) -> f64 {
    -(x - mu).abs() / scale - (2.0 * scale).ln()
}
