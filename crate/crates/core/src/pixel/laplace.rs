use rayon::prelude::*;

use super::{PixelMechanismConfig, BLUR_SIGMA};
use crate::error::Result;
use crate::image::{gaussian_blur, BlockGrid, Image, MAX_INTENSITY};
use crate::noise::{sample_laplace, stream_rng};

/// `(k - 1) * n * c / (epsilon * b^2)`.
pub fn laplace_scale(
    config: &PixelMechanismConfig,
    pixels_per_channel: usize,
    channels: usize,
) -> f64 {
    let n = config.sensitive_pixels.unwrap_or(pixels_per_channel) as f64;
    let b = config.block as f64;
    MAX_INTENSITY * n * channels as f64 / (config.epsilon * b * b)
}

/// `len` Laplace draws, one ChaCha stream per row of `row_len` values.
pub fn laplace_noise(len: usize, row_len: usize, scale: f64, seed: u64) -> Vec<f64> {
    let mut out = vec![0.0; len];
    out.par_chunks_mut(row_len.max(1))
        .enumerate()
        .for_each(|(row, chunk)| {
            let mut rng = stream_rng(seed, row as u64);
            for v in chunk {
                *v = sample_laplace(&mut rng, scale);
            }
        });
    out
}

/// Pixelizes, perturbs every block value in every channel with Laplace noise,
/// then clamps to the intensity range.
pub fn laplace_pixel_obfuscate(img: &Image, config: &PixelMechanismConfig) -> Result<Image> {
    config.validate()?;
    let mut grid = BlockGrid::from_image(img, config.block)?;
    let scale = laplace_scale(config, img.pixel_count(), img.channels());
    let noise = laplace_noise(grid.means().len(), grid.cols(), scale, config.seed);
    for (v, n) in grid.means_mut().iter_mut().zip(noise) {
        *v += n;
    }
    let out = grid.expand();
    if config.blur {
        gaussian_blur(&out, BLUR_SIGMA)
    } else {
        Ok(out)
    }
}
