use super::{clamp_intensity, Image};
use crate::error::{Error, Result};

/// Normalized 1-D Gaussian weights with radius `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as usize;
    gaussian_kernel_width(sigma, 2 * radius + 1)
}

/// Normalized, centred 1-D Gaussian weights of an explicit odd length.
pub fn gaussian_kernel_width(sigma: f64, len: usize) -> Vec<f64> {
    let radius = (len / 2) as isize;
    let denom = 2.0 * sigma * sigma;
    let mut weights: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / denom).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    weights
}

/// Maps any integer offset into `[0, n)` by mirroring about the edges with the
/// edge sample repeated (`d c b a | a b c d | d c b a`).
pub fn reflect_index(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

/// Separable Gaussian convolution with reflect padding, clamped to the
/// intensity range.
pub fn gaussian_blur(img: &Image, sigma: f64) -> Result<Image> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::param(
            "sigma",
            format!("must be positive, got {sigma}"),
        ));
    }
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as isize;
    let (w, h) = (img.width(), img.height());
    let mut out = Vec::with_capacity(img.data().len());
    let mut tmp = vec![0.0; w * h];
    for c in 0..img.channels() {
        let plane = img.plane(c);
        for y in 0..h {
            let row = &plane[y * w..(y + 1) * w];
            for x in 0..w {
                let mut acc = 0.0;
                for (t, k) in kernel.iter().enumerate() {
                    let sx = reflect_index(x as isize + t as isize - radius, w);
                    acc += k * row[sx];
                }
                tmp[y * w + x] = acc;
            }
        }
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (t, k) in kernel.iter().enumerate() {
                    let sy = reflect_index(y as isize + t as isize - radius, h);
                    acc += k * tmp[sy * w + x];
                }
                out.push(clamp_intensity(acc));
            }
        }
    }
    Ok(Image::from_raw_clamped(w, h, img.channels(), out))
}
