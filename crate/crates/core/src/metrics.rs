//! SSIM and MSE.
//!
//! [`ssim_full`] is the usual Gaussian-weighted 11x11 sliding-window SSIM,
//! averaged over valid window positions and channels. [`ssim_window`] scores a
//! single window with uniform weights; the exponential mechanism uses it as its
//! quality function, clamped to `[0, 1]` so that its sensitivity is exactly 1.

use crate::error::{Error, Result};
use crate::image::{gaussian_kernel_width, Image, MAX_INTENSITY};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimParams {
    /// Odd window side, at least 3.
    pub window: usize,
    /// Standard deviation of the Gaussian weighting in [`ssim_full`].
    pub gaussian_sigma: f64,
    pub c1: f64,
    pub c2: f64,
    /// Dynamic range `L = k - 1`.
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        let l = MAX_INTENSITY;
        SsimParams {
            window: 11,
            gaussian_sigma: 1.5,
            c1: (0.01 * l).powi(2),
            c2: (0.03 * l).powi(2),
            dynamic_range: l,
        }
    }
}

impl SsimParams {
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(Error::param(
                "window",
                format!("SSIM window must be odd and >= 3, got {}", self.window),
            ));
        }
        if !(self.gaussian_sigma.is_finite() && self.gaussian_sigma > 0.0) {
            return Err(Error::param("gaussian_sigma", "must be positive"));
        }
        if !(self.c1 > 0.0 && self.c2 > 0.0) {
            return Err(Error::param("c1/c2", "stabilizers must be positive"));
        }
        Ok(())
    }
}

/// SSIM from window statistics: means, variances and covariance.
#[inline]
pub(crate) fn ssim_from_stats(
    mean_a: f64,
    mean_b: f64,
    var_a: f64,
    var_b: f64,
    cov: f64,
    c1: f64,
    c2: f64,
) -> f64 {
    ((2.0 * mean_a * mean_b + c1) * (2.0 * cov + c2))
        / ((mean_a * mean_a + mean_b * mean_b + c1) * (var_a + var_b + c2))
}

fn check_same_shape(a: &Image, b: &Image) -> Result<()> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "image dimensions differ: {} vs {}",
            a.shape_string(),
            b.shape_string()
        )))
    }
}

/// Horizontal then vertical "valid" filtering with a 1-D kernel.
fn filter_valid(plane: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let win = kernel.len();
    let ow = w + 1 - win;
    let oh = h + 1 - win;
    let mut horiz = vec![0.0; ow * h];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..ow {
            horiz[y * ow + x] = kernel
                .iter()
                .zip(&row[x..x + win])
                .map(|(k, v)| k * v)
                .sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = kernel
                .iter()
                .enumerate()
                .map(|(t, k)| k * horiz[(y + t) * ow + x])
                .sum();
        }
    }
    out
}

/// Mean SSIM over every valid window position of every channel.
pub fn ssim_full(a: &Image, b: &Image, params: &SsimParams) -> Result<f64> {
    params.validate()?;
    check_same_shape(a, b)?;
    let (w, h) = (a.width(), a.height());
    if w < params.window || h < params.window {
        return Err(Error::InvalidInput(format!(
            "image {}x{} is smaller than the {}x{} SSIM window",
            w, h, params.window, params.window
        )));
    }
    let kernel = gaussian_kernel_width(params.gaussian_sigma, params.window);
    let mut total = 0.0;
    let mut count = 0usize;
    for c in 0..a.channels() {
        let pa = a.plane(c);
        let pb = b.plane(c);
        let sq_a: Vec<f64> = pa.iter().map(|v| v * v).collect();
        let sq_b: Vec<f64> = pb.iter().map(|v| v * v).collect();
        let prod: Vec<f64> = pa.iter().zip(pb).map(|(x, y)| x * y).collect();
        let mu_a = filter_valid(pa, w, h, &kernel);
        let mu_b = filter_valid(pb, w, h, &kernel);
        let e_aa = filter_valid(&sq_a, w, h, &kernel);
        let e_bb = filter_valid(&sq_b, w, h, &kernel);
        let e_ab = filter_valid(&prod, w, h, &kernel);
        for i in 0..mu_a.len() {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            total += ssim_from_stats(
                ma,
                mb,
                e_aa[i] - ma * ma,
                e_bb[i] - mb * mb,
                e_ab[i] - ma * mb,
                params.c1,
                params.c2,
            );
        }
        count += mu_a.len();
    }
    Ok(total / count as f64)
}

/// Moments of a reference window, shared across the candidates scored
/// against it.
#[derive(Debug, Clone, Copy)]
pub(crate) struct WindowReference {
    pub(crate) mean: f64,
    pub(crate) var: f64,
    inv_len: f64,
}

impl WindowReference {
    pub(crate) fn new(values: &[f64]) -> Self {
        let len = values.len() as f64;
        let mean = values.iter().sum::<f64>() / len;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / len;
        WindowReference {
            mean,
            var,
            inv_len: 1.0 / len,
        }
    }

    /// Raw SSIM from candidate power sums `sum c`, `sum c^2` and `sum o*c`.
    #[inline]
    pub(crate) fn score(&self, sum: f64, sum_sq: f64, sum_cross: f64, c1: f64, c2: f64) -> f64 {
        let mean_c = sum * self.inv_len;
        let var_c = (sum_sq * self.inv_len - mean_c * mean_c).max(0.0);
        let cov = sum_cross * self.inv_len - self.mean * mean_c;
        ssim_from_stats(self.mean, mean_c, self.var, var_c, cov, c1, c2)
    }
}

/// Single-window SSIM with uniform weights and population variance, unclamped.
pub fn ssim_window_raw(orig: &[f64], cand: &[f64], params: &SsimParams) -> Result<f64> {
    if orig.len() != cand.len() || orig.is_empty() {
        return Err(Error::InvalidInput(format!(
            "window lengths differ or are empty: {} vs {}",
            orig.len(),
            cand.len()
        )));
    }
    let reference = WindowReference::new(orig);
    let (mut sum, mut sum_sq, mut sum_cross) = (0.0, 0.0, 0.0);
    for (o, c) in orig.iter().zip(cand) {
        sum += c;
        sum_sq += c * c;
        sum_cross += o * c;
    }
    Ok(reference.score(sum, sum_sq, sum_cross, params.c1, params.c2))
}

/// Single-window SSIM clamped to `[0, 1]`; the exponential mechanism's quality
/// function.
pub fn ssim_window(orig: &[f64], cand: &[f64], params: &SsimParams) -> Result<f64> {
    Ok(ssim_window_raw(orig, cand, params)?.clamp(0.0, 1.0))
}

/// Mean squared difference over every pixel and channel.
pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    check_same_shape(a, b)?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum / a.data().len() as f64)
}
