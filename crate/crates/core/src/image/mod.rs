//! Raster images with real-valued working intensities.
//!
//! Intensities live on the 8-bit scale `[0, 255]` but are stored as `f64` so
//! that block means and filtered values are not quantized until an image is
//! written to disk.

mod blur;
mod io;

pub use blur::{gaussian_blur, gaussian_kernel, gaussian_kernel_width, reflect_index};
pub use io::{load_image, save_image, to_bytes};

use crate::error::{Error, Result};

/// Number of representable intensity levels (`k`).
pub const LEVELS: usize = 256;

/// Largest intensity value, `k - 1`.
pub const MAX_INTENSITY: f64 = (LEVELS - 1) as f64;

/// A planar raster: channel `c` occupies `data[c * w * h .. (c + 1) * w * h]`,
/// each plane stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput(format!(
                "image dimensions must be non-zero, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidInput(format!(
                "images must have 1 or 3 channels, got {channels}"
            )));
        }
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(Error::InvalidInput(format!(
                "expected {expected} values for a {width}x{height}x{channels} image, got {}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=MAX_INTENSITY).contains(*v)) {
            return Err(Error::InvalidInput(format!(
                "intensity {bad} outside [0, {MAX_INTENSITY}]"
            )));
        }
        Ok(Image {
            width,
            height,
            channels,
            data,
        })
    }

    /// Builds an image from `f(x, y, channel)`, clamping every value into range.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * channels);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(clamp_intensity(f(x, y, c)));
                }
            }
        }
        Image::new(width, height, channels, data)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Image::from_fn(width, height, channels, |_, _, _| value)
    }

    /// Wraps values produced internally, clamping them into range.
    pub(crate) fn from_raw_clamped(
        width: usize,
        height: usize,
        channels: usize,
        mut data: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(data.len(), width * height * channels);
        for v in &mut data {
            *v = clamp_intensity(*v);
        }
        Image {
            width,
            height,
            channels,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Pixels per channel.
    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn plane(&self, channel: usize) -> &[f64] {
        let n = self.pixel_count();
        &self.data[channel * n..(channel + 1) * n]
    }

    pub fn get(&self, x: usize, y: usize, channel: usize) -> f64 {
        self.data[channel * self.pixel_count() + y * self.width + x]
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub(crate) fn shape_string(&self) -> String {
        format!("{}x{}x{}", self.width, self.height, self.channels)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

/// Clamps into `[0, k - 1]`. NaN maps to 0.
pub fn clamp_intensity(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, MAX_INTENSITY)
    }
}

/// An image reduced to one mean value per `b x b` block and channel.
///
/// Blocks are anchored at the top-left corner; blocks on the right and bottom
/// edges are cropped to the image and average only the pixels they contain.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockGrid {
    block: usize,
    cols: usize,
    rows: usize,
    channels: usize,
    width: usize,
    height: usize,
    /// Channel-major, row-major block means.
    means: Vec<f64>,
}

impl BlockGrid {
    pub fn from_image(img: &Image, block: usize) -> Result<Self> {
        if block == 0 {
            return Err(Error::param("b", "block side must be at least 1"));
        }
        let cols = img.width.div_ceil(block);
        let rows = img.height.div_ceil(block);
        let mut means = Vec::with_capacity(cols * rows * img.channels);
        for c in 0..img.channels {
            let plane = img.plane(c);
            for by in 0..rows {
                let y_end = ((by + 1) * block).min(img.height);
                for bx in 0..cols {
                    let x_end = ((bx + 1) * block).min(img.width);
                    // Mean as first + average offset, so a uniform block
                    // reproduces its value exactly.
                    let first = plane[by * block * img.width + bx * block];
                    let mut offset = 0.0;
                    let mut count = 0usize;
                    for y in by * block..y_end {
                        for x in bx * block..x_end {
                            offset += plane[y * img.width + x] - first;
                            count += 1;
                        }
                    }
                    means.push(clamp_intensity(first + offset / count as f64));
                }
            }
        }
        Ok(BlockGrid {
            block,
            cols,
            rows,
            channels: img.channels,
            width: img.width,
            height: img.height,
            means,
        })
    }

    pub fn block(&self) -> usize {
        self.block
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn means_mut(&mut self) -> &mut [f64] {
        &mut self.means
    }

    pub fn index(&self, col: usize, row: usize, channel: usize) -> usize {
        (channel * self.rows + row) * self.cols + col
    }

    /// Paints every block with its (clamped) value at full resolution.
    pub fn expand(&self) -> Image {
        let (w, h) = (self.width, self.height);
        let mut data = Vec::with_capacity(w * h * self.channels);
        for c in 0..self.channels {
            for y in 0..h {
                let row = y / self.block;
                for x in 0..w {
                    data.push(self.means[self.index(x / self.block, row, c)]);
                }
            }
        }
        Image::from_raw_clamped(w, h, self.channels, data)
    }
}

/// Replaces every `b x b` block with the arithmetic mean of its pixels.
pub fn pixelize(img: &Image, block: usize) -> Result<Image> {
    if block == 1 {
        return Ok(img.clone());
    }
    Ok(BlockGrid::from_image(img, block)?.expand())
}

/// The `k'` admissible intensities `round(j * (k - 1) / (k' - 1))`.
pub fn level_set(levels: usize) -> Result<Vec<f64>> {
    if !(2..=LEVELS).contains(&levels) {
        return Err(Error::param(
            "k_prime",
            format!("level count must be in [2, {LEVELS}], got {levels}"),
        ));
    }
    let step = MAX_INTENSITY / (levels - 1) as f64;
    Ok((0..levels).map(|j| (j as f64 * step).round()).collect())
}

/// Nearest member of a sorted level set; exact midpoints go to the upper level.
pub fn nearest_level(levels: &[f64], v: f64) -> f64 {
    let upper = levels.partition_point(|&l| l < v);
    if upper == 0 {
        return levels[0];
    }
    if upper == levels.len() {
        return levels[levels.len() - 1];
    }
    let (lo, hi) = (levels[upper - 1], levels[upper]);
    if v - lo < hi - v {
        lo
    } else {
        hi
    }
}

/// Snaps every intensity to the nearest member of the `k'`-level set.
pub fn coarsen(img: &Image, levels: usize) -> Result<Image> {
    let set = level_set(levels)?;
    let data = img.data.iter().map(|&v| nearest_level(&set, v)).collect();
    Ok(Image::from_raw_clamped(
        img.width,
        img.height,
        img.channels,
        data,
    ))
}
