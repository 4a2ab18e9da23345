//! Pixel-space mechanisms.
//!
//! Both mechanisms first pixelize the image into `b x b` blocks and then
//! randomize one value per block and channel:
//!
//! - [`laplace_pixel_obfuscate`] adds Laplace noise scaled to the sensitivity
//!   of a window of `n` changed pixels.
//! - [`exponential_obfuscate`] tiles the block grid into non-overlapping
//!   `p x p` windows and samples each window from the exponential mechanism
//!   over `k'`-level candidates, scored by single-window SSIM. Blocks outside
//!   the tiled region fall back to per-value Laplace noise.
//!
//! [`allocate_budget`] splits the total budget between the two regions so the
//! sequentially composed guarantee is exactly `epsilon`.

mod budget;
mod exponential;
mod laplace;

pub use budget::{allocate_budget, BudgetLedger, QUALITY_SENSITIVITY};
pub use exponential::{exponential_obfuscate, exponential_window_distribution, WindowDistribution};
pub use laplace::{laplace_noise, laplace_pixel_obfuscate, laplace_scale};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Image, LEVELS};

/// Upper bound on `k'^(p^2)`, the candidate count per window.
pub const MAX_WINDOW_STATES: u64 = 1 << 24;

/// Standard deviation of the optional post-processing blur.
pub const BLUR_SIGMA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    Exponential,
    Laplace,
}

impl Mechanism {
    pub fn name(self) -> &'static str {
        match self {
            Mechanism::Exponential => "exponential",
            Mechanism::Laplace => "laplace",
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp" | "exponential" => Ok(Mechanism::Exponential),
            "laplace" => Ok(Mechanism::Laplace),
            other => Err(Error::param(
                "mechanism",
                format!("expected `exp` or `laplace`, got `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelMechanismConfig {
    /// Total privacy budget for the image.
    pub epsilon: f64,
    /// Pixelization block side `b`.
    pub block: usize,
    /// Exponential-mechanism window side `p`, in blocks.
    pub window: usize,
    /// Candidate intensity levels `k'`.
    pub levels: usize,
    /// Adjacency window `n` of the Laplace mechanism; `None` means every pixel
    /// of a channel.
    pub sensitive_pixels: Option<usize>,
    /// Apply a sigma = 1 Gaussian blur after obfuscation.
    pub blur: bool,
    pub seed: u64,
}

impl PixelMechanismConfig {
    pub fn new(epsilon: f64, seed: u64) -> Self {
        PixelMechanismConfig {
            epsilon,
            block: 1,
            window: 3,
            levels: 4,
            sensitive_pixels: None,
            blur: false,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::param(
                "epsilon",
                format!("must be positive and finite, got {}", self.epsilon),
            ));
        }
        if self.block == 0 {
            return Err(Error::param("b", "block side must be at least 1"));
        }
        if self.window == 0 {
            return Err(Error::param("p", "window side must be at least 1"));
        }
        if !(2..=LEVELS).contains(&self.levels) {
            return Err(Error::param(
                "k_prime",
                format!("level count must be in [2, {LEVELS}], got {}", self.levels),
            ));
        }
        window_state_count(self.levels, self.window * self.window)?;
        if self.sensitive_pixels == Some(0) {
            return Err(Error::param("sensitive_pixels", "must be at least 1"));
        }
        Ok(())
    }
}

/// `levels^cells`, rejected above [`MAX_WINDOW_STATES`].
pub(crate) fn window_state_count(levels: usize, cells: usize) -> Result<usize> {
    let count = u32::try_from(cells)
        .ok()
        .and_then(|c| (levels as u64).checked_pow(c))
        .filter(|&n| n <= MAX_WINDOW_STATES)
        .ok_or_else(|| {
            Error::param(
                "k_prime^(p^2)",
                format!(
                    "{levels}^{cells} candidate states exceeds the limit of {MAX_WINDOW_STATES}"
                ),
            )
        })?;
    Ok(count as usize)
}

/// Privacy accounting reported alongside an obfuscated image.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "mechanism", rename_all = "lowercase")]
pub enum Accounting {
    Exponential(BudgetLedger),
    Laplace {
        epsilon: f64,
        scale: f64,
        sensitive_pixels: usize,
        values: usize,
    },
}

impl Accounting {
    /// Composed privacy parameter of the whole release.
    pub fn total_epsilon(&self) -> f64 {
        match self {
            Accounting::Exponential(ledger) => ledger.total(),
            Accounting::Laplace { epsilon, .. } => *epsilon,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Obfuscation {
    pub image: Image,
    pub accounting: Accounting,
}

/// Runs either mechanism with the same configuration.
pub fn obfuscate(
    img: &Image,
    mechanism: Mechanism,
    config: &PixelMechanismConfig,
) -> Result<Obfuscation> {
    match mechanism {
        Mechanism::Exponential => {
            let (image, ledger) = exponential_obfuscate(img, config)?;
            Ok(Obfuscation {
                image,
                accounting: Accounting::Exponential(ledger),
            })
        }
        Mechanism::Laplace => {
            let image = laplace_pixel_obfuscate(img, config)?;
            let grid_values = img.width().div_ceil(config.block)
                * img.height().div_ceil(config.block)
                * img.channels();
            Ok(Obfuscation {
                image,
                accounting: Accounting::Laplace {
                    epsilon: config.epsilon,
                    scale: laplace_scale(config, img.pixel_count(), img.channels()),
                    sensitive_pixels: config.sensitive_pixels.unwrap_or(img.pixel_count()),
                    values: grid_values,
                },
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        let ok = PixelMechanismConfig::new(1.0, 0);
        assert!(ok.validate().is_ok());
        for bad in [
            PixelMechanismConfig { epsilon: 0.0, ..ok },
            PixelMechanismConfig {
                epsilon: f64::INFINITY,
                ..ok
            },
            PixelMechanismConfig { block: 0, ..ok },
            PixelMechanismConfig { window: 0, ..ok },
            PixelMechanismConfig { levels: 1, ..ok },
            PixelMechanismConfig { window: 5, ..ok },
            PixelMechanismConfig {
                sensitive_pixels: Some(0),
                ..ok
            },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
        // 4^12 = 2^24 sits exactly on the guard.
        assert_eq!(window_state_count(4, 12).unwrap(), 1 << 24);
        assert!(window_state_count(4, 13).is_err());
        assert_eq!(window_state_count(4, 9).unwrap(), 262_144);
    }

    #[test]
    fn mechanism_parsing() {
        assert_eq!("exp".parse::<Mechanism>().unwrap(), Mechanism::Exponential);
        assert_eq!("laplace".parse::<Mechanism>().unwrap(), Mechanism::Laplace);
        assert!("gauss".parse::<Mechanism>().is_err());
    }
}
