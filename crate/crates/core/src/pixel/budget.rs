use serde::Serialize;

use super::PixelMechanismConfig;
use crate::error::{Error, Result};

/// Sensitivity of the clamped single-window SSIM quality function.
pub const QUALITY_SENSITIVITY: f64 = 1.0;

/// How a total budget is divided over one exponential-mechanism run.
///
/// The block grid is split into a region tiled by whole `p x p` windows (the
/// largest `w' x h'` pixel area whose sides are multiples of `p * b`) and a
/// remainder of right-hand columns and bottom rows. The budget is shared
/// between the two in proportion to their pixel-channel counts. Each window
/// application then spends `2 * eps_prime * QUALITY_SENSITIVITY` and each
/// remainder value spends `per_value_epsilon`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetLedger {
    pub epsilon: f64,
    pub block: usize,
    pub window: usize,
    pub channels: usize,
    /// Width of the window-tiled region in pixels.
    pub covered_width: usize,
    /// Height of the window-tiled region in pixels.
    pub covered_height: usize,
    /// Number of exponential-mechanism applications (windows x channels).
    pub applications: usize,
    /// Per-application parameter of the exponential mechanism.
    pub eps_prime: f64,
    pub exponential_epsilon: f64,
    /// Block values outside the tiled region, over all channels.
    pub remainder_values: usize,
    pub remainder_epsilon: f64,
    pub per_value_epsilon: f64,
    /// Sequential composition of every application; equals `epsilon`.
    pub total: f64,
}

impl BudgetLedger {
    /// Sum of the privacy cost of every mechanism application.
    pub fn total(&self) -> f64 {
        2.0 * self.eps_prime * QUALITY_SENSITIVITY * self.applications as f64
            + self.per_value_epsilon * self.remainder_values as f64
    }

    /// Laplace scale used for remainder values (per-value sensitivity `k - 1`).
    pub fn remainder_scale(&self) -> f64 {
        crate::image::MAX_INTENSITY / self.per_value_epsilon
    }
}

pub fn allocate_budget(
    width: usize,
    height: usize,
    channels: usize,
    config: &PixelMechanismConfig,
) -> Result<BudgetLedger> {
    config.validate()?;
    if width == 0 || height == 0 || channels == 0 {
        return Err(Error::InvalidInput(format!(
            "cannot allocate a budget for a {width}x{height}x{channels} image"
        )));
    }
    let (b, p) = (config.block, config.window);
    let span = p * b;
    let covered_width = width / span * span;
    let covered_height = height / span * span;
    let applications = covered_width * covered_height * channels / (span * span);

    let cols = width.div_ceil(b);
    let rows = height.div_ceil(b);
    let covered_cells = (covered_width / b) * (covered_height / b);
    let remainder_values = (cols * rows - covered_cells) * channels;

    let share = (covered_width * covered_height) as f64 / (width * height) as f64;
    let exponential_epsilon = config.epsilon * share;
    let remainder_epsilon = config.epsilon - exponential_epsilon;
    let eps_prime = if applications > 0 {
        exponential_epsilon / (2.0 * QUALITY_SENSITIVITY * applications as f64)
    } else {
        0.0
    };
    let per_value_epsilon = if remainder_values > 0 {
        remainder_epsilon / remainder_values as f64
    } else {
        0.0
    };

    let mut ledger = BudgetLedger {
        epsilon: config.epsilon,
        block: b,
        window: p,
        channels,
        covered_width,
        covered_height,
        applications,
        eps_prime,
        exponential_epsilon,
        remainder_values,
        remainder_epsilon,
        per_value_epsilon,
        total: 0.0,
    };
    ledger.total = ledger.total();
    Ok(ledger)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn config(epsilon: f64, b: usize, p: usize) -> PixelMechanismConfig {
        PixelMechanismConfig {
            block: b,
            window: p,
            levels: 2,
            ..PixelMechanismConfig::new(epsilon, 0)
        }
    }

    #[test]
    fn fully_tiled_image_matches_closed_form() {
        let l = allocate_budget(27, 27, 1, &config(90.0, 1, 3)).unwrap();
        assert_eq!(l.applications, 81);
        assert_eq!(l.remainder_values, 0);
        let closed = 90.0 * 9.0 / (2.0 * 729.0);
        assert!((l.eps_prime - closed).abs() < 1e-12);
        assert!((l.eps_prime - 90.0 / 162.0).abs() < 1e-12);
        assert!((l.total - 90.0).abs() < 1e-9);
    }

    #[test]
    fn pixelization_raises_per_window_budget() {
        let l = allocate_budget(54, 54, 1, &config(90.0, 2, 3)).unwrap();
        assert_eq!(l.applications, 81);
        let closed = 90.0 * 9.0 * 4.0 / (2.0 * 2916.0);
        assert!((l.eps_prime - closed).abs() < 1e-12);
    }

    #[test]
    fn remainder_columns_go_to_laplace() {
        let l = allocate_budget(29, 27, 1, &config(90.0, 1, 3)).unwrap();
        assert_eq!((l.covered_width, l.covered_height), (27, 27));
        assert_eq!(l.remainder_values, 54);
        assert_eq!(l.applications, 81);
        assert!((l.exponential_epsilon - 90.0 * 729.0 / 783.0).abs() < 1e-9);
        assert!((l.total - 90.0).abs() < 1e-9);
    }

    #[test]
    fn image_smaller_than_one_window_is_all_remainder() {
        let l = allocate_budget(5, 4, 3, &config(2.0, 2, 3)).unwrap();
        assert_eq!(l.applications, 0);
        assert_eq!(l.remainder_values, 3 * 2 * 3);
        assert!((l.per_value_epsilon - 2.0 / 18.0).abs() < 1e-15);
        assert!((l.total - 2.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn composition_sums_to_epsilon(
            w in 1usize..200, h in 1usize..200, rgb in any::<bool>(),
            b in 1usize..6, p in 1usize..4, log_eps in -3.0f64..6.0,
        ) {
            let eps = 10f64.powf(log_eps);
            let l = allocate_budget(w, h, if rgb { 3 } else { 1 }, &config(eps, b, p)).unwrap();
            prop_assert!((l.total() - eps).abs() <= 1e-9 * eps.max(1.0));
        }
    }
}
