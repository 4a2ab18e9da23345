use std::cell::RefCell;

use rand::Rng;
use rayon::prelude::*;

use super::budget::{allocate_budget, BudgetLedger};
use super::{window_state_count, PixelMechanismConfig, BLUR_SIGMA};
use crate::error::{Error, Result};
use crate::image::{gaussian_blur, level_set, BlockGrid, Image};
use crate::metrics::{SsimParams, WindowReference};
use crate::noise::{sample_laplace, stream_rng};

/// Exact output distribution of the exponential mechanism for one window.
///
/// States are indexed in mixed radix over the level set with cell 0 as the
/// most significant digit, so state `s` assigns cell `j` the level
/// `(s / k'^(N-1-j)) % k'`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowDistribution {
    levels: Vec<f64>,
    cells: usize,
    eps_prime: f64,
    qualities: Vec<f64>,
    probabilities: Vec<f64>,
}

impl WindowDistribution {
    pub fn len(&self) -> usize {
        self.qualities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.qualities.is_empty()
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn eps_prime(&self) -> f64 {
        self.eps_prime
    }

    /// Clamped SSIM of every state against the original window.
    pub fn qualities(&self) -> &[f64] {
        &self.qualities
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// Cell values of state `index`.
    pub fn state(&self, index: usize) -> Vec<f64> {
        state_values(index, &self.levels, self.cells)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        inverse_cdf(&self.probabilities, 1.0, rng)
    }
}

fn state_values(mut index: usize, levels: &[f64], cells: usize) -> Vec<f64> {
    let k = levels.len();
    let mut out = vec![0.0; cells];
    for slot in out.iter_mut().rev() {
        *slot = levels[index % k];
        index /= k;
    }
    out
}

/// Writes the clamped window SSIM of every candidate state into `out`.
///
/// Candidates are visited in index order with an odometer over the digits;
/// the power sums of the candidate are kept as prefix sums so that each step
/// only recomputes the digits that changed.
fn fill_qualities(orig: &[f64], levels: &[f64], params: &SsimParams, out: &mut Vec<f64>) -> f64 {
    let cells = orig.len();
    let k = levels.len();
    let reference = WindowReference::new(orig);
    let total = k.pow(cells as u32);
    out.clear();
    out.reserve(total);

    // The odometer runs over all but the last cell; the last cell is swept
    // in a tight inner loop.
    let head = cells - 1;
    let last = orig[head];
    let tail: Vec<(f64, f64, f64)> = levels.iter().map(|&v| (v, v * v, last * v)).collect();
    let mut best = f64::NEG_INFINITY;
    let mut digits = vec![0usize; head];
    let mut sum = vec![0.0; cells];
    let mut sum_sq = vec![0.0; cells];
    let mut sum_cross = vec![0.0; cells];
    let mut from = 0;
    loop {
        for j in from..head {
            let v = levels[digits[j]];
            sum[j + 1] = sum[j] + v;
            sum_sq[j + 1] = sum_sq[j] + v * v;
            sum_cross[j + 1] = sum_cross[j] + orig[j] * v;
        }
        let (s, ss, sc) = (sum[head], sum_sq[head], sum_cross[head]);
        for &(v, vv, ov) in &tail {
            let q = reference
                .score(s + v, ss + vv, sc + ov, params.c1, params.c2)
                .clamp(0.0, 1.0);
            best = best.max(q);
            out.push(q);
        }

        let mut j = head;
        loop {
            if j == 0 {
                debug_assert_eq!(out.len(), total);
                return best;
            }
            j -= 1;
            digits[j] += 1;
            if digits[j] < k {
                break;
            }
            digits[j] = 0;
        }
        from = j;
    }
}

/// Turns qualities into unnormalized weights `exp(eps' * (q - q_max))` in place
/// and returns their sum.
fn exponentiate(weights: &mut [f64], eps_prime: f64, q_max: f64) -> f64 {
    let max_log = eps_prime * q_max;
    let mut total = 0.0;
    for w in weights.iter_mut() {
        let x = eps_prime * *w - max_log;
        // exp underflows to exactly zero below this point.
        *w = if x < -746.0 { 0.0 } else { x.exp() };
        total += *w;
    }
    total
}

fn inverse_cdf<R: Rng + ?Sized>(weights: &[f64], total: f64, rng: &mut R) -> usize {
    let target = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if acc > target {
            return i;
        }
    }
    // Rounding left `target` beyond the accumulated mass.
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Enumerates every `k'`-level candidate for `orig` and computes
/// `Pr(s) ∝ exp(eps' * q(orig, s))`.
pub fn exponential_window_distribution(
    orig: &[f64],
    eps_prime: f64,
    levels: usize,
) -> Result<WindowDistribution> {
    if !(eps_prime.is_finite() && eps_prime >= 0.0) {
        return Err(Error::param(
            "eps_prime",
            format!("must be finite and non-negative, got {eps_prime}"),
        ));
    }
    if orig.is_empty() {
        return Err(Error::InvalidInput("window has no cells".into()));
    }
    let set = level_set(levels)?;
    window_state_count(levels, orig.len())?;
    let mut qualities = Vec::new();
    let q_max = fill_qualities(orig, &set, &SsimParams::default(), &mut qualities);
    let mut probabilities = qualities.clone();
    let total = exponentiate(&mut probabilities, eps_prime, q_max);
    for p in &mut probabilities {
        *p /= total;
    }
    Ok(WindowDistribution {
        levels: set,
        cells: orig.len(),
        eps_prime,
        qualities,
        probabilities,
    })
}

thread_local! {
    static WEIGHTS: RefCell<Vec<f64>> = const { RefCell::new(Vec::new()) };
}

/// Samples one window without materializing a [`WindowDistribution`].
fn sample_window<R: Rng + ?Sized>(
    orig: &[f64],
    eps_prime: f64,
    levels: &[f64],
    params: &SsimParams,
    rng: &mut R,
) -> Vec<f64> {
    WEIGHTS.with(|cell| {
        let mut weights = cell.borrow_mut();
        let q_max = fill_qualities(orig, levels, params, &mut weights);
        let total = exponentiate(&mut weights, eps_prime, q_max);
        let index = inverse_cdf(&weights, total, rng);
        state_values(index, levels, orig.len())
    })
}

/// Exponential-mechanism obfuscation over non-overlapping `p x p` windows of
/// `b x b` blocks, with Laplace noise on blocks outside the tiled region.
///
/// Window `i` (ordered by channel, then window row, then window column) draws
/// from ChaCha stream `i` of `config.seed`; remainder value `r` draws from
/// stream `windows + r`.
pub fn exponential_obfuscate(
    img: &Image,
    config: &PixelMechanismConfig,
) -> Result<(Image, BudgetLedger)> {
    config.validate()?;
    let ledger = allocate_budget(img.width(), img.height(), img.channels(), config)?;
    let mut grid = BlockGrid::from_image(img, config.block)?;
    let levels = level_set(config.levels)?;
    let params = SsimParams::default();
    let p = config.window;
    let across = ledger.covered_width / (p * config.block);
    let down = ledger.covered_height / (p * config.block);
    let per_channel = across * down;

    let windows: Vec<Vec<usize>> = (0..per_channel * img.channels())
        .map(|w| {
            let channel = w / per_channel;
            let (wy, wx) = ((w % per_channel) / across, w % across);
            let mut cells = Vec::with_capacity(p * p);
            for dy in 0..p {
                for dx in 0..p {
                    cells.push(grid.index(wx * p + dx, wy * p + dy, channel));
                }
            }
            cells
        })
        .collect();
    debug_assert_eq!(windows.len(), ledger.applications);

    let samples: Vec<Vec<f64>> = {
        let means = grid.means();
        windows
            .par_iter()
            .enumerate()
            .map(|(i, cells)| {
                let orig: Vec<f64> = cells.iter().map(|&c| means[c]).collect();
                let mut rng = stream_rng(config.seed, i as u64);
                sample_window(&orig, ledger.eps_prime, &levels, &params, &mut rng)
            })
            .collect()
    };
    let means = grid.means_mut();
    for (cells, values) in windows.iter().zip(samples) {
        for (&c, v) in cells.iter().zip(values) {
            means[c] = v;
        }
    }

    if ledger.remainder_values > 0 {
        let scale = ledger.remainder_scale();
        let covered_cols = across * p;
        let covered_rows = down * p;
        let mut stream = windows.len() as u64;
        for channel in 0..grid.channels() {
            for row in 0..grid.rows() {
                for col in 0..grid.cols() {
                    if col < covered_cols && row < covered_rows {
                        continue;
                    }
                    let mut rng = stream_rng(config.seed, stream);
                    stream += 1;
                    let idx = grid.index(col, row, channel);
                    grid.means_mut()[idx] += sample_laplace(&mut rng, scale);
                }
            }
        }
    }

    let out = grid.expand();
    let out = if config.blur {
        gaussian_blur(&out, BLUR_SIGMA)?
    } else {
        out
    };
    Ok((out, ledger))
}
