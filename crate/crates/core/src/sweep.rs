//! Utility-versus-budget sweeps.
//!
//! A sweep runs every combination of image, mechanism, epsilon, block size and
//! repetition, and scores each output against its original with SSIM and MSE.
//! Blur is post-processing, so the blurred and unblurred rows of a combination
//! are computed from the same mechanism draw.
//!
//! Draws are numbered in sorted order and draw `d` is seeded with `seed ^ d`,
//! which keeps the output identical for any thread count.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::image::{gaussian_blur, load_image, Image};
use crate::metrics::{mse, ssim_full, SsimParams};
use crate::pixel::{obfuscate, Mechanism, PixelMechanismConfig, BLUR_SIGMA};

pub const CSV_HEADER: [&str; 10] = [
    "image",
    "mechanism",
    "epsilon",
    "b",
    "blur",
    "rep",
    "seed",
    "ssim",
    "mse",
    "ms",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub images: Vec<PathBuf>,
    pub mechanisms: Vec<Mechanism>,
    pub epsilons: Vec<f64>,
    pub blocks: Vec<usize>,
    pub blur: Vec<bool>,
    pub repetitions: usize,
    pub seed: u64,
    pub window: usize,
    pub levels: usize,
    pub sensitive_pixels: Option<usize>,
    /// Record wall time per row; disable for byte-stable output.
    pub timing: bool,
}

impl SweepSpec {
    pub fn new(images: Vec<PathBuf>, epsilons: Vec<f64>, seed: u64) -> Self {
        SweepSpec {
            images,
            mechanisms: vec![Mechanism::Exponential, Mechanism::Laplace],
            epsilons,
            blocks: vec![1],
            blur: vec![false, true],
            repetitions: 1,
            seed,
            window: 3,
            levels: 4,
            sensitive_pixels: None,
            timing: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let empty = |name: &'static str, is_empty: bool| {
            if is_empty {
                Err(Error::param(name, "grid must not be empty"))
            } else {
                Ok(())
            }
        };
        empty("images", self.images.is_empty())?;
        empty("mechanisms", self.mechanisms.is_empty())?;
        empty("epsilons", self.epsilons.is_empty())?;
        empty("blocks", self.blocks.is_empty())?;
        empty("blur", self.blur.is_empty())?;
        if self.repetitions == 0 {
            return Err(Error::param("repetitions", "must be at least 1"));
        }
        for &epsilon in &self.epsilons {
            for &block in &self.blocks {
                PixelMechanismConfig {
                    epsilon,
                    block,
                    window: self.window,
                    levels: self.levels,
                    sensitive_pixels: self.sensitive_pixels,
                    blur: false,
                    seed: self.seed,
                }
                .validate()?;
            }
        }
        Ok(())
    }
}

/// Evenly spaced values in log space, inclusive of both ends.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count)
                .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub image: String,
    pub mechanism: Mechanism,
    pub epsilon: f64,
    pub b: usize,
    pub blur: bool,
    pub rep: usize,
    pub seed: u64,
    /// `None` when the cell failed.
    pub ssim: Option<f64>,
    pub mse: Option<f64>,
    pub ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub records: Vec<SweepRecord>,
    /// `(image, message)` per failure.
    pub failures: Vec<(String, String)>,
}

fn image_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

struct Draw<'a> {
    image: &'a str,
    source: &'a Result<Image, String>,
    mechanism: Mechanism,
    epsilon: f64,
    block: usize,
    rep: usize,
    seed: u64,
}

/// Loads the spec's images and runs the sweep on the current rayon pool.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutcome> {
    spec.validate()?;
    let images: Vec<(String, Result<Image, String>)> = spec
        .images
        .iter()
        .map(|p| (image_id(p), load_image(p).map_err(|e| e.to_string())))
        .collect();
    run_sweep_images(spec, images)
}

/// Runs the sweep on already-loaded images (or load errors, which turn into
/// failed rows).
pub fn run_sweep_images(
    spec: &SweepSpec,
    mut images: Vec<(String, Result<Image, String>)>,
) -> Result<SweepOutcome> {
    spec.validate()?;
    images.sort_by(|a, b| a.0.cmp(&b.0));
    let mut mechanisms = spec.mechanisms.clone();
    mechanisms.sort();
    mechanisms.dedup();
    let mut epsilons = spec.epsilons.clone();
    epsilons.sort_by(f64::total_cmp);
    epsilons.dedup();
    let mut blocks = spec.blocks.clone();
    blocks.sort_unstable();
    blocks.dedup();
    let mut blur = spec.blur.clone();
    blur.sort_unstable();
    blur.dedup();

    let mut draws = Vec::new();
    for (id, source) in &images {
        for &mechanism in &mechanisms {
            for &epsilon in &epsilons {
                for &block in &blocks {
                    for rep in 0..spec.repetitions {
                        let seed = spec.seed ^ draws.len() as u64;
                        draws.push(Draw {
                            image: id,
                            source,
                            mechanism,
                            epsilon,
                            block,
                            rep,
                            seed,
                        });
                    }
                }
            }
        }
    }

    let params = SsimParams::default();
    let rows: Vec<Vec<(SweepRecord, Option<String>)>> = draws
        .par_iter()
        .map(|draw| run_draw(spec, draw, &blur, &params))
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (record, failure) in rows.into_iter().flatten() {
        if let Some(message) = failure {
            failures.push((record.image.clone(), message));
        }
        records.push(record);
    }
    records.sort_by(|a, b| {
        (&a.image, a.mechanism)
            .cmp(&(&b.image, b.mechanism))
            .then(a.epsilon.total_cmp(&b.epsilon))
            .then((a.b, a.blur, a.rep).cmp(&(b.b, b.blur, b.rep)))
    });
    Ok(SweepOutcome { records, failures })
}

fn run_draw(
    spec: &SweepSpec,
    draw: &Draw<'_>,
    blur_flags: &[bool],
    params: &SsimParams,
) -> Vec<(SweepRecord, Option<String>)> {
    let record = |blur: bool| SweepRecord {
        image: draw.image.to_string(),
        mechanism: draw.mechanism,
        epsilon: draw.epsilon,
        b: draw.block,
        blur,
        rep: draw.rep,
        seed: draw.seed,
        ssim: None,
        mse: None,
        ms: None,
    };
    let failed = |message: String| {
        blur_flags
            .iter()
            .map(|&blur| (record(blur), Some(message.clone())))
            .collect()
    };
    let original = match draw.source {
        Ok(img) => img,
        Err(message) => return failed(message.clone()),
    };
    let config = PixelMechanismConfig {
        epsilon: draw.epsilon,
        block: draw.block,
        window: spec.window,
        levels: spec.levels,
        sensitive_pixels: spec.sensitive_pixels,
        blur: false,
        seed: draw.seed,
    };
    let start = Instant::now();
    let noisy = match obfuscate(original, draw.mechanism, &config) {
        Ok(o) => o.image,
        Err(e) => return failed(e.to_string()),
    };
    let mechanism_time = start.elapsed();

    blur_flags
        .iter()
        .map(|&blur| {
            let post = Instant::now();
            let scored = (if blur {
                gaussian_blur(&noisy, BLUR_SIGMA)
            } else {
                Ok(noisy.clone())
            })
            .and_then(|out| Ok((ssim_full(original, &out, params)?, mse(original, &out)?)));
            let elapsed = mechanism_time + post.elapsed();
            let mut r = record(blur);
            match scored {
                Ok((s, m)) => {
                    r.ssim = Some(s);
                    r.mse = Some(m);
                    r.ms = spec.timing.then_some(elapsed.as_secs_f64() * 1e3);
                    (r, None)
                }
                Err(e) => (r, Some(e.to_string())),
            }
        })
        .collect()
}

/// Writes the fixed-header CSV. Failed metrics and disabled timings are empty.
pub fn write_csv<W: Write>(records: &[SweepRecord], out: W) -> Result<()> {
    let to_err = |e: csv::Error| Error::InvalidInput(format!("writing CSV: {e}"));
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(CSV_HEADER).map_err(to_err)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in records {
        writer
            .write_record([
                r.image.clone(),
                r.mechanism.to_string(),
                r.epsilon.to_string(),
                r.b.to_string(),
                if r.blur { "on" } else { "off" }.to_string(),
                r.rep.to_string(),
                r.seed.to_string(),
                opt(r.ssim),
                opt(r.mse),
                r.ms.map(|m| format!("{m:.3}")).unwrap_or_default(),
            ])
            .map_err(to_err)?;
    }
    writer
        .flush()
        .map_err(|e| Error::InvalidInput(format!("writing CSV: {e}")))
}

/// Configuration key for aggregating repetitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct CellKey {
    pub mechanism: Mechanism,
    pub epsilon_bits: u64,
    pub b: usize,
    pub blur: bool,
}

impl CellKey {
    pub fn epsilon(&self) -> f64 {
        f64::from_bits(self.epsilon_bits)
    }
}

/// Mean SSIM and MSE over repetitions (and images) per configuration, skipping
/// failed rows.
pub fn summarize(records: &[SweepRecord]) -> BTreeMap<CellKey, (f64, f64)> {
    let mut acc: BTreeMap<CellKey, (f64, f64, usize)> = BTreeMap::new();
    for r in records {
        let (Some(s), Some(m)) = (r.ssim, r.mse) else {
            continue;
        };
        let key = CellKey {
            mechanism: r.mechanism,
            epsilon_bits: r.epsilon.to_bits(),
            b: r.b,
            blur: r.blur,
        };
        let e = acc.entry(key).or_insert((0.0, 0.0, 0));
        e.0 += s;
        e.1 += m;
        e.2 += 1;
    }
    acc.into_iter()
        .map(|(k, (s, m, n))| (k, (s / n as f64, m / n as f64)))
        .collect()
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            out[o] = rank;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    cov / (vx * vy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient() -> Image {
        Image::from_fn(16, 16, 1, |x, y, _| (x * 12 + y * 4) as f64).unwrap()
    }

    fn spec() -> SweepSpec {
        SweepSpec {
            mechanisms: vec![Mechanism::Laplace],
            blocks: vec![1, 2],
            blur: vec![false],
            repetitions: 2,
            timing: false,
            ..SweepSpec::new(vec![PathBuf::from("g.pgm")], vec![1.0, 10.0, 100.0], 7)
        }
    }

    #[test]
    fn log_spacing() {
        let v = log_spaced(1.0, 1000.0, 4);
        for (a, b) in v.iter().zip([1.0, 10.0, 100.0, 1000.0]) {
            assert!((a - b).abs() < 1e-9 * b);
        }
    }

    #[test]
    fn row_count_and_order() {
        let out = run_sweep_images(&spec(), vec![("g".into(), Ok(gradient()))]).unwrap();
        assert_eq!(out.records.len(), 3 * 2 * 2);
        assert!(out.failures.is_empty());
        let keys: Vec<_> = out
            .records
            .iter()
            .map(|r| (r.epsilon, r.b, r.rep))
            .collect();
        let mut sorted = keys.clone();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
        assert_eq!(keys, sorted);
        assert!(out.records.iter().all(|r| r.ms.is_none()));
    }

    #[test]
    fn blur_rows_share_a_draw() {
        let s = SweepSpec {
            blur: vec![true, false],
            ..spec()
        };
        let out = run_sweep_images(&s, vec![("g".into(), Ok(gradient()))]).unwrap();
        assert_eq!(out.records.len(), 24);
        for pair in out.records.chunks(4) {
            // Sorted (b, blur, rep): off rep0, off rep1, on rep0, on rep1.
            assert_eq!(pair[0].seed, pair[2].seed);
            assert_eq!(pair[1].seed, pair[3].seed);
            assert!(!pair[0].blur && pair[2].blur);
        }
    }

    #[test]
    fn failed_image_yields_empty_rows() {
        let out = run_sweep_images(
            &spec(),
            vec![
                ("g".into(), Ok(gradient())),
                ("missing".into(), Err("no such file".into())),
            ],
        )
        .unwrap();
        assert_eq!(out.records.len(), 24);
        assert_eq!(out.failures.len(), 12);
        let mut csv = Vec::new();
        write_csv(&out.records, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("image,mechanism,epsilon,b,blur,rep,seed,ssim,mse,ms\n"));
        assert!(text
            .lines()
            .any(|l| l.starts_with("missing,") && l.ends_with(",,,")));
    }

    #[test]
    fn spec_validation() {
        assert!(SweepSpec {
            repetitions: 0,
            ..spec()
        }
        .validate()
        .is_err());
        assert!(SweepSpec {
            epsilons: vec![],
            ..spec()
        }
        .validate()
        .is_err());
        assert!(SweepSpec {
            epsilons: vec![-1.0],
            ..spec()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn spearman_examples() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), 1.0);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), -1.0);
        let rho = spearman(
            &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            &[1.0, 3.0, 2.0, 4.0, 5.0, 6.0],
        );
        assert!((rho - (1.0 - 6.0 * 2.0 / 210.0)).abs() < 1e-12);
    }
}
