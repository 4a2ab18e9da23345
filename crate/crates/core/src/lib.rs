//! Differentially private obfuscation of images and bounded feature vectors.
//!
//! The crate is organised around the data it protects:
//!
//! - [`image`]: the raster type, PNG/PGM/PPM I/O, pixelization, intensity
//!   coarsening and Gaussian blur.
//! - [`metrics`]: SSIM (sliding-window and single-window) and MSE.
//! - [`pixel`]: pixel-space mechanisms. A Laplace baseline and an exponential
//!   mechanism that scores candidate windows with SSIM.
//! - [`vector`]: the Laplace mechanism for vectors with known per-element
//!   ranges, the matching distance metric, and a k-same baseline together
//!   with an intersection attack against it.
//! - [`identity`]: least-absolute-deviations fitting of a target vector as a
//!   weighted sum of gallery vectors.
//! - [`sweep`]: the utility-versus-budget experiment harness.
//!
//! All stochastic operations take an explicit 64-bit seed. Work that runs in
//! parallel draws from per-item ChaCha streams, so results do not depend on
//! the size of the rayon thread pool.

pub mod error;
pub mod identity;
pub mod image;
pub mod metrics;
pub mod noise;
pub mod pixel;
pub mod sweep;
pub mod vector;

pub use error::{Error, Result};
pub use image::{BlockGrid, Image};
pub use metrics::SsimParams;
pub use pixel::{BudgetLedger, Mechanism, PixelMechanismConfig, WindowDistribution};
pub use vector::{BoundedVector, ClusterAssignment, ValueRange};
