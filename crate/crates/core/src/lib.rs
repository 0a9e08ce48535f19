//! Outlier-resistant estimation of a finite population mean.
//!
//! Units follow the superpopulation model `y_i | θ ~ N(θ a_i, σ_i²)` with a flat
//! prior on `θ`. Given a sample, the crate computes
//!
//! - the classical (posterior mean / BLUP) estimator of the population mean,
//! - a clipped "limited translation" estimator that winsorizes standardized
//!   residuals at `±C` around the pooled estimate,
//! - predictive influence diagnostics based on power divergences between the
//!   full and delete-one posterior predictive distributions,
//! - the model MSE of the clipped estimator and calibration of `C` from an
//!   excess-risk budget,
//! - a seeded Monte Carlo harness for checking all of the above.
//!
//! ```
//! use robust_fps::model::PopulationFrame;
//! use robust_fps::robust::{robust_estimate, RobustConfig};
//!
//! let frame = PopulationFrame::from_columns(
//!     &[1.0; 5],
//!     &[1.0; 5],
//!     &[Some(0.0), Some(0.0), Some(3.0), None, None],
//! )
//! .unwrap();
//! let est = robust_estimate(&frame, &RobustConfig::fixed(1.0)).unwrap();
//! assert!((est.ybar_p_r - 0.891134).abs() < 1e-6);
//! ```

pub mod divergence;
pub mod error;
pub mod model;
pub mod normal;
pub mod risk;
pub mod rng;
pub mod robust;
pub mod sim;
pub mod stats;

#[cfg(feature = "cli")]
pub mod cli;

pub use error::{Error, Result};
