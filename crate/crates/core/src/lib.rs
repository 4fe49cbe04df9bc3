//! Factor-based market generator and its evaluation toolkit.
//!
//! The pipeline splits a panel of daily asset returns into a handful of
//! spectral factors and an idiosyncratic remainder:
//!
//! 1. [`panel`] standardizes returns column by column.
//! 2. [`spectral`] eigendecomposes the correlation matrix and keeps the
//!    eigenvalues above the Marchenko-Pastur edge as factors.
//! 3. [`clusters`] rescales the factor series, describes them with five
//!    stylized features and groups them agglomeratively.
//! 4. [`gan`] trains one temporal-convolutional GAN per factor cluster.
//! 5. [`mixture`] fits a univariate Student-t mixture to every residual column.
//! 6. [`generator`] recombines everything into synthetic return panels.
//!
//! [`metrics`], [`portfolio`] and [`bias`] hold the evaluation side: stylized
//! facts, risk measures, mean-reversion backtests, principal-space portfolio
//! algebra and the synthetic-sample-size experiments.
//!
//! The crate is `no_std` (it needs `alloc`). Enabling the `std` feature only
//! switches the matrix kernels to runtime SIMD detection.

#![no_std]
#![deny(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity, clippy::large_enum_variant)]

extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod bias;
pub mod clusters;
pub mod date;
pub mod error;
pub mod gan;
pub mod generator;
pub mod linalg;
pub mod metrics;
pub mod mixture;
pub mod panel;
pub mod portfolio;
pub mod rng;
pub mod sim;
pub mod special;
pub mod spectral;
pub mod stats;

pub use date::Date;
pub use error::{Error, Result};
pub use panel::{ReturnsPanel, StandardizedPanel};

/// Business days per year used for every annualization.
pub const PERIODS_PER_YEAR: usize = 252;
