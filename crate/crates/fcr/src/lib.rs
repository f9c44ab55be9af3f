//! Functional continuum regression (FCR) for scalar-on-function linear
//! models.
//!
//! The model links a scalar response to the integral of a coefficient
//! function against a random curve. FCR builds a data-adaptive basis of
//! unit-norm weight functions indexed by a continuum parameter
//! `α ∈ [0, 1)`: each weight maximizes a covariance/variance compromise
//! that recovers ordinary least squares at `α = 0`, partial least squares
//! at `α = 1/2`, and principal component regression as `α → 1`. Weights are
//! found in closed ridge form over the eigenfunctions of the deflated
//! covariance operator, leaving a single univariate search over the ridge
//! parameter δ. The pair `(p, α)` is tuned by generalized cross-validation.
//!
//! Crate layout:
//! - [`fgrid`]: grids, quadrature, covariance kernels, eigensystems;
//! - [`continuum`]: the FCR fitter itself;
//! - [`tuning`]: GCV selection of `(p, α)`;
//! - [`baselines`]: independent FPCR / FPLS reference fits;
//! - [`oracle`]: brute-force sphere maximizer used to certify fits;
//! - [`simulate`]: Karhunen–Loève generator and study harnesses;
//! - [`io`]: CSV/JSON formats shared with the `fcr` binary.

pub mod baselines;
pub mod continuum;
pub mod error;
pub mod fgrid;
pub mod io;
pub mod oracle;
pub mod simulate;
mod stats;
pub mod tuning;

pub use error::{FcrError, Result};
pub use fgrid::{CovKernel, Curve, EigenSystem, FunctionalDataset, Grid};
