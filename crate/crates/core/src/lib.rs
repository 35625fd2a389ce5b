//! Semiparametric spot-volatility estimation for one-dimensional diffusions.
//!
//! The squared diffusion coefficient is approximated locally by a quadratic in
//! the state, which turns the volatility into the unobserved component of a
//! locally bilinear system. Its conditional moments are available in closed
//! form, so the volatility path can be filtered recursively from discrete
//! observations ([`volfilter`]). Drift parameters come from least squares and
//! the curvature nuisance parameter from quasi maximum likelihood
//! ([`estimation`]). [`baselines`] holds the local linear kernel estimator and
//! realized / integrated volatility; [`experiments`] runs the simulation studies.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod error;
pub mod estimation;
pub mod experiments;
pub mod io;
pub mod presets;
pub mod sde;
pub mod volfilter;

pub use error::{Error, Result};
pub use sde::{Diffusion, ModelSpec, Path, SimConfig};
pub use volfilter::{EstimateSeries, FilterParams, FilterState, MomentPair};
