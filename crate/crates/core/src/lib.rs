//! Basic reproduction numbers of continuously structured population models
//! whose newborns appear at a single state.
//!
//! R₀ is obtained as the limit of the spectral radii of rank-one
//! next-generation operators `BₖM⁻¹`, `Bₖu = (Lu)φₖ`, as the offspring
//! densities φₖ concentrate at the birth state. The limit equals `L G(·, x₀)`
//! with `G` the Green's function of the mortality/transition operator `M`.
//!
//! Modules:
//! - [`model`]: model specification, vital rates, concentrating families.
//! - [`greens`]: closed-form Green's functions and `M⁻¹φₖ`.
//! - [`heatkernel`]: time-domain kernels of the age–diffusion semigroup.
//! - [`discrete`]: finite-volume discretisation of `M` and its inverse.
//! - [`nextgen`]: R₀,ₖ, its extrapolated limit, finite-rank and bound variants.
//! - [`analytic`]: closed-form R₀ for the solvable models.
//! - [`semigroup`]: time stepping and Malthusian growth estimates.
//! - [`acceptance`]: the cross-route validation suite.

// `!(x > 0.0)` rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod analytic;
pub mod cli;
pub mod discrete;
pub mod error;
pub mod greens;
pub mod heatkernel;
pub mod model;
pub mod nextgen;
pub mod quad;
pub mod semigroup;

pub use error::{Error, Result};
pub use model::{validate_model, ModelSpec, MollifierFamily, MollifierKind, RateFunction};
