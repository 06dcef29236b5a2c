//! Quantitative stratification toolkit for singular harmonic maps and
//! minimal hypersurfaces.
//!
//! The crate evaluates, on explicit model maps and surfaces, the quantities
//! that drive the effective-strata volume estimates: the normalized energy
//! `θ_r`, homogeneity defects, effective strata with their covering counts,
//! regularity scales with `L^p` sweeps, and the corresponding objects for
//! hypersurfaces such as the Simons cone.

pub mod catalog;
pub mod config;
pub mod currents;
pub mod energy;
pub mod error;
pub mod geom;
pub mod homogeneity;
pub mod models;
pub mod quadrature;
pub mod regularity;
pub mod report;
pub mod scenario;
pub mod stratification;

pub use config::AnalysisConfig;
pub use error::{Error, Result};
pub use models::{ManifoldMap, MapKernel};
