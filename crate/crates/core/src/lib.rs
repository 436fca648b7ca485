//! Thermodynamic speed limits for linear Langevin systems with even and
//! odd degrees of freedom.

pub mod bounds;
pub mod check;
pub mod config;
pub mod current;
pub mod error;
pub mod langevin;
pub mod linalg;
pub mod mc;
pub mod ot_grid;
pub mod output;
pub mod quadrature;
pub mod scenarios;
pub mod schedule;
pub mod svg;
pub mod transport;
pub mod wasserstein;

pub use error::{Error, Result};
