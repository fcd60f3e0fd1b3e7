//! Lamb shifts of multi-level atoms embedded in inverse-opal photonic crystals.

pub mod atom;
pub mod bands;
pub mod constants;
pub mod crystal;
pub mod ensemble;
pub mod error;
pub mod lsrf;
pub mod quadrature;
pub mod solver;

pub use error::{Error, Result};
