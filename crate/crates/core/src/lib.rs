//! Constraint-system games: CSP modeling and Schaefer classification,
//! two-variable-falsifiable (TVF) graph analysis and gadget compilation,
//! game transformations, exact classical values, and numerical evaluation of
//! synchronous quantum strategies and their defects.

pub mod cli;
pub mod cs;
pub mod error;
pub mod gadgets;
pub mod games;
pub mod quantum;
pub mod schaefer;
pub mod tvf;

pub use error::{Error, Result};
