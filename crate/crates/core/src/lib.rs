//! Monocular 5-DoF localization of a downward-facing camera over a floor of
//! equally spaced orthogonal grid lines.

pub mod cli;
pub mod cluster;
pub mod detect;
pub mod error;
pub mod filter;
pub mod geometry;
pub mod grid_model;
pub mod io;
pub mod metrics;
pub mod orientation;
pub mod pipeline;
pub mod simulator;
pub mod solver;
pub mod subcell;
pub mod tracker;
pub mod types;

pub use error::{Error, Result};
pub use types::*;
