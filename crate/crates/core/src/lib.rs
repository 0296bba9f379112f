//! Simulation laboratory for optimizer-dependent scaling laws in
//! random-feature regression.
//!
//! The pipeline is: [`datagen`] realizes power-law-spectrum inputs, a ReLU
//! teacher and student feature matrices; [`optim`] trains the linear readout
//! under five preconditioners; [`experiment`] sweeps the grid and persists a
//! results table; [`analysis`] fits scaling exponents from that table; and
//! [`theory`] evaluates the per-mode convergence heuristic in closed form.

pub mod analysis;
pub mod cli;
pub mod datagen;
pub mod error;
pub mod experiment;
pub mod numerics;
pub mod optim;
pub mod theory;

pub use error::{Error, Result};
