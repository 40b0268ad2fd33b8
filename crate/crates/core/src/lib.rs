//! Conditioning and convergence of B-preconditioned conjugate gradient for 1D variational
//! data assimilation with diffusion-modelled (AR/Matérn) background and observation-error
//! covariances on a periodic grid.

pub mod error;
pub mod cli;
pub mod covariance;
pub mod experiment;
pub mod matern;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
