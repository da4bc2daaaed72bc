//! Graphical phylogenetic trait evolution.
//!
//! Bayesian estimation of a sparse diffusion precision matrix, its trait
//! association graph, and evolutionary trait correlations for continuous
//! traits evolving by Brownian diffusion along a fixed phylogenetic tree.
//! The graphical variant places a G-Wishart prior on the precision restricted
//! to a graph's zero pattern and a uniform prior over graphs; the full
//! variant is the unconstrained Wishart baseline. A Monte Carlo benchmark
//! harness compares the two on simulated data.

pub mod error;
pub mod graph;
pub mod gwishart;
pub mod mcmc;
pub mod phylo;
pub mod rng;
pub mod simstudy;
pub mod summary;

pub use error::{Error, Result};
