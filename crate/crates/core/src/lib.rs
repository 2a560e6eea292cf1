//! Homogeneity-driven multiscale superpixel representation and two-scale
//! sparse unmixing for hyperspectral images.
//!
//! The library covers the full loop: SLIC oversegmentation over all spectral
//! bands, robust median-distance homogeneity testing with hierarchical
//! refinement of non-homogeneous superpixels, superpixel averaging into a
//! coarse domain, ADMM solvers for the coarse and cross-scale-regularized
//! sparse regression problems, synthetic scene generation with calibrated
//! noise, and reconstruction-quality evaluation.

pub mod cli;
pub mod error;
pub mod homogeneity;
pub mod io;
pub mod pipeline;
pub mod scalespace;
pub mod slic;
pub mod solver;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use ndarray;
pub use types::{
    AbundanceMap, HomogeneityParams, HyperCube, ScaleOperator, SegmentationMap, SolverParams,
    SpectralLibrary,
};
