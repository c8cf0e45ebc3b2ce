//! Equilibrium-distribution-function based macroscopic finite-difference
//! schemes for convection-diffusion and wave equations on rectangular
//! lattices.
//!
//! The crate is organized around six pieces:
//!
//! - [`lattice`]: the rDdQq velocity-set catalog and its moment tensors;
//! - [`edf`]: quadratic equilibrium/source distributions from moment targets;
//! - [`scheme`]: multi-level stencil coefficients, Taylor moment constants,
//!   the three-level solver, and named presets;
//! - [`stability`]: Fourier symbols, closed-form von Neumann criteria, and
//!   spectral scans;
//! - [`stepper`]: explicit execution of the schemes on periodic or
//!   exact-Dirichlet structured grids;
//! - [`harness`]: built-in benchmark problems, error norms, convergence
//!   ladders, and CSV emission.
//!
//! With the default `parallel` feature the node updates, spectral scans, and
//! convergence ladders run on rayon; disabling it yields a dependency-free
//! sequential build producing identical results.

pub mod config;
pub mod edf;
pub mod harness;
pub mod lattice;
pub mod roots;
pub mod scheme;
pub mod stability;
pub mod stepper;
