//! Simulation and reconstruction toolkit for the 2D light-sheet fluorescence
//! microscopy inverse problem, viewed as a backward heat problem.
//!
//! The crate is organized along the pipeline:
//!
//! - [`heat`]: exact-kernel 1D heat solver plus the norms and energies the
//!   stability experiments are built on;
//! - [`geometry`] / [`phantom`]: object geometry (entry depths, visible
//!   heights, scan limits) and the synthetic dataset generators;
//! - [`forward`]: diffusion time `sigma`, attenuation line integrals, camera
//!   measurements and sigma-property detection;
//! - [`linsys`]: assembly of the discrete linear system, submatrix
//!   conditioning, Poisson noise and SART reconstruction;
//! - [`stability`]: numerical verification of the stability constants and
//!   energy identities;
//! - [`io`]: CSV/JSON/PGM serialization of every artifact.

pub mod error;
pub mod forward;
pub mod geometry;
pub mod grid;
pub mod heat;
pub mod io;
pub mod linsys;
pub mod noise;
pub mod phantom;
pub mod stability;
pub mod svd;

pub use error::{CoreError, Result};
