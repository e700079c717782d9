//! Numerical toolkit for testing self-similar blow-up obstructions in
//! Landau, non-cutoff Boltzmann and Vlasov–Poisson–Landau kinetic equations.

pub mod error;
pub mod evolve;
pub mod fft;
pub mod grid;
pub mod kernels;
pub mod boltzmann;
pub mod bounds;
pub mod landau;
pub mod profile;
pub mod quad;
pub mod report;
pub mod selfsim;
pub mod stencil;
pub mod vpl;
pub mod zeta;

pub use error::{Error, Result};
pub use grid::{Density, Gaussian, GridSpec, MatrixField, ScalarField};
pub use landau::{LandauOperator, LandauParams, SingularCell};
