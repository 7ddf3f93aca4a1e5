//! Relaxation functions, resolvent families, mild solutions and source
//! reconstruction for Rayleigh-Stokes type equations
//! `∂_t u - (1 + D_t^m) Δu = f` with Dirichlet conditions, discretized by a
//! sine (Dirichlet eigenfunction) basis in space and product integration in
//! time.

// validation rejects NaN through negated comparisons
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod grid;
pub mod inverse;
pub mod kernels;
pub mod mild;
pub mod product;
pub mod quad;
pub mod relaxation;
pub mod resolvent;
pub mod spectral;
pub mod stepper;

pub use error::{Error, Result};
pub use grid::TimeGrid;
pub use inverse::{InverseProblemSpec, Reconstruction};
pub use kernels::{HistoryKernel, MemoryKernel};
pub use mild::{MildSolution, Nonlinearity, NonlinearitySpec, PicardOptions};
pub use relaxation::RelaxationTable;
pub use resolvent::ResolventContext;
pub use spectral::{build_basis, Domain, SpectralBasis, SpectralField};
