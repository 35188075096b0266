//! Cramér-Rao bounds for resolving two incoherent optical point sources.
//!
//! The crate computes the quantum Fisher information of the one-photon
//! image-plane state, the classical information of direct imaging and of
//! spatial-mode demultiplexing (SPADE) in its Hermite-Gaussian, binary,
//! misaligned and hybrid variants, and Monte Carlo mean-square errors of the
//! corresponding maximum-likelihood estimators.
//!
//! Module map:
//!
//! * [`quadrature`]: adaptive Gauss-Kronrod integration, including whole-line
//!   integrals of slowly decaying sinc-type integrands.
//! * [`psf`]: point-spread functions and their overlap integrals.
//! * [`qfi`]: quantum Fisher information, closed form and SLD construction.
//! * [`fisher`]: classical Fisher information and localization bounds.
//! * [`montecarlo`]: photon-count simulation and estimator error sweeps.
//! * [`config`] / [`figures`]: the batch runner behind the `spade-bounds` CLI.

pub mod config;
pub mod error;
pub mod figures;
pub mod fisher;
pub mod montecarlo;
pub mod psf;
pub mod qfi;
pub mod quadrature;

pub use error::{Error, Result};
pub use fisher::{FisherMatrix, MisalignmentConfig, Provenance};
pub use psf::{OverlapQuantities, PointSpreadFunction, PsfKind, TabulatedPsf};
pub use qfi::{OnePhotonModel, SldDecomposition};
