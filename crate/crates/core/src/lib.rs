//! Numerical laboratory for Anderson localization in one dimension.
//!
//! The crate models the discrete Schrödinger operator
//! `(Hψ)(n) = ψ(n+1) + ψ(n-1) + ω_n ψ(n)` with an i.i.d. potential and
//! provides the computational objects needed to study it on finite boxes:
//!
//! * [`model`]: disorder laws, reproducible potential windows, shifts and
//!   the almost-sure spectrum.
//! * [`transfer`]: overflow-safe transfer-matrix products and box
//!   determinants in sign/log form.
//! * [`lyapunov`]: Monte Carlo and single-trajectory Lyapunov exponents.
//! * [`ldt`]: large-deviation probabilities, fitted decay rates and
//!   deviation sets in energy.
//! * [`green`]: Green's functions by determinant ratios and by direct
//!   solves, regularity classification.
//! * [`spectrum`]: Sturm-bisection eigensolver, localization profiles,
//!   SULE constants and growth scans.
//! * [`dynamics`]: time-evolution kernels and eigenfunction correlators.
//! * [`interp`]: Chebyshev-like interpolation nodes, Lebesgue constants,
//!   sine products and the uniform upper-bound scan.
//! * [`experiment`]: config-driven runner writing CSV tables and manifests.

pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod fit;
pub mod green;
pub mod interp;
pub mod ldt;
pub mod lyapunov;
pub mod model;
pub mod rng;
pub mod spectrum;
pub mod transfer;
pub mod tridiag;

pub use error::{Error, Result};
pub use model::{Distribution, PotentialWindow, SpectrumSet};
pub use transfer::{ScaledMatrix, ScaledScalar};
