//! Numerical toolkit for the logistic elliptic problem with a sublinear
//! harvesting flux on the boundary,
//!
//! ```text
//! -Δu = βu - |u|^{p-1}u   in Ω,
//! ∂u/∂ν = -λ (u + α)^{q-1} u   on ∂Ω,      0 < q < 1 < p,
//! ```
//!
//! on a one-dimensional interval or a radially symmetric disk. The crate is
//! `no_std` (it needs `alloc`) and performs no IO; the `harvest` crate wraps it
//! with a command-line front end and file formats.
//!
//! Module map:
//!
//! * [`domain`]: uniform meshes, quadrature, boundary integration, norms.
//! * [`forms`]: discrete residual, Jacobian, energies and integral identities.
//! * [`spectra`]: Dirichlet and Steklov-type principal eigenpairs, linearized
//!   stability.
//! * [`newton`]: damped Newton, the explicit subsolution and monotone
//!   sub/supersolution iteration.
//! * [`continuation`]: pseudo-arclength branch tracing, regularized continua,
//!   homotopy limits, folds and the trivial-line contact estimate.
//! * [`analysis`]: decomposition, profile distances, Dirichlet logistic solves
//!   and the domain-perturbation study.
#![no_std]
// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod analysis;
pub mod continuation;
pub mod domain;
mod error;
pub mod forms;
pub mod linalg;
mod math;
pub mod newton;
pub mod spectra;

pub use error::{Error, Result};

pub use analysis::{DecompositionResult, PerturbationReport};
pub use continuation::{Branch, BranchPoint, Endpoint};
pub use domain::{Field, Mesh, MeshKind, Norms};
pub use forms::{Params, Regime};
pub use newton::{Solution, SubsolutionRecipe};
pub use spectra::EigenPair;
