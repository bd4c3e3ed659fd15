//! BDDC-preconditioned GMRES for hybridizable discontinuous Galerkin (HDG)
//! discretizations of an elliptic distributed optimal control problem.
//!
//! The pipeline is
//!
//! 1. [`mesh`]: structured triangulation of the unit square split into
//!    `n x n` square subdomains;
//! 2. [`fespace`]: nodal Lagrange bases, quadrature and the paired trace
//!    space `(y_hat, p_hat)`;
//! 3. [`hdg`]: element matrices for the coupled state/adjoint HDG system;
//! 4. [`condensation`]: static condensation onto the traces;
//! 5. [`schur`]: subdomain Schur complements with Robin-modified local
//!    problems and the assembled interface problem;
//! 6. [`bddc`]: the BDDC preconditioner with edge primal constraints;
//! 7. [`krylov`]: full GMRES with left preconditioning;
//! 8. [`diagnostics`] and [`experiments`]: mesh-dependent norms, bound
//!    factors and the iteration-count harness.
//!
//! Runnable walkthroughs of each stage live in the crate's `examples/`
//! directory (`cargo run --release --example <name>`).

#![allow(clippy::needless_range_loop)]

pub mod bddc;
pub mod condensation;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod fespace;
pub mod hdg;
pub mod krylov;
pub mod linalg;
pub mod mesh;
pub mod schur;

pub use error::{Error, Result};
