//! Discontinuous Petrov–Galerkin discretization of the shallow Koiter shell
//! model with optimal test functions, its built-in error estimator and
//! adaptive mesh refinement.
//!
//! The scaled first-order system for the displacements `u`, deflection `w`,
//! membrane forces `N` and bending moments `M` is
//!
//! ```text
//! B : N - div div M = f,    M + (d^2/12) C eps(grad w) = 0,
//! N - C (eps u + B w) = 0,  -div N = p,
//! ```
//!
//! discretized in ultraweak form with piecewise constant fields and the
//! trace unknowns of [`traces`].

pub mod adaptive;
pub mod assembly;
pub mod basis;
pub mod error;
pub mod estimator;
pub mod mesh;
pub mod quadrature;
pub mod reference;
pub mod shell;
pub mod solver;
pub mod tensor;
pub mod testspace;
pub mod traces;

pub use error::{DpgError, Result};
pub use mesh::{initial_rectangle_mesh, Mesh, Rect};
pub use shell::{Benchmark, ShellProblem};
pub use traces::TraceOptions;
