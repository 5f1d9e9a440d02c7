//! Fully discrete finite element solver for diffusion equations whose
//! time-fractional order varies with time.
//!
//! The governing model is
//!
//! ```text
//! u_t + k(t) D_t^{1-alpha(t)} u - div(K grad u) = f,   u = 0 on the boundary,
//! ```
//!
//! posed on the unit box in 1, 2 or 3 dimensions, where `D_t^{1-alpha(t)}`
//! is the Riemann-Liouville derivative of time-dependent order. The crate
//! provides:
//!
//! - [`varorder`]: order functions `alpha(t)` and kinetic coefficients `k(t)`,
//!   with validity checks.
//! - [`tmesh`]: uniform and graded temporal meshes `t_n = T (n/N)^r` and the
//!   discrete convolution weights of the L1-type fractional operator.
//! - [`fracops`]: adaptive quadrature oracles for the continuous fractional
//!   integral, Caputo, and Riemann-Liouville operators.
//! - [`femspace`]: simplicial P1 elements on the unit box (Kuhn
//!   triangulation), mass/stiffness assembly, Ritz projection, L2 errors.
//! - [`sparsela`]: CSR matrices, Jacobi-preconditioned conjugate gradients,
//!   and a tridiagonal direct solver.
//! - [`stepper`]: the fully discrete scheme marching `u_h^0 .. u_h^N`.
//! - [`oracle`]: a per-eigenmode spectral reference solver.
//! - [`harness`]: manufactured solutions and convergence-rate studies.
//! - [`cli`]: the `vofem` command-line front end.

pub mod cli;
pub mod error;
pub mod femspace;
pub mod fracops;
pub mod gamma;
pub mod harness;
pub mod oracle;
pub mod sparsela;
pub mod stepper;
pub mod tmesh;
pub mod varorder;

pub use error::{Error, Result};
