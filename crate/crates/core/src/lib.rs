//! Adaptive space-time first-order system least-squares (FOSLS) finite elements
//! for second-order parabolic problems on `(0, T) x (a, b)`.
//!
//! The parabolic problem `u_t - (A u_x)_x + b u_x + c u = f1 - (f2)_x` with
//! homogeneous lateral Dirichlet data and initial value `u0` is rewritten for the
//! pair `(u1, u2) = (u, -A u_x + f2)` as a first-order system `G u = f`, which is
//! discretized by continuous Lagrange elements on a triangulation of the
//! space-time rectangle. The discrete solution minimizes `||f - G v||` over the
//! trial space; the elementwise residual norms drive an adaptive
//! solve/estimate/mark/refine loop with newest-vertex bisection.
//!
//! The same machinery is instantiated with the stationary least-squares
//! formulation of the Poisson problem through the [`system::FirstOrderSystem`]
//! trait.

pub mod assembly;
pub mod driver;
pub mod error;
pub mod estimator;
pub mod marking;
pub mod mesh;
pub mod oracles;
pub mod problem;
pub mod quadrature;
pub mod spaces;
pub mod system;
pub mod verify;

pub use error::{Error, Result};
