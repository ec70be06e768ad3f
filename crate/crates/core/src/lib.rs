//! Numerical solver for complete locally strictly convex graphs of constant
//! hyperbolic curvature over a bounded planar domain.
//!
//! In the half-space model of hyperbolic space, a vertical graph
//! `x_{n+1} = u(x)` over `Ω ⊂ R^n` has hyperbolic principal curvatures
//! `κ_i = u κ_i^E + ν^{n+1}`. Prescribing `f(κ) = σ` for a curvature
//! quotient `f = (σ_k/σ_l)^{1/(k-l)}` and boundary data `u = ε` on `∂Ω`
//! gives a fully nonlinear elliptic Dirichlet problem; letting `ε → 0`
//! regularizes the asymptotic Plateau problem with boundary `∂Ω` at
//! infinity.
//!
//! The crate is organized as:
//!
//! - [`symfunc`]: normalized elementary symmetric polynomials, curvature
//!   quotients on the positive cone, their gradients and structure
//!   inequalities.
//! - [`hypgeom`]: pointwise geometry of vertical and radial graphs
//!   (curvature matrices, principal curvatures, the matrix function `F`
//!   and its derivative `F^{ij}`).
//! - [`grid`]: level-set described domains on a uniform grid with
//!   cut-cell (Shortley–Weller style) boundary handling and
//!   finite-difference jets.
//! - [`solver`]: the monotone outer iteration with a continuity-method
//!   Newton inner solve, and the ε-continuation ladder.
//! - [`barriers`]: equidistance spheres, height/normal barrier bounds,
//!   the gradient maximum principle, the curvature ratio `M(x)` and the
//!   cubic threshold analysis, packaged as diagnostics.
//! - [`oracle`]: independent radial shooting solver for disks and
//!   annuli, sharing no code with the 2D path.
//! - [`validate`]: the runnable property suites behind `validate`.

pub mod barriers;
pub mod grid;
pub mod hypgeom;
pub mod matrix;
pub mod oracle;
pub mod sampling;
pub mod solver;
pub mod symfunc;
pub mod validate;
