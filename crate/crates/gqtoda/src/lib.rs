//! Soliton laboratory for the generalized q-Toda lattice.
//!
//! The lattice deformation replaces uniform translation by the Möbius flow
//! `x -> x/(1 - eps x)`; under `y = -1/x` the flow rectifies to the unit
//! translation `y -> y + eps`. On top of that shift calculus the crate
//! provides:
//!
//! - [`qshift`] — the shift group, central difference, coordinate change,
//!   and pole-free working windows;
//! - [`expr`] — exact closed-form fields of `(x, t)` with analytic
//!   t-derivatives;
//! - [`hirota`] — dispersion relation, interaction coefficients, N-soliton
//!   tau functions (N <= 3), and the bilinear / lattice-equation residuals;
//! - [`operator`] — the Laurent algebra of shift operators, the Lax
//!   operator `L = Λ + u + e^v Λ⁻¹`, hierarchy flows, Hamiltonian
//!   densities, recursion and tau-symmetry identities, wave functions;
//! - [`simulator`] — RK4 integration of the lattice equation on a y-uniform
//!   grid where the space stencil is exact;
//! - [`cli`] — the `gqtoda` command-line front end.
//!
//! Start with the runnable examples (`cargo run --example solitons`), which
//! walk through each capability.
//!
//! ```
//! use gqtoda::hirota::{Branch, SolitonMode, SolitonSpec, BilinearResidual};
//! use gqtoda::qshift::ShiftParams;
//!
//! let params = ShiftParams::from_exp_epsilon(1.25).unwrap();
//! let mode = SolitonMode::from_alpha(-5.0, Branch::Negative, 0.0, &params).unwrap();
//! assert!((mode.beta() - (-1.1745)).abs() < 0.5e-4);
//!
//! let spec = SolitonSpec::new(params, vec![mode]).unwrap();
//! let residual = BilinearResidual::new(&spec.tau(), &params);
//! assert!(residual.relative(1.0, 0.5).unwrap().abs() <= 1e-10);
//! ```

pub mod cli;
pub mod expr;
pub mod hirota;
pub mod operator;
pub mod qshift;
pub mod simulator;

pub use expr::{EvalError, Expr};
pub use hirota::{Branch, SolitonMode, SolitonSpec};
pub use operator::{DifferenceOperator, HierarchyLimits, LaxFields};
pub use qshift::{Domain, ShiftParams};
pub use simulator::{IntegratorConfig, LatticeGrid, LatticeState};
