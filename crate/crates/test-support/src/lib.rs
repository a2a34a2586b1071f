//! Independent numerical oracles for the test suites.
//!
//! Everything here derives expected values along a different route than the
//! library under test: homogeneous matrices instead of closed-form group
//! operations, step-refined Runge-Kutta instead of per-step exponentials,
//! pointwise quadrature with finite-difference Jacobians instead of
//! closed-form drag moments, and direct normal-equations solves instead of
//! recursive updates. Keep it free of dependencies on the main crate.

pub mod drag_oracle;
pub mod regression_oracle;
pub mod se2_oracle;
pub mod stats;
