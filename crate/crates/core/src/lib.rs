//! Stiffly accurate stochastic Runge-Kutta schemes for SDEs and index-1
//! SDAEs with scalar noise: coefficient families, order verification, a
//! fixed-step solver, mean-square stability analysis and convergence studies.

// Negated float comparisons in this crate are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convergence;
pub mod families;
pub mod solver;
pub mod stability;
pub mod tableau;

pub use families::{FamilyError, FamilyId, FamilySpec, Sign};
pub use tableau::{SrkTableau, StrongOrder, TableauError};
