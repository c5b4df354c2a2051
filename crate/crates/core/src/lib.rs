//! Entropy functionals of finite-dimensional quantum states, the optimisation
//! constructions built on them (relative-entropy distance to a convex hull,
//! measurement arrowing, pure and mixed convex roofs, Carathéodory reduction),
//! and randomized checkers for continuity-type inequalities.
//!
//! All logarithms are base 2.

pub mod arrowing;
pub mod caratheodory;
pub mod continuity;
pub mod error;
pub mod functionals;
pub mod qmat;
pub mod reldist;
pub mod roof;

pub(crate) mod simplex;
pub(crate) mod stiefel;

pub use error::{Error, Result};
pub use functionals::{Functional, FunctionalValue};
pub use qmat::{DensityMatrix, Ensemble, HermitianOperator, Povm, PureStateVector};
