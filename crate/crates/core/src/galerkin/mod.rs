//! Compatible Galerkin discretizations of the pipe network.

pub mod checks;
pub mod element;
pub mod field;
pub mod operators;
pub mod polynomial;
pub mod quadrature;
pub mod space;
pub mod system;

pub use checks::{certify_norm_equivalence, check_compatibility, CompatibilityReport, NormEquivalenceReport};
pub use field::{ConstantField, DiscreteField, EdgeField, FnField};
pub use operators::Operators;
pub use quadrature::QuadratureRule;
pub use space::{build_space, cycle_space, Discretization, GlobalSpace};
pub use system::{GalerkinSystem, StepJacobian};
