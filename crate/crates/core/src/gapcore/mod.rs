//! Penalty algebra and duality-gap functions for proximal mappings.
//!
//! Points are flat vectors. Matrix-valued penalties ([`PenaltySpec::Nuclear`]) interpret the
//! vector in column-major order with the shape stored in the spec.

mod gap;
mod hessian;
mod penalty;
mod triple;
mod variational;

pub use gap::{
    fenchel_young_gap, fused_duality_gap, generalized_l1_gap, kl_divergence, kl_gap, l1_gap,
    proximal_duality_gap, strong_convexity_radius, SimplexConstraint, SimplexPoint,
};
pub use hessian::{hessian_block, HessianBlock};
pub use penalty::{
    conjugate_value, penalty_value, support_function, NormKind, PenaltySpec, FEASIBILITY_TOL,
    NUCLEAR_FEASIBILITY_MARGIN,
};
pub use triple::GapTriple;
pub use variational::{
    variational_additive_gap, variational_nuclear_gap, NuclearDual, CONSISTENCY_TOL,
};

/// Numerical slack tolerated below zero for quantities that are nonnegative in exact
/// arithmetic.
pub const NEGATIVE_SLACK: f64 = 1e-12;
