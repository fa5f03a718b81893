//! Recovery-theory quantities at desk scale: restricted isometry constants by
//! exhaustive enumeration, weighted null-space constants by sign-pattern
//! linear programs, and the bound relations between them.

mod nullspace;
mod ric;
mod simplex;

pub use nullspace::{
    basis_pursuit_value, beta_gamma, beta_gamma_mc, check_beta_bounds, null_space_basis,
    BetaBoundReport, NullSpaceConstants, DEFAULT_MC_DIRECTIONS, MAX_EXACT_SUPPORT,
    NULL_SPACE_TOL,
};
pub use ric::{normalize_columns, ric_bruteforce, RicEstimate, MAX_SUPPORTS};

/// `3^{q/2}`, the largest sup-norm of an orthonormal Legendre basis function
/// of total degree `≤ q` when `d ≥ q`.
pub fn uniform_sup_bound(q: usize) -> f64 {
    3f64.powf(q as f64 / 2.0)
}
