//! Dense symmetric linear algebra.
//!
//! Everything here works on full `p x p` storage; the target sizes are a few
//! hundred variables at most.

mod cholesky;
mod eigen;
mod matrix;
mod qr;
mod update;

pub use cholesky::{cholesky, invert_pd, is_positive_definite, log_det_pd, CholeskyFactor, PIVOT_REL_TOL};
pub use eigen::symmetric_eigenvalues;
pub(crate) use matrix::write_csv_rows;
pub use matrix::{identity_residual, read_csv_rows, sup_norm_deviation, SymmetricMatrix, SYMMETRY_TOL};
pub use qr::{least_squares_qr, MAX_CONDITION};
pub use update::{
    det_factor, diag_update_inverse_in_place, log_det_change, pair_update_inverse, pair_update_inverse_in_place,
    pd_interval_for_pair, SINGULAR_DENOMINATOR,
};
