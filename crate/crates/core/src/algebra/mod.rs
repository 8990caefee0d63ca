//! Dense complex linear algebra on `M_m(ℂ)`.

mod eigen;
mod hermitian;
mod lu;
mod matrix;

pub use eigen::{eigenvalues_of, eigenvalues_split, herm_eigen, Eigen, QL_SWEEPS_PER_DIM};
pub use hermitian::{im_inv_norm, in_upper_half_plane2, HalfPlanePoint, HermitianMatrix, HALF_PLANE_SLACK};
pub use lu::{inverse_with_condition, Lu};
pub use matrix::{i_identity, ComplexMatrix};

/// Largest singular value of `a`.
pub fn op_norm(a: &ComplexMatrix) -> f64 {
    a.op_norm()
}
