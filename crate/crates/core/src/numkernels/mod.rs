//! Dense linear-algebra kernels backed by the system BLAS/LAPACK.

mod decomp;
mod ffi;
pub mod io;
mod matrix;

pub use decomp::{
    condition_number, haar_orthogonal, haar_orthogonal_with, numerical_rank, pinv, polar_factor, seeded_rng,
    solve_upper_triangular, symmetric_top_eigen, thin_qr, thin_svd, top_singular_subspace, QrFactors, SvdFactors,
    TopSingular, RANK_RTOL,
};
pub use matrix::Matrix;

/// Caps the number of threads used by the BLAS/LAPACK backend.
pub fn set_blas_threads(n: usize) {
    ffi::set_num_threads(n)
}

/// Current BLAS/LAPACK thread count.
pub fn blas_threads() -> usize {
    ffi::num_threads()
}

/// OpenBLAS kernel set in use (e.g. `Haswell`).
pub fn blas_core() -> String {
    ffi::active_core()
}

/// Name of the dense SVD backend, recorded in benchmark metadata.
pub const SVD_BACKEND: &str = "lapack-dgesdd+dsyevr(openblas)";
