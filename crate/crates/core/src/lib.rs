//! Data collaboration (DC) toolkit.
//!
//! Users hold private data `X_i` and a private secret basis `F_i`; they share
//! only `X_i F_i` and the projected anchor `A F_i`. The analyst builds
//! change-of-basis matrices `G_i` from the projected anchors so that all
//! representations land in one common space. Three constructions are
//! provided in [`alignment`]: the pseudoinverse-to-target method of Imakura
//! et al., the QR/SVD method of Kawakami et al., and orthogonal Procrustes
//! alignment (ODC), which needs one `ℓ×ℓ` SVD per user.
//!
//! Supporting modules cover the dense kernels ([`numkernels`]), synthetic
//! scenarios and the user-side protocol steps ([`protocol`]), analytic
//! FLOP/memory/traffic models ([`costmodel`]), a nearest-centroid
//! classifier ([`downstream`]) and timing sweeps ([`bench`]).

// Links libopenblas (BLAS + LAPACK symbols used by `numkernels`).
extern crate openblas_src;

pub mod alignment;
pub mod bench;
pub mod costmodel;
pub mod downstream;
pub mod error;
pub mod numkernels;
pub mod protocol;

pub use error::{Error, ErrorClass, Result};
pub use numkernels::Matrix;
