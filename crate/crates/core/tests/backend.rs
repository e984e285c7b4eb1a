//! Factorisations at orders where blocked LAPACK code paths kick in. These
//! caught a distro OpenBLAS whose AVX-512 kernels return garbage there.

use dc_core::numkernels::{blas_core, seeded_rng, symmetric_top_eigen, thin_qr, thin_svd};
use dc_core::Matrix;

const SHAPES: &[(usize, usize)] = &[
    (25, 25),
    (38, 38),
    (64, 64),
    (200, 200),
    (300, 150),
    (150, 300),
    (2000, 120),
];

fn rel(a: &Matrix, b: &Matrix) -> f64 {
    a.frobenius_distance(b).unwrap() / b.frobenius_norm()
}

#[test]
fn svd_is_accurate_at_blocked_sizes() {
    for (k, &(p, q)) in SHAPES.iter().enumerate() {
        let m = Matrix::gaussian(p, q, &mut seeded_rng(k as u64));
        let svd = thin_svd(&m).unwrap();
        assert!(svd.u.orthonormality_defect() < 1e-12, "{p}x{q} on {}", blas_core());
        assert!(svd.vt.transpose().orthonormality_defect() < 1e-12, "{p}x{q}");
        assert!(rel(&svd.reconstruct(), &m) < 1e-13, "{p}x{q}");
    }
}

#[test]
fn qr_is_accurate_at_blocked_sizes() {
    for (k, &(p, q)) in SHAPES.iter().filter(|(p, q)| p >= q).enumerate() {
        let m = Matrix::gaussian(p, q, &mut seeded_rng(100 + k as u64));
        let f = thin_qr(&m).unwrap();
        assert!(f.q.orthonormality_defect() < 1e-12, "{p}x{q} on {}", blas_core());
        assert!(rel(&f.q.matmul(&f.r).unwrap(), &m) < 1e-13, "{p}x{q}");
    }
}

#[test]
fn top_eigenpairs_are_accurate_at_blocked_sizes() {
    for (k, &(p, q)) in SHAPES.iter().enumerate() {
        let m = Matrix::gaussian(p, q, &mut seeded_rng(200 + k as u64));
        let g = m.gram();
        let top = q.min(20);
        let (vals, vecs) = symmetric_top_eigen(&g, top).unwrap();
        assert!(vecs.orthonormality_defect() < 1e-12, "order {q} on {}", blas_core());
        let resid = g
            .matmul(&vecs)
            .unwrap()
            .frobenius_distance(&vecs.scale_columns(&vals).unwrap())
            .unwrap();
        assert!(resid / g.frobenius_norm() < 1e-13, "order {q}");
    }
}
