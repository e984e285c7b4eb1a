use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ffi;
use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Relative cutoff used for every numerical rank decision.
pub const RANK_RTOL: f64 = 1e-12;

/// Deterministic RNG used for every seeded draw in the crate.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Thin SVD `M = U·diag(σ)·Vᵀ` with `k = min(p, q)`.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    /// `p×k`, orthonormal columns.
    pub u: Matrix,
    /// Length `k`, non-negative and descending.
    pub sigma: Vec<f64>,
    /// `k×q`, orthonormal rows.
    pub vt: Matrix,
}

impl SvdFactors {
    pub fn reconstruct(&self) -> Matrix {
        let us = self.u.scale_columns(&self.sigma).expect("sigma length matches u");
        us.matmul(&self.vt).expect("factor shapes agree")
    }

    /// Number of singular values above `RANK_RTOL · σ_max`.
    pub fn rank(&self) -> usize {
        let smax = self.sigma.first().copied().unwrap_or(0.0);
        self.sigma.iter().filter(|&&s| s > RANK_RTOL * smax).count()
    }
}

/// Thin QR `M = Q·R` with `diag(R) ≥ 0`.
#[derive(Debug, Clone)]
pub struct QrFactors {
    /// `p×k`, orthonormal columns.
    pub q: Matrix,
    /// `k×k`, upper triangular with non-negative diagonal.
    pub r: Matrix,
}

pub fn thin_svd(m: &Matrix) -> Result<SvdFactors> {
    let (p, q) = m.shape();
    // Row-major M is column-major Mᵀ. Factor Mᵀ = U'ΣV'ᵀ, so M = V'ΣU'ᵀ and
    // the column-major buffers of U' and V'ᵀ are exactly the row-major
    // buffers of Vᵀ and U.
    let raw = ffi::gesdd(m.as_slice().to_vec(), q, p)?;
    let k = p.min(q);
    Ok(SvdFactors {
        u: Matrix::from_raw(p, k, raw.vt),
        sigma: raw.s,
        vt: Matrix::from_raw(k, q, raw.u),
    })
}

pub fn thin_qr(m: &Matrix) -> Result<QrFactors> {
    let (p, n) = m.shape();
    if p < n {
        return Err(Error::Dimension(format!("thin QR needs rows >= cols, got {p}x{n}")));
    }
    let (q_cm, r_cm) = ffi::geqrf_orgqr(m.to_col_major(), p, n)?;
    let mut q = Matrix::from_col_major(p, n, &q_cm);
    let mut r = Matrix::from_col_major(n, n, &r_cm);
    for k in 0..n {
        if r.get(k, k) < 0.0 {
            for j in k..n {
                r.set(k, j, -r.get(k, j));
            }
            for i in 0..p {
                q.set(i, k, -q.get(i, k));
            }
        }
    }
    let tol = RANK_RTOL * m.frobenius_norm();
    if let Some(k) = (0..n).find(|&k| r.get(k, k) <= tol) {
        return Err(Error::Rank(format!(
            "|r[{k}][{k}]| = {:e} is below {tol:e}; input has deficient column rank",
            r.get(k, k)
        )));
    }
    Ok(QrFactors { q, r })
}

/// Moore–Penrose pseudoinverse via the thin SVD; singular values at or below
/// `RANK_RTOL · σ_max` are treated as zero.
pub fn pinv(m: &Matrix) -> Result<Matrix> {
    let svd = thin_svd(m)?;
    let smax = svd.sigma.first().copied().unwrap_or(0.0);
    let inv: Vec<f64> = svd
        .sigma
        .iter()
        .map(|&s| if s > RANK_RTOL * smax { 1.0 / s } else { 0.0 })
        .collect();
    // M† = V Σ⁺ Uᵀ = (U Σ⁺ Vᵀ)ᵀ
    let b = svd.u.scale_columns(&inv)?;
    Ok(b.matmul(&svd.vt)?.transpose())
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// sign of each `R_kk` folded into `Q`.
pub fn haar_orthogonal(dim: usize, seed: u64) -> Matrix {
    let mut rng = seeded_rng(seed);
    haar_orthogonal_with(dim, &mut rng)
}

pub fn haar_orthogonal_with<R: rand::Rng + ?Sized>(dim: usize, rng: &mut R) -> Matrix {
    assert!(dim >= 1, "orthogonal group dimension must be positive");
    loop {
        let g = Matrix::gaussian(dim, dim, rng);
        // thin_qr already returns Q·diag(sign(diag(R))).
        match thin_qr(&g) {
            Ok(f) => return f.q,
            Err(_) => continue,
        }
    }
}

/// Back substitution for `R x = b`. Entries below the diagonal are ignored.
pub fn solve_upper_triangular(r: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = r.rows();
    if !r.is_square() || b.len() != n {
        return Err(Error::Dimension(format!(
            "triangular solve needs square R and matching rhs, got {}x{} and {}",
            r.rows(),
            r.cols(),
            b.len()
        )));
    }
    let dmax = (0..n).fold(0.0f64, |m, k| m.max(r.get(k, k).abs()));
    let tol = RANK_RTOL * dmax;
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let d = r.get(i, i);
        if d.abs() <= tol {
            return Err(Error::Singular(format!("zero pivot r[{i}][{i}] = {d:e}")));
        }
        let row = r.row(i);
        let s: f64 = (i + 1..n).map(|j| row[j] * x[j]).sum();
        x[i] = (b[i] - s) / d;
    }
    Ok(x)
}

/// Top `k` eigenpairs of a symmetric matrix, eigenvalues descending.
pub fn symmetric_top_eigen(s: &Matrix, k: usize) -> Result<(Vec<f64>, Matrix)> {
    let n = s.rows();
    if !s.is_square() || k == 0 || k > n {
        return Err(Error::Dimension(format!(
            "top-{k} eigenpairs of a {}x{} matrix",
            s.rows(),
            s.cols()
        )));
    }
    // Symmetric: row-major and column-major buffers coincide.
    let (mut w, z) = ffi::syevr_top(s.as_slice().to_vec(), n, k)?;
    w.reverse();
    let vecs = Matrix::from_fn(n, k, |i, j| z[(k - 1 - j) * n + i]);
    Ok((w, vecs))
}

/// Dominant `k`-dimensional singular subspace of a (possibly very wide or
/// tall) matrix.
///
/// The smaller of `MᵀM` / `MMᵀ` is formed with a rank-k update and its top
/// `k` eigenvectors are extracted directly (no full factorization). Vectors
/// on the other side are recovered as normalized `M v_j` / `Mᵀ u_j`.
#[derive(Debug, Clone)]
pub struct TopSingular {
    /// Descending.
    pub sigma: Vec<f64>,
    /// `p×k`.
    pub u: Matrix,
    /// `q×k` (columns are right singular vectors).
    pub v: Matrix,
}

fn normalize_columns(m: &Matrix) -> Result<Matrix> {
    let norms: Vec<f64> = (0..m.cols())
        .map(|j| m.column(j).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let smax = norms.iter().cloned().fold(0.0, f64::max);
    if let Some(j) = norms.iter().position(|&n| n <= RANK_RTOL * smax || n == 0.0) {
        return Err(Error::Rank(format!("singular direction {j} is numerically zero")));
    }
    let inv: Vec<f64> = norms.iter().map(|n| 1.0 / n).collect();
    m.scale_columns(&inv)
}

pub fn top_singular_subspace(m: &Matrix, k: usize) -> Result<TopSingular> {
    let (p, q) = m.shape();
    if k == 0 || k > p.min(q) {
        return Err(Error::Dimension(format!(
            "top-{k} singular subspace of a {p}x{q} matrix"
        )));
    }
    if q <= p {
        let (lam, v) = symmetric_top_eigen(&m.gram(), k)?;
        let u = normalize_columns(&m.matmul(&v)?)?;
        Ok(TopSingular {
            sigma: lam.iter().map(|l| l.max(0.0).sqrt()).collect(),
            u,
            v,
        })
    } else {
        let (lam, u) = symmetric_top_eigen(&m.outer_gram(), k)?;
        let v = normalize_columns(&m.t_matmul(&u)?)?;
        Ok(TopSingular {
            sigma: lam.iter().map(|l| l.max(0.0).sqrt()).collect(),
            u,
            v,
        })
    }
}

/// Nearest orthogonal matrix `U Vᵀ` in Frobenius norm, together with the SVD used.
pub fn polar_factor(m: &Matrix) -> Result<(Matrix, SvdFactors)> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "polar factor of non-square {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let svd = thin_svd(m)?;
    let o = svd.u.matmul(&svd.vt)?;
    Ok((o, svd))
}

pub fn numerical_rank(m: &Matrix) -> Result<usize> {
    Ok(thin_svd(m)?.rank())
}

/// `σ_max / σ_min`; infinite when the smallest singular value is zero.
pub fn condition_number(m: &Matrix) -> Result<f64> {
    let s = thin_svd(m)?.sigma;
    let (hi, lo) = (s[0], *s.last().expect("non-empty"));
    Ok(if lo == 0.0 { f64::INFINITY } else { hi / lo })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    /// Closed-form eigenvalues of a symmetric 2×2 matrix [[a, b], [b, d]].
    fn sym2_eigenvalues(a: f64, b: f64, d: f64) -> (f64, f64) {
        let mean = 0.5 * (a + d);
        let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        (mean + rad, mean - rad)
    }

    #[test]
    fn svd_identity_and_diagonal() {
        let s = thin_svd(&Matrix::identity(3)).unwrap();
        assert_eq!(s.sigma.len(), 3);
        for v in &s.sigma {
            assert_close(*v, 1.0, 1e-15);
        }
        let d = Matrix::from_diag(&[3.0, 2.0, 1.0]);
        let s = thin_svd(&d).unwrap();
        for (v, e) in s.sigma.iter().zip([3.0, 2.0, 1.0]) {
            assert_close(*v, e, 1e-14);
        }
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert_close(s.u.get(i, j).abs(), e, 1e-14);
                assert_close(s.vt.get(i, j).abs(), e, 1e-14);
            }
        }
    }

    #[test]
    fn svd_matches_characteristic_polynomial_oracle() {
        let mut rng = seeded_rng(4242);
        let m = Matrix::gaussian(4, 2, &mut rng);
        // MᵀM by hand, independent of BLAS.
        let (mut a, mut b, mut d) = (0.0, 0.0, 0.0);
        for i in 0..4 {
            let (x, y) = (m.get(i, 0), m.get(i, 1));
            a += x * x;
            b += x * y;
            d += y * y;
        }
        let (l1, l2) = sym2_eigenvalues(a, b, d);
        let s = thin_svd(&m).unwrap();
        assert_close(s.sigma[0], l1.sqrt(), 1e-12 * l1.sqrt());
        assert_close(s.sigma[1], l2.sqrt(), 1e-12 * l1.sqrt());
        let rel = s.reconstruct().frobenius_distance(&m).unwrap() / m.frobenius_norm();
        assert!(rel < 1e-12);
    }

    #[test]
    fn svd_of_wide_matrix() {
        let mut rng = seeded_rng(3);
        let m = Matrix::gaussian(3, 7, &mut rng);
        let s = thin_svd(&m).unwrap();
        assert_eq!(s.u.shape(), (3, 3));
        assert_eq!(s.vt.shape(), (3, 7));
        assert!(s.u.orthonormality_defect() < 1e-12);
        assert!(s.vt.transpose().orthonormality_defect() < 1e-12);
        assert!(s.reconstruct().frobenius_distance(&m).unwrap() / m.frobenius_norm() < 1e-12);
    }

    #[test]
    fn qr_examples() {
        let f = thin_qr(&Matrix::identity(3)).unwrap();
        assert_eq!(f.q, Matrix::identity(3));
        assert_eq!(f.r, Matrix::identity(3));

        let col = Matrix::from_rows(&[[3.0], [4.0]]).unwrap();
        let f = thin_qr(&col).unwrap();
        assert_close(f.q.get(0, 0), 0.6, 1e-15);
        assert_close(f.q.get(1, 0), 0.8, 1e-15);
        assert_close(f.r.get(0, 0), 5.0, 1e-14);

        let mut rng = seeded_rng(11);
        let m = Matrix::gaussian(5, 3, &mut rng);
        let f = thin_qr(&m).unwrap();
        assert!(f.q.orthonormality_defect() < 1e-12);
        assert!(f.q.matmul(&f.r).unwrap().frobenius_distance(&m).unwrap() < 1e-10 * m.frobenius_norm());
        for i in 0..3 {
            assert!(f.r.get(i, i) >= 0.0);
            for j in 0..i {
                assert_eq!(f.r.get(i, j), 0.0);
            }
        }
        let again = thin_qr(&m).unwrap();
        assert_eq!(again.q, f.q);
        assert_eq!(again.r, f.r);
    }

    #[test]
    fn qr_errors() {
        let wide = Matrix::zeros(2, 3);
        assert!(matches!(thin_qr(&wide), Err(Error::Dimension(_))));
        let dup = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]]).unwrap();
        assert!(matches!(thin_qr(&dup), Err(Error::Rank(_))));
        assert!(matches!(thin_qr(&Matrix::zeros(3, 2)), Err(Error::Rank(_))));
    }

    #[test]
    fn pinv_examples() {
        let p = pinv(&Matrix::from_diag(&[2.0, 4.0])).unwrap();
        assert_close(p.get(0, 0), 0.5, 1e-15);
        assert_close(p.get(1, 1), 0.25, 1e-15);
        assert_close(p.get(0, 1), 0.0, 1e-15);

        let mut rng = seeded_rng(5);
        let q = thin_qr(&Matrix::gaussian(4, 2, &mut rng)).unwrap().q;
        assert!(pinv(&q).unwrap().frobenius_distance(&q.transpose()).unwrap() < 1e-12);

        let m = Matrix::gaussian(6, 3, &mut rng);
        let left = pinv(&m).unwrap().matmul(&m).unwrap();
        assert!(left.frobenius_distance(&Matrix::identity(3)).unwrap() < 1e-9);

        let z = pinv(&Matrix::zeros(3, 2)).unwrap();
        assert_eq!(z, Matrix::zeros(2, 3));
    }

    #[test]
    fn haar_examples() {
        for seed in 0..20 {
            let o = haar_orthogonal(1, seed);
            assert_eq!(o.get(0, 0).abs(), 1.0);
        }
        let a = haar_orthogonal(3, 99);
        let b = haar_orthogonal(3, 99);
        assert_eq!(a.as_slice(), b.as_slice());
        assert!(a.orthonormality_defect() < 1e-12);
        assert!(a.transpose().orthonormality_defect() < 1e-12);
    }

    #[test]
    fn triangular_solve_examples() {
        let x = solve_upper_triangular(&Matrix::identity(3), &[1.0, -2.0, 3.5]).unwrap();
        assert_eq!(x, vec![1.0, -2.0, 3.5]);
        let r = Matrix::from_rows(&[[2.0, 1.0], [0.0, 4.0]]).unwrap();
        let x = solve_upper_triangular(&r, &[4.0, 8.0]).unwrap();
        assert_close(x[0], 1.0, 1e-15);
        assert_close(x[1], 2.0, 1e-15);
        let sing = Matrix::from_rows(&[[1.0, 1.0], [0.0, 0.0]]).unwrap();
        assert!(matches!(
            solve_upper_triangular(&sing, &[1.0, 1.0]),
            Err(Error::Singular(_))
        ));
        assert!(matches!(solve_upper_triangular(&r, &[1.0]), Err(Error::Dimension(_))));
    }

    #[test]
    fn triangular_solve_residual() {
        let mut rng = seeded_rng(77);
        let g = Matrix::gaussian(5, 5, &mut rng);
        let r = Matrix::from_fn(5, 5, |i, j| {
            if i == j {
                3.0 + g.get(i, j).abs()
            } else if j > i {
                g.get(i, j)
            } else {
                0.0
            }
        });
        let b = vec![1.0, -1.0, 2.0, 0.5, -3.0];
        let x = solve_upper_triangular(&r, &b).unwrap();
        let rx = r.mul_vec(&x).unwrap();
        let res: f64 = rx.iter().zip(&b).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(res / nb <= 1e-10);
    }

    #[test]
    fn top_subspace_matches_full_svd() {
        let mut rng = seeded_rng(8);
        for &(p, q) in &[(30usize, 12usize), (12, 30)] {
            let m = Matrix::gaussian(p, q, &mut rng);
            let full = thin_svd(&m).unwrap();
            let top = top_singular_subspace(&m, 4).unwrap();
            for j in 0..4 {
                assert_close(top.sigma[j], full.sigma[j], 1e-10 * full.sigma[0]);
                // Same vector up to sign.
                let uj = top.u.column(j);
                let fj = full.u.column(j);
                let dot: f64 = uj.iter().zip(&fj).map(|(a, b)| a * b).sum();
                assert_close(dot.abs(), 1.0, 1e-9);
                let vj = top.v.column(j);
                let gj = full.vt.row(j);
                let dot: f64 = vj.iter().zip(gj).map(|(a, b)| a * b).sum();
                assert_close(dot.abs(), 1.0, 1e-9);
            }
        }
    }

    #[test]
    fn polar_factor_is_orthogonal() {
        let mut rng = seeded_rng(21);
        let m = Matrix::gaussian(4, 4, &mut rng);
        let (o, _) = polar_factor(&m).unwrap();
        assert!(o.orthonormality_defect() < 1e-12);
        // Polar factor of a symmetric positive definite matrix is I.
        let spd = m.gram().add(&Matrix::identity(4)).unwrap();
        let (o, _) = polar_factor(&spd).unwrap();
        assert!(o.frobenius_distance(&Matrix::identity(4)).unwrap() < 1e-12);
    }
}
