//! Change-of-basis constructions and concordance diagnostics.
//!
//! The `*_change_of_basis` functions are the bare algorithms (what the
//! benchmarks time). The `align_*` wrappers add input validation,
//! residuals and flags.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernels::{
    haar_orthogonal, pinv, polar_factor, solve_upper_triangular, thin_qr, thin_svd, top_singular_subspace, Matrix,
    RANK_RTOL,
};
use crate::protocol::UserPrivate;

/// Tolerance used by [`ConcordanceReport::satisfied`].
pub const CONCORDANCE_TOL: f64 = 1e-8;

/// Allowed `‖OᵀO − I‖_F` for a user-supplied ODC target.
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Imakura,
    Kawakami,
    Odc,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Imakura, Method::Kawakami, Method::Odc];

    pub fn name(self) -> &'static str {
        match self {
            Method::Imakura => "imakura",
            Method::Kawakami => "kawakami",
            Method::Odc => "odc",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "imakura" => Ok(Method::Imakura),
            "kawakami" => Ok(Method::Kawakami),
            "odc" => Ok(Method::Odc),
            other => Err(Error::Validation(format!("unknown method '{other}'"))),
        }
    }
}

/// How the ODC target `O` is chosen.
#[derive(Debug, Clone)]
pub enum OdcTarget {
    Matrix(Matrix),
    /// Haar sample from this seed.
    Seed(u64),
}

/// The target actually used by a run.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetRecord {
    /// Imakura's `R` in `Z = U R`.
    Imakura {
        r: Matrix,
    },
    Kawakami,
    /// ODC's `O`; `seed` is set when it was sampled.
    Odc {
        o: Matrix,
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone)]
pub struct AlignmentResult {
    /// One `ℓ×ℓ` change-of-basis matrix per user.
    pub g: Vec<Matrix>,
    pub method: Method,
    pub target: TargetRecord,
    /// `max_{i,j} ‖A_iG_i − A_jG_j‖_F / max(1, ‖A_1G_1‖_F)`.
    pub anchor_residual: f64,
    /// Non-fatal findings (near-singular `G_i`, degenerate polar factors).
    pub flags: Vec<String>,
}

impl AlignmentResult {
    /// The ODC target, if any.
    pub fn target_o(&self) -> Option<&Matrix> {
        match &self.target {
            TargetRecord::Odc { o, .. } => Some(o),
            _ => None,
        }
    }

    /// `X̃_i G_i` for each representation, in user order.
    pub fn apply(&self, reps: &[Matrix]) -> Result<Vec<Matrix>> {
        aligned(reps, &self.g)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcordanceReport {
    /// `max_i ‖F_iG_i − F_1G_1‖_F / ‖F_1G_1‖_F`.
    pub basis_residual: f64,
    /// `max_i ‖G_i − E_iᵀO‖_F` with `E_i = F_1†F_i`; ODC with a known target only.
    pub theoretical_check: Option<f64>,
    pub satisfied: bool,
    pub tolerance: f64,
}

fn check_anchors(anchors: &[Matrix]) -> Result<(usize, usize)> {
    let first = anchors
        .first()
        .ok_or_else(|| Error::Dimension("no projected anchors".into()))?;
    let shape = first.shape();
    if let Some((i, a)) = anchors.iter().enumerate().find(|(_, a)| a.shape() != shape) {
        return Err(Error::Dimension(format!(
            "projected anchor {i} is {}x{}, expected {}x{}",
            a.rows(),
            a.cols(),
            shape.0,
            shape.1
        )));
    }
    if shape.0 < shape.1 {
        return Err(Error::Dimension(format!(
            "projected anchors have fewer rows ({}) than columns ({})",
            shape.0, shape.1
        )));
    }
    Ok(shape)
}

fn check_square(m: &Matrix, l: usize, what: &str) -> Result<()> {
    if m.shape() != (l, l) {
        return Err(Error::Dimension(format!(
            "{what} is {}x{}, expected {l}x{l}",
            m.rows(),
            m.cols()
        )));
    }
    Ok(())
}

/// Products `M_i G_i`.
pub fn aligned(reps: &[Matrix], g: &[Matrix]) -> Result<Vec<Matrix>> {
    if reps.len() != g.len() {
        return Err(Error::Dimension(format!(
            "{} representations for {} change-of-basis matrices",
            reps.len(),
            g.len()
        )));
    }
    reps.iter().zip(g).map(|(x, gi)| x.matmul(gi)).collect()
}

/// `max_{i<j} ‖A_iG_i − A_jG_j‖_F / max(1, ‖A_1G_1‖_F)`.
pub fn anchor_residual(anchors: &[Matrix], g: &[Matrix]) -> Result<f64> {
    let ag = aligned(anchors, g)?;
    let denom = ag[0].frobenius_norm().max(1.0);
    let mut worst = 0.0f64;
    for i in 0..ag.len() {
        for j in i + 1..ag.len() {
            worst = worst.max(ag[i].frobenius_distance(&ag[j])?);
        }
    }
    Ok(worst / denom)
}

/// `Σ_{i,j} ‖A_iG_i − A_jG_j‖²_F` over ordered pairs.
pub fn pairwise_objective(anchors: &[Matrix], g: &[Matrix]) -> Result<f64> {
    let ag = aligned(anchors, g)?;
    let mut total = 0.0;
    for i in 0..ag.len() {
        for j in 0..ag.len() {
            if i != j {
                total += ag[i].frobenius_distance(&ag[j])?.powi(2);
            }
        }
    }
    Ok(total)
}

/// ODC objective `Σ_i ‖A_iG_i − A_1O‖²_F`.
pub fn procrustes_objective(anchors: &[Matrix], g: &[Matrix], o: &Matrix) -> Result<f64> {
    let target = anchors[0].matmul(o)?;
    aligned(anchors, g)?
        .iter()
        .map(|ag| ag.frobenius_distance(&target).map(|d| d * d))
        .sum()
}

/// `Σ_i ‖A_i g_{i,k}‖²` for every column `k`; the Kawakami constraint sets these to one.
pub fn column_constraint_values(anchors: &[Matrix], g: &[Matrix]) -> Result<Vec<f64>> {
    let ag = aligned(anchors, g)?;
    let l = ag[0].cols();
    Ok((0..l)
        .map(|k| ag.iter().map(|m| m.column(k).iter().map(|v| v * v).sum::<f64>()).sum())
        .collect())
}

/// Imakura et al.: `Z = U R` with `U` the top-`ℓ` left singular vectors of
/// `[A_1 ⋯ A_c]`, then `G_i = A_i† Z`.
pub fn imakura_change_of_basis(anchors: &[Matrix], r: &Matrix) -> Result<Vec<Matrix>> {
    let (_, l) = check_anchors(anchors)?;
    let refs: Vec<&Matrix> = anchors.iter().collect();
    let w = Matrix::hstack(&refs)?;
    let u = top_singular_subspace(&w, l)?.u;
    let z = u.matmul(r)?;
    anchors.iter().map(|a| pinv(a)?.matmul(&z)).collect()
}

/// Kawakami et al.: QR of each `A_i`, top-`ℓ` right singular vectors of
/// `[Q_1 ⋯ Q_c]`, blockwise back-substitution through `R_i`.
pub fn kawakami_change_of_basis(anchors: &[Matrix]) -> Result<Vec<Matrix>> {
    let (_, l) = check_anchors(anchors)?;
    let mut qs = Vec::with_capacity(anchors.len());
    let mut rs = Vec::with_capacity(anchors.len());
    for (i, a) in anchors.iter().enumerate() {
        let qr = thin_qr(a).map_err(|e| match e {
            Error::Rank(msg) => Error::Rank(format!("projected anchor {i}: {msg}")),
            other => other,
        })?;
        qs.push(qr.q);
        rs.push(qr.r);
    }
    let refs: Vec<&Matrix> = qs.iter().collect();
    let wq = Matrix::hstack(&refs)?;
    let v = top_singular_subspace(&wq, l)?.v;
    let mut out = Vec::with_capacity(anchors.len());
    for (i, r) in rs.iter().enumerate() {
        let mut g = vec![0.0; l * l];
        for k in 0..l {
            let ghat: Vec<f64> = (0..l).map(|row| v.get(i * l + row, k)).collect();
            let col = solve_upper_triangular(r, &ghat)?;
            for (row, val) in col.into_iter().enumerate() {
                g[row * l + k] = val;
            }
        }
        out.push(Matrix::new(l, l, g)?);
    }
    Ok(out)
}

/// ODC: `G_i = U_iV_iᵀ` from the SVD of `A_iᵀ(A_1 O)`.
pub fn odc_change_of_basis(anchors: &[Matrix], o: &Matrix) -> Result<Vec<Matrix>> {
    Ok(odc_with_svds(anchors, o)?.into_iter().map(|(g, _)| g).collect())
}

fn odc_with_svds(anchors: &[Matrix], o: &Matrix) -> Result<Vec<(Matrix, Vec<f64>)>> {
    check_anchors(anchors)?;
    let b = anchors[0].matmul(o)?;
    anchors
        .iter()
        .map(|a| {
            let (g, svd) = polar_factor(&a.t_matmul(&b)?)?;
            Ok((g, svd.sigma))
        })
        .collect()
}

fn near_singular(sigma: &[f64]) -> bool {
    let hi = sigma.first().copied().unwrap_or(0.0);
    let lo = sigma.last().copied().unwrap_or(0.0);
    hi == 0.0 || lo <= RANK_RTOL * hi
}

pub fn align_imakura(anchors: &[Matrix], r: &Matrix) -> Result<AlignmentResult> {
    let (_, l) = check_anchors(anchors)?;
    check_square(r, l, "target factor R")?;
    if near_singular(&thin_svd(r)?.sigma) {
        return Err(Error::Singular("target factor R is not invertible".into()));
    }
    let g = imakura_change_of_basis(anchors, r)?;
    let mut flags = Vec::new();
    for (i, gi) in g.iter().enumerate() {
        if near_singular(&thin_svd(gi)?.sigma) {
            flags.push(format!("G_{i} is numerically singular"));
        }
    }
    let anchor_residual = anchor_residual(anchors, &g)?;
    Ok(AlignmentResult {
        g,
        method: Method::Imakura,
        target: TargetRecord::Imakura { r: r.clone() },
        anchor_residual,
        flags,
    })
}

pub fn align_kawakami(anchors: &[Matrix]) -> Result<AlignmentResult> {
    let g = kawakami_change_of_basis(anchors)?;
    let anchor_residual = anchor_residual(anchors, &g)?;
    Ok(AlignmentResult {
        g,
        method: Method::Kawakami,
        target: TargetRecord::Kawakami,
        anchor_residual,
        flags: Vec::new(),
    })
}

pub fn align_odc(anchors: &[Matrix], target: &OdcTarget) -> Result<AlignmentResult> {
    let (_, l) = check_anchors(anchors)?;
    let (o, seed) = match target {
        OdcTarget::Matrix(o) => {
            check_square(o, l, "target O")?;
            let defect = o.orthonormality_defect();
            if defect.is_nan() || defect > ORTHOGONALITY_TOL {
                return Err(Error::Validation(format!(
                    "target O is not orthogonal (‖OᵀO − I‖_F = {defect:.3e})"
                )));
            }
            (o.clone(), None)
        }
        OdcTarget::Seed(s) => (haar_orthogonal(l, *s), Some(*s)),
    };
    let mut g = Vec::with_capacity(anchors.len());
    let mut flags = Vec::new();
    for (i, (gi, sigma)) in odc_with_svds(anchors, &o)?.into_iter().enumerate() {
        if near_singular(&sigma) {
            flags.push(format!("A_{i}ᵀA_1O is rank deficient; G_{i} is not unique"));
        }
        g.push(gi);
    }
    let anchor_residual = anchor_residual(anchors, &g)?;
    Ok(AlignmentResult {
        g,
        method: Method::Odc,
        target: TargetRecord::Odc { o, seed },
        anchor_residual,
        flags,
    })
}

/// Checks `F_1G_1 = ⋯ = F_cG_c` against the users' private bases.
///
/// Diagnostic only: it needs data the analyst never sees.
pub fn concordance_report(
    users: &[UserPrivate],
    result: &AlignmentResult,
    o_used: Option<&Matrix>,
) -> Result<ConcordanceReport> {
    if users.len() != result.g.len() {
        return Err(Error::Dimension(format!(
            "{} users for {} change-of-basis matrices",
            users.len(),
            result.g.len()
        )));
    }
    let fs: Vec<Matrix> = users.iter().map(|u| u.f.clone()).collect();
    let fg = aligned(&fs, &result.g)?;
    let norm = fg[0].frobenius_norm();
    let denom = if norm > 0.0 { norm } else { 1.0 };
    let mut basis_residual = 0.0f64;
    for m in &fg[1..] {
        basis_residual = basis_residual.max(m.frobenius_distance(&fg[0])? / denom);
    }
    let theoretical_check = match (result.method, o_used) {
        (Method::Odc, Some(o)) => {
            let f1_pinv = pinv(&fs[0])?;
            let mut worst = 0.0f64;
            for (f, g) in fs.iter().zip(&result.g) {
                let e = f1_pinv.matmul(f)?;
                worst = worst.max(g.frobenius_distance(&e.t_matmul(o)?)?);
            }
            Some(worst)
        }
        _ => None,
    };
    let satisfied = basis_residual <= CONCORDANCE_TOL && theoretical_check.is_none_or(|t| t <= CONCORDANCE_TOL);
    Ok(ConcordanceReport {
        basis_residual,
        theoretical_check,
        satisfied,
        tolerance: CONCORDANCE_TOL,
    })
}

/// Relative residual of the best single orthogonal map taking the stacked
/// `left` blocks onto the stacked `right` blocks. Near zero exactly when the
/// two alignments differ by one common orthogonal transform.
pub fn common_rotation_residual(left: &[Matrix], right: &[Matrix]) -> Result<f64> {
    if left.is_empty() || left.len() != right.len() {
        return Err(Error::Dimension(format!(
            "{} left blocks vs {} right blocks",
            left.len(),
            right.len()
        )));
    }
    for (i, (l, r)) in left.iter().zip(right).enumerate() {
        if l.shape() != r.shape() {
            return Err(Error::Dimension(format!(
                "block {i}: {:?} vs {:?}",
                l.shape(),
                r.shape()
            )));
        }
    }
    let lrefs: Vec<&Matrix> = left.iter().collect();
    let rrefs: Vec<&Matrix> = right.iter().collect();
    let (ls, rs) = (Matrix::vstack(&lrefs)?, Matrix::vstack(&rrefs)?);
    let (o, _) = polar_factor(&ls.t_matmul(&rs)?)?;
    let norm = rs.frobenius_norm();
    Ok(ls.matmul(&o)?.frobenius_distance(&rs)? / if norm > 0.0 { norm } else { 1.0 })
}
