//! User-side protocol steps: anchor generation, secret bases, synthetic
//! scenarios, encoding of intermediate representations, and the collusion
//! reconstruction `F_j = A†A_j`.

use log::info;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernels::{haar_orthogonal_with, pinv, seeded_rng, thin_svd, Matrix, RANK_RTOL};

/// Radius of the sphere on which blob means are drawn.
pub const BLOB_RADIUS: f64 = 5.0;

/// Relative singular-value floor for an acceptable anchor.
pub const ANCHOR_RANK_RTOL: f64 = 1e-10;

// Stream tags mixed into the scenario seed. Users take the small indices,
// so these sit at the top of the u64 range.
const ANCHOR_STREAM: u64 = u64::MAX;
const MEANS_STREAM: u64 = u64::MAX - 1;
const HOLDOUT_STREAM: u64 = u64::MAX - 2;

/// SplitMix64 finalizer, used to derive independent sub-seeds.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for user `i`; independent of how many users exist.
pub fn user_seed(seed: u64, i: usize) -> u64 {
    seed ^ splitmix64(i as u64)
}

/// Relationship between the users' secret bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BasisCondition {
    /// Common span, orthonormal columns.
    SameSpanOrth,
    /// Common span, invertible (non-orthogonal) mixing.
    SameSpan,
    /// User-specific spans, orthonormal columns.
    DiffSpanOrth,
    /// User-specific spans, invertible mixing.
    DiffSpan,
}

impl BasisCondition {
    pub const ALL: [BasisCondition; 4] = [
        BasisCondition::SameSpanOrth,
        BasisCondition::SameSpan,
        BasisCondition::DiffSpanOrth,
        BasisCondition::DiffSpan,
    ];

    pub fn same_span(self) -> bool {
        matches!(self, BasisCondition::SameSpanOrth | BasisCondition::SameSpan)
    }

    pub fn orthonormal(self) -> bool {
        matches!(self, BasisCondition::SameSpanOrth | BasisCondition::DiffSpanOrth)
    }
}

/// Everything needed to regenerate a synthetic collaboration instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub users: usize,
    pub feature_dim: usize,
    pub latent_dim: usize,
    pub samples_per_user: usize,
    pub anchor_rows: usize,
    pub condition: BasisCondition,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("users", self.users),
            ("feature_dim", self.feature_dim),
            ("latent_dim", self.latent_dim),
            ("samples_per_user", self.samples_per_user),
            ("anchor_rows", self.anchor_rows),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Validation(format!("{name} must be positive")));
        }
        if self.latent_dim > self.feature_dim {
            return Err(Error::Validation(format!(
                "latent_dim {} exceeds feature_dim {}",
                self.latent_dim, self.feature_dim
            )));
        }
        if self.anchor_rows <= self.feature_dim {
            return Err(Error::Validation(format!(
                "anchor_rows {} must exceed feature_dim {}",
                self.anchor_rows, self.feature_dim
            )));
        }
        if self.samples_per_user < self.latent_dim {
            return Err(Error::Validation(format!(
                "samples_per_user {} is below latent_dim {}; the top-{} subspace is undefined",
                self.samples_per_user, self.latent_dim, self.latent_dim
            )));
        }
        Ok(())
    }
}

/// Data a user never shares.
#[derive(Debug, Clone, PartialEq)]
pub struct UserPrivate {
    /// `n_i×m` private samples.
    pub x: Matrix,
    pub labels: Vec<usize>,
    /// `m×ℓ` secret basis.
    pub f: Matrix,
    /// `ℓ×ℓ` mixing factor with `f = V·e`.
    pub e: Matrix,
}

/// What the analyst receives from one user.
#[derive(Debug, Clone, PartialEq)]
pub struct IntermediateBundle {
    /// `n_i×ℓ`.
    pub x_tilde: Matrix,
    /// `a×ℓ`.
    pub a_i: Matrix,
    pub labels: Vec<usize>,
}

/// A generated collaboration instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub anchor: Matrix,
    /// `ℓ×m`, one blob mean per row.
    pub class_means: Matrix,
    pub users: Vec<UserPrivate>,
}

impl Scenario {
    pub fn bundles(&self) -> Result<Vec<IntermediateBundle>> {
        self.users.iter().map(|u| encode_user(u, &self.anchor)).collect()
    }

    /// Projected anchors `A·F_i`, in user order.
    pub fn projected_anchors(&self) -> Result<Vec<Matrix>> {
        self.users.iter().map(|u| self.anchor.matmul(&u.f)).collect()
    }

    /// Fresh samples from the same blobs. `stream` selects an independent draw.
    pub fn holdout(&self, n: usize, stream: u64) -> Result<(Matrix, Vec<usize>)> {
        let mut rng = seeded_rng(self.spec.seed ^ splitmix64(HOLDOUT_STREAM ^ splitmix64(stream)));
        sample_blobs(&self.class_means, n, &mut rng)
    }
}

/// Uniform `[0,1)` anchor with verified full column rank.
pub fn generate_anchor(a: usize, m: usize, seed: u64) -> Result<Matrix> {
    if m == 0 || a <= m {
        return Err(Error::Dimension(format!(
            "anchor needs a > m >= 1, got a = {a}, m = {m}"
        )));
    }
    let mut rng = seeded_rng(seed);
    let anchor = Matrix::uniform(a, m, &mut rng);
    let s = thin_svd(&anchor)?.sigma;
    let (hi, lo) = (s[0], s[s.len() - 1]);
    if lo <= ANCHOR_RANK_RTOL * hi {
        return Err(Error::Rank(format!(
            "anchor singular value ratio {:.3e} below {ANCHOR_RANK_RTOL:e} (seed {seed})",
            lo / hi
        )));
    }
    Ok(anchor)
}

/// Draws `n` labelled points from unit-covariance blobs centred on the rows
/// of `means`. Labels cycle through the classes so every class appears once
/// `n ≥ k`.
pub fn sample_blobs<R: Rng + ?Sized>(means: &Matrix, n: usize, rng: &mut R) -> Result<(Matrix, Vec<usize>)> {
    if n == 0 {
        return Err(Error::Dimension("cannot sample zero points".into()));
    }
    let (k, m) = means.shape();
    let labels: Vec<usize> = (0..n).map(|s| s % k).collect();
    let mut data = Vec::with_capacity(n * m);
    for &lab in &labels {
        let mu = means.row(lab);
        for &mj in mu {
            let z: f64 = StandardNormal.sample(rng);
            data.push(mj + z);
        }
    }
    Ok((Matrix::new(n, m, data)?, labels))
}

fn blob_means(k: usize, m: usize, seed: u64) -> Matrix {
    let mut rng = seeded_rng(seed ^ splitmix64(MEANS_STREAM));
    let mut rows = Vec::with_capacity(k);
    for _ in 0..k {
        let mut v: Vec<f64>;
        loop {
            v = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                v.iter_mut().for_each(|x| *x *= BLOB_RADIUS / norm);
                break;
            }
        }
        rows.push(v);
    }
    Matrix::from_rows(&rows).expect("finite means")
}

/// Top-`ℓ` right singular vectors of `x`, as an `m×ℓ` matrix.
fn top_right_basis(x: &Matrix, l: usize) -> Result<Matrix> {
    let svd = thin_svd(x)?;
    Ok(svd.vt.row_range(0, l)?.transpose())
}

fn mixing_factor<R: Rng + ?Sized>(l: usize, orthonormal: bool, user: usize, rng: &mut R) -> Result<Matrix> {
    if orthonormal {
        return Ok(haar_orthogonal_with(l, rng));
    }
    loop {
        let e = Matrix::uniform(l, l, rng);
        let s = thin_svd(&e)?.sigma;
        if s[s.len() - 1] >= RANK_RTOL * s[0] && s[0] > 0.0 {
            return Ok(e);
        }
        info!("user {user}: near-singular uniform mixing factor, redrawing");
    }
}

/// Builds anchor, blob means and per-user private data for `spec`.
pub fn make_scenario(spec: &ScenarioSpec) -> Result<Scenario> {
    spec.validate()?;
    let (m, l, n) = (spec.feature_dim, spec.latent_dim, spec.samples_per_user);
    let anchor = generate_anchor(spec.anchor_rows, m, spec.seed ^ splitmix64(ANCHOR_STREAM))?;
    let class_means = blob_means(l, m, spec.seed);

    let mut shared_basis: Option<Matrix> = None;
    let mut users = Vec::with_capacity(spec.users);
    for i in 0..spec.users {
        let mut rng = seeded_rng(user_seed(spec.seed, i));
        let (x, labels) = sample_blobs(&class_means, n, &mut rng)?;
        let e = mixing_factor(l, spec.condition.orthonormal(), i, &mut rng)?;
        let v = if spec.condition.same_span() {
            match &shared_basis {
                Some(v1) => v1.clone(),
                None => {
                    let v1 = top_right_basis(&x, l)?;
                    shared_basis = Some(v1.clone());
                    v1
                }
            }
        } else {
            top_right_basis(&x, l)?
        };
        let f = v.matmul(&e)?;
        users.push(UserPrivate { x, labels, f, e });
    }
    Ok(Scenario {
        spec: spec.clone(),
        anchor,
        class_means,
        users,
    })
}

/// `X̃_i = X_i F_i` and `A_i = A F_i`.
pub fn encode_user(user: &UserPrivate, anchor: &Matrix) -> Result<IntermediateBundle> {
    if user.labels.len() != user.x.rows() {
        return Err(Error::Dimension(format!(
            "{} labels for {} samples",
            user.labels.len(),
            user.x.rows()
        )));
    }
    Ok(IntermediateBundle {
        x_tilde: user.x.matmul(&user.f)?,
        a_i: anchor.matmul(&user.f)?,
        labels: user.labels.clone(),
    })
}

/// What a colluding user who knows `A` learns from `A_j`: `A†A_j`, which is
/// exactly `F_j` whenever `A` has full column rank.
pub fn collude_reconstruct(anchor: &Matrix, a_j: &Matrix) -> Result<Matrix> {
    if a_j.rows() != anchor.rows() {
        return Err(Error::Dimension(format!(
            "anchor has {} rows, projected anchor has {}",
            anchor.rows(),
            a_j.rows()
        )));
    }
    let svd = thin_svd(anchor)?;
    if svd.rank() < anchor.cols() {
        return Err(Error::Rank(format!(
            "anchor rank {} below its {} columns",
            svd.rank(),
            anchor.cols()
        )));
    }
    pinv(anchor)?.matmul(a_j)
}

/// One-hot label matrix (`n×k`).
pub fn one_hot(labels: &[usize], k: usize) -> Result<Matrix> {
    if labels.is_empty() || k == 0 {
        return Err(Error::Dimension("one-hot encoding needs labels and classes".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::Validation(format!("label {bad} outside 0..{k}")));
    }
    Ok(Matrix::from_fn(
        labels.len(),
        k,
        |i, j| if labels[i] == j { 1.0 } else { 0.0 },
    ))
}
