//! Nearest-centroid classifier over aligned representations, plus the
//! distance-geometry helpers used to compare alignments.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernels::io::{read_dcm1, write_dcm1};
use crate::numkernels::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct CentroidModel {
    /// `k×ℓ`, one row per class, in `class_ids` order.
    pub centroids: Matrix,
    /// Ascending.
    pub class_ids: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ClassList {
    class_ids: Vec<usize>,
}

/// Fits one centroid per label present in `labels`.
pub fn fit_nearest_centroid(x_hat: &Matrix, labels: &[usize]) -> Result<CentroidModel> {
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    fit_nearest_centroid_with_classes(x_hat, labels, &classes)
}

/// Fits centroids for exactly `classes`; a class without samples is an error.
pub fn fit_nearest_centroid_with_classes(x_hat: &Matrix, labels: &[usize], classes: &[usize]) -> Result<CentroidModel> {
    if labels.len() != x_hat.rows() {
        return Err(Error::Validation(format!(
            "{} labels for {} rows",
            labels.len(),
            x_hat.rows()
        )));
    }
    if classes.is_empty() {
        return Err(Error::Validation("no classes to fit".into()));
    }
    let mut class_ids = classes.to_vec();
    class_ids.sort_unstable();
    class_ids.dedup();
    let l = x_hat.cols();
    let mut sums = vec![0.0; class_ids.len() * l];
    let mut counts = vec![0usize; class_ids.len()];
    for (i, lab) in labels.iter().enumerate() {
        let Ok(k) = class_ids.binary_search(lab) else {
            return Err(Error::Validation(format!(
                "label {lab} at row {i} is not among the fitted classes"
            )));
        };
        counts[k] += 1;
        for (s, v) in sums[k * l..(k + 1) * l].iter_mut().zip(x_hat.row(i)) {
            *s += v;
        }
    }
    if let Some(k) = counts.iter().position(|&n| n == 0) {
        return Err(Error::Validation(format!("class {} has no samples", class_ids[k])));
    }
    for (k, &n) in counts.iter().enumerate() {
        sums[k * l..(k + 1) * l].iter_mut().for_each(|s| *s /= n as f64);
    }
    Ok(CentroidModel {
        centroids: Matrix::new(class_ids.len(), l, sums)?,
        class_ids,
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl CentroidModel {
    fn check_query(&self, y: &Matrix) -> Result<()> {
        if y.cols() != self.centroids.cols() {
            return Err(Error::Dimension(format!(
                "query has {} columns, model has {}",
                y.cols(),
                self.centroids.cols()
            )));
        }
        Ok(())
    }

    /// Squared distance from each query row to each centroid (`n×k`).
    pub fn distances(&self, y: &Matrix) -> Result<Matrix> {
        self.check_query(y)?;
        let k = self.class_ids.len();
        Ok(Matrix::from_fn(y.rows(), k, |i, j| {
            sq_dist(y.row(i), self.centroids.row(j))
        }))
    }

    /// Nearest centroid per row; ties go to the smallest class id.
    pub fn predict(&self, y: &Matrix) -> Result<Vec<usize>> {
        let d = self.distances(y)?;
        Ok((0..d.rows())
            .map(|i| {
                let row = d.row(i);
                // class_ids ascend, so the first minimum wins ties.
                let mut best = 0;
                for (j, &v) in row.iter().enumerate() {
                    if v < row[best] {
                        best = j;
                    }
                }
                self.class_ids[best]
            })
            .collect())
    }

    /// `d²_second − d²_best` per row; infinite with a single class.
    pub fn margins(&self, y: &Matrix) -> Result<Vec<f64>> {
        let d = self.distances(y)?;
        Ok((0..d.rows())
            .map(|i| {
                let mut v = d.row(i).to_vec();
                v.sort_by(f64::total_cmp);
                if v.len() < 2 {
                    f64::INFINITY
                } else {
                    v[1] - v[0]
                }
            })
            .collect())
    }

    /// Writes `centroids.dcm1` and `classes.json` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        write_dcm1(dir.join("centroids.dcm1"), &self.centroids)?;
        let list = ClassList {
            class_ids: self.class_ids.clone(),
        };
        fs::write(dir.join("classes.json"), serde_json::to_vec_pretty(&list)?)?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let centroids = read_dcm1(dir.join("centroids.dcm1"))?;
        let list: ClassList = serde_json::from_slice(&fs::read(dir.join("classes.json"))?)?;
        if list.class_ids.len() != centroids.rows() {
            return Err(Error::Validation(format!(
                "{} class ids for {} centroids",
                list.class_ids.len(),
                centroids.rows()
            )));
        }
        if list.class_ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation("class ids must be strictly ascending".into()));
        }
        Ok(CentroidModel {
            centroids,
            class_ids: list.class_ids,
        })
    }
}

/// Fraction of positions where `pred` and `truth` agree.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        )));
    }
    Ok(pred.iter().zip(truth).filter(|(p, t)| p == t).count() as f64 / pred.len() as f64)
}

/// Pairwise Euclidean distances between the rows of `x` (`n×n`).
pub fn pairwise_distances(x: &Matrix) -> Matrix {
    let n = x.rows();
    Matrix::from_fn(n, n, |i, j| sq_dist(x.row(i), x.row(j)).sqrt())
}

/// Largest factor by which any pairwise row distance changes between `a`
/// and `b` (`max over pairs of max(d_b/d_a, d_a/d_b)`). Pairs that are
/// (numerically) coincident in either geometry are ignored.
pub fn distance_distortion(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.rows() != b.rows() {
        return Err(Error::Dimension(format!("{} rows vs {} rows", a.rows(), b.rows())));
    }
    let (da, db) = (pairwise_distances(a), pairwise_distances(b));
    let floor = 1e-12 * da.max_abs().max(db.max_abs()).max(f64::MIN_POSITIVE);
    let mut worst = 1.0f64;
    for i in 0..a.rows() {
        for j in i + 1..a.rows() {
            let (x, y) = (da.get(i, j), db.get(i, j));
            if x > floor && y > floor {
                worst = worst.max(x / y).max(y / x);
            }
        }
    }
    Ok(worst)
}
