//! Clustering agreement scores (NMI, ARI, ACC), optimal assignment, and
//! mode-coverage statistics for generated samples.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

/// Default fraction of the uniform share a mode needs to count as covered.
pub const DEFAULT_MIN_FRAC: f64 = 0.2;
/// Coverage radius in units of the mode standard deviation.
pub const COVERAGE_RADIUS: f64 = 3.0;

/// Non-empty sequence of cluster ids.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct LabelSequence(Vec<usize>);

impl LabelSequence {
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(invalid("label sequence is empty"));
        }
        Ok(Self(labels))
    }

    /// One more than the largest label.
    pub fn n_classes(&self) -> usize {
        self.0.iter().max().map_or(0, |m| m + 1)
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }
}

impl Deref for LabelSequence {
    type Target = [usize];
    fn deref(&self) -> &[usize] {
        &self.0
    }
}

impl TryFrom<Vec<usize>> for LabelSequence {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<LabelSequence> for Vec<usize> {
    fn from(l: LabelSequence) -> Self {
        l.0
    }
}

/// Joint counts of two labelings.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContingencyTable {
    rows: usize,
    cols: usize,
    counts: Vec<u64>,
    row_sums: Vec<u64>,
    col_sums: Vec<u64>,
}

impl ContingencyTable {
    pub fn new(a: &[usize], b: &[usize]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::ShapeMismatch {
                op: "contingency",
                lhs: vec![a.len()],
                rhs: vec![b.len()],
            });
        }
        if a.is_empty() {
            return Err(invalid("contingency: empty labelings"));
        }
        let rows = a.iter().max().unwrap() + 1;
        let cols = b.iter().max().unwrap() + 1;
        Ok(Self::with_size(a, b, rows, cols))
    }

    fn with_size(a: &[usize], b: &[usize], rows: usize, cols: usize) -> Self {
        let mut counts = vec![0u64; rows * cols];
        let mut row_sums = vec![0u64; rows];
        let mut col_sums = vec![0u64; cols];
        for (&i, &j) in a.iter().zip(b) {
            counts[i * cols + j] += 1;
            row_sums[i] += 1;
            col_sums[j] += 1;
        }
        Self {
            rows,
            cols,
            counts,
            row_sums,
            col_sums,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.cols + j]
    }

    pub fn row_sums(&self) -> &[u64] {
        &self.row_sums
    }

    pub fn col_sums(&self) -> &[u64] {
        &self.col_sums
    }

    pub fn total(&self) -> u64 {
        self.row_sums.iter().sum()
    }

    /// True when the two labelings agree up to a renaming of ids.
    pub fn is_bijective(&self) -> bool {
        let nz_row = |i: usize| (0..self.cols).filter(|&j| self.get(i, j) > 0).count();
        let nz_col = |j: usize| (0..self.rows).filter(|&i| self.get(i, j) > 0).count();
        (0..self.rows).all(|i| self.row_sums[i] == 0 || nz_row(i) == 1)
            && (0..self.cols).all(|j| self.col_sums[j] == 0 || nz_col(j) == 1)
    }
}

fn entropy(marginal: &[u64], n: f64) -> f64 {
    marginal
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information `I(a;b) / sqrt(H(a) H(b))`.
///
/// Two constant labelings score 1; otherwise a zero entropy on either side
/// scores 0.
pub fn nmi(a: &[usize], b: &[usize]) -> Result<f64> {
    let t = ContingencyTable::new(a, b)?;
    let n = t.total() as f64;
    let ha = entropy(&t.row_sums, n);
    let hb = entropy(&t.col_sums, n);
    if ha == 0.0 || hb == 0.0 {
        return Ok(if ha == 0.0 && hb == 0.0 { 1.0 } else { 0.0 });
    }
    let mut mi = 0.0;
    for i in 0..t.rows {
        for j in 0..t.cols {
            let c = t.get(i, j);
            if c > 0 {
                let c = c as f64;
                mi += c / n * (n * c / (t.row_sums[i] as f64 * t.col_sums[j] as f64)).ln();
            }
        }
    }
    Ok((mi / (ha * hb).sqrt()).clamp(0.0, 1.0))
}

fn pairs(c: u64) -> i128 {
    let c = c as i128;
    c * (c - 1) / 2
}

/// Adjusted Rand index.
///
/// When the maximum and expected index coincide the score is 1 for labelings
/// equal up to renaming and 0 otherwise.
pub fn ari(a: &[usize], b: &[usize]) -> Result<f64> {
    let t = ContingencyTable::new(a, b)?;
    if t.total() < 2 {
        return Err(invalid("ari: needs at least two samples"));
    }
    let index: i128 = t.counts.iter().map(|&c| pairs(c)).sum();
    let sa: i128 = t.row_sums.iter().map(|&c| pairs(c)).sum();
    let sb: i128 = t.col_sums.iter().map(|&c| pairs(c)).sum();
    let total = pairs(t.total());
    // (index - sa*sb/total) / ((sa+sb)/2 - sa*sb/total), scaled by 2*total.
    let num = 2 * (total * index - sa * sb);
    let den = total * (sa + sb) - 2 * sa * sb;
    if den == 0 {
        return Ok(if t.is_bijective() { 1.0 } else { 0.0 });
    }
    Ok(num as f64 / den as f64)
}

/// Row-to-column assignment from [`hungarian`].
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    /// `perm[i]` is the column matched to row `i`.
    pub perm: Vec<usize>,
    pub cost: f64,
}

/// Minimum cost of a square matrix assignment (shortest augmenting paths
/// with potentials, O(K^3)). Returns the column per row and the cost.
fn min_assignment(cost: &[f64], k: usize) -> (Vec<usize>, f64) {
    if k == 0 {
        return (Vec::new(), 0.0);
    }
    let inf = f64::INFINITY;
    let mut u = vec![0.0; k + 1];
    let mut v = vec![0.0; k + 1];
    // p[j]: row (1-based) matched to column j; column 0 is a sentinel.
    let mut p = vec![0usize; k + 1];
    let mut way = vec![0usize; k + 1];
    for i in 1..=k {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; k + 1];
        let mut used = vec![false; k + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=k {
                if !used[j] {
                    let cur = cost[(i0 - 1) * k + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=k {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0; k];
    for j in 1..=k {
        perm[p[j] - 1] = j - 1;
    }
    let total = (0..k).map(|i| cost[i * k + perm[i]]).sum();
    (perm, total)
}

/// Optimal assignment minimizing total cost; among optimal assignments the
/// lexicographically smallest permutation is returned.
pub fn hungarian(cost: &[Vec<f64>]) -> Result<Assignment> {
    let k = cost.len();
    if cost.iter().any(|r| r.len() != k) {
        return Err(Error::ShapeMismatch {
            op: "hungarian",
            lhs: vec![k, cost.first().map_or(0, Vec::len)],
            rhs: vec![k, k],
        });
    }
    let flat: Vec<f64> = cost.iter().flatten().copied().collect();
    if flat.iter().any(|c| !c.is_finite()) {
        return Err(invalid("hungarian: non-finite cost"));
    }
    let (_, best) = min_assignment(&flat, k);
    let scale = flat.iter().fold(1.0f64, |m, c| m.max(c.abs()));
    let tol = 1e-9 * scale * k as f64;

    // Fix rows in order, taking the smallest column that still admits an
    // optimal completion.
    let mut perm = Vec::with_capacity(k);
    let mut free_cols: Vec<usize> = (0..k).collect();
    let mut fixed_cost = 0.0;
    for row in 0..k {
        let rest_rows = k - row - 1;
        let mut chosen = None;
        for (pos, &col) in free_cols.iter().enumerate() {
            let cols: Vec<usize> = free_cols.iter().copied().filter(|&c| c != col).collect();
            let sub: Vec<f64> = (row + 1..k)
                .flat_map(|r| cols.iter().map(move |&c| (r, c)))
                .map(|(r, c)| flat[r * k + c])
                .collect();
            let (_, sub_cost) = min_assignment(&sub, rest_rows);
            if fixed_cost + flat[row * k + col] + sub_cost <= best + tol {
                chosen = Some(pos);
                break;
            }
        }
        let pos = chosen.expect("some column completes an optimal assignment");
        let col = free_cols.remove(pos);
        fixed_cost += flat[row * k + col];
        perm.push(col);
    }
    let cost = (0..k).map(|i| flat[i * k + perm[i]]).sum();
    Ok(Assignment { perm, cost })
}

/// Best accuracy over one-to-one relabelings of `pred` onto `truth`.
pub fn acc(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let t = ContingencyTable::new(pred, truth)?;
    let k = t.rows.max(t.cols);
    let t = ContingencyTable::with_size(pred, truth, k, k);
    let cost: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| -(t.get(i, j) as f64)).collect())
        .collect();
    let a = hungarian(&cost)?;
    Ok(-a.cost / t.total() as f64)
}

/// All three clustering scores.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusteringReport {
    pub nmi: f64,
    pub ari: f64,
    pub acc: f64,
}

impl ClusteringReport {
    pub fn compute(pred: &[usize], truth: &[usize]) -> Result<Self> {
        Ok(Self {
            nmi: nmi(pred, truth)?,
            ari: ari(pred, truth)?,
            acc: acc(pred, truth)?,
        })
    }
}

/// Coverage of known modes by a sample set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeMetrics {
    pub modes_covered: usize,
    pub off_manifold_frac: f64,
    /// Samples within the coverage radius of each center.
    pub per_mode_counts: Vec<usize>,
}

/// Counts modes with at least `min_frac * n / K` samples within `3 sigma`
/// of their center, and the fraction of samples outside every such ball.
/// A mode with no nearby samples is never covered.
pub fn mode_metrics<T: Scalar>(
    samples: &Tensor<T>,
    centers: &Tensor<T>,
    sigma: f64,
    min_frac: f64,
) -> Result<ModeMetrics> {
    if samples.shape().len() != 2 || samples.rows() == 0 || centers.shape().len() != 2 || centers.rows() == 0 {
        return Err(invalid("mode_metrics: samples and centers must be non-empty matrices"));
    }
    if samples.cols() != centers.cols() {
        return Err(Error::ShapeMismatch {
            op: "mode_metrics",
            lhs: samples.shape().to_vec(),
            rhs: centers.shape().to_vec(),
        });
    }
    if !(sigma > 0.0) || !(0.0..=1.0).contains(&min_frac) {
        return Err(invalid("mode_metrics: need sigma > 0 and min_frac in [0, 1]"));
    }
    let r2 = (COVERAGE_RADIUS * sigma).powi(2);
    let (n, k) = (samples.rows(), centers.rows());
    let mut counts = vec![0usize; k];
    let mut off = 0usize;
    for i in 0..n {
        let x = samples.row(i);
        let mut near = false;
        for (j, count) in counts.iter_mut().enumerate() {
            let d2: f64 = x
                .iter()
                .zip(centers.row(j))
                .map(|(&a, &b)| (a - b).to_f64_exact().powi(2))
                .sum();
            if d2 <= r2 {
                *count += 1;
                near = true;
            }
        }
        if !near {
            off += 1;
        }
    }
    let threshold = min_frac * n as f64 / k as f64;
    let modes_covered = counts
        .iter()
        .filter(|&&c| c > 0 && c as f64 >= threshold)
        .count();
    Ok(ModeMetrics {
        modes_covered,
        off_manifold_frac: off as f64 / n as f64,
        per_mode_counts: counts,
    })
}
