//! Representational similarity analysis: cosine self-similarity matrices
//! compared row by row with Kendall's τ-b.

use std::cmp::Ordering;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which side a similarity matrix was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimilarityKind {
    Text,
    Color,
}

/// Symmetric n×n cosine similarities.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub values: Array2<f64>,
    pub kind: SimilarityKind,
}

impl SimilarityMatrix {
    /// Cosine similarity of every pair of rows. Rows must have nonzero norm.
    pub fn cosine(points: ArrayView2<'_, f64>, kind: SimilarityKind) -> Result<Self> {
        let norms: Vec<f64> = points.axis_iter(Axis(0)).map(|r| r.dot(&r).sqrt()).collect();
        if let Some(i) = norms.iter().position(|&n| n == 0.0 || !n.is_finite()) {
            return Err(Error::Domain(format!("row {i} has zero or non-finite norm")));
        }
        let gram = points.dot(&points.t());
        let n = points.nrows();
        let mut values = Array2::zeros((n, n));
        for i in 0..n {
            values[[i, i]] = 1.0;
            for k in (i + 1)..n {
                let c = (gram[[i, k]] / (norms[i] * norms[k])).clamp(-1.0, 1.0);
                values[[i, k]] = c;
                values[[k, i]] = c;
            }
        }
        Ok(SimilarityMatrix { values, kind })
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Row indices whose norm is zero in either matrix.
pub fn zero_norm_rows(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Vec<usize> {
    (0..x.nrows())
        .filter(|&i| {
            let a = x.row(i);
            let b = y.row(i);
            a.dot(&a) == 0.0 || b.dot(&b) == 0.0
        })
        .collect()
}

fn cmp_f64(a: &f64, b: &f64) -> Ordering {
    a.partial_cmp(b).expect("finite values")
}

/// Number of unordered pairs among `n` items.
fn pairs(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

/// Sum of t(t-1)/2 over runs of equal values in a sorted slice.
fn tied_pairs<T>(sorted: &[T], eq: impl Fn(&T, &T) -> bool) -> u64 {
    let mut total = 0;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if eq(&w[0], &w[1]) {
            run += 1;
        } else {
            total += pairs(run);
            run = 1;
        }
    }
    total + pairs(run)
}

/// Merge sort on `y` that returns the number of inversions (swaps).
fn sort_counting_swaps(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = sort_counting_swaps(&mut v[..mid], &mut buf[..mid]);
    swaps += sort_counting_swaps(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if cmp_f64(&v[j], &v[i]) == Ordering::Less {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Concordance counts for a pair of equal-length sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KendallCounts {
    /// Concordant minus discordant pairs.
    pub numerator: i64,
    /// Pairs not tied in x.
    pub untied_x: u64,
    /// Pairs not tied in y.
    pub untied_y: u64,
}

impl KendallCounts {
    /// τ-b, or `None` when either sequence is constant.
    pub fn tau_b(&self) -> Option<f64> {
        if self.untied_x == 0 || self.untied_y == 0 {
            return None;
        }
        Some(self.numerator as f64 / ((self.untied_x as f64) * (self.untied_y as f64)).sqrt())
    }
}

/// Knight's O(n log n) concordance counting.
pub fn kendall_counts(x: ArrayView1<'_, f64>, y: ArrayView1<'_, f64>) -> Result<KendallCounts> {
    if x.len() != y.len() {
        return Err(Error::Argument(format!("length mismatch {} vs {}", x.len(), y.len())));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Domain("kendall inputs must be finite".into()));
    }
    let n = x.len() as u64;
    let mut joint: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    joint.sort_by(|a, b| cmp_f64(&a.0, &b.0).then(cmp_f64(&a.1, &b.1)));

    let tied_x = tied_pairs(&joint, |a, b| a.0 == b.0);
    let tied_xy = tied_pairs(&joint, |a, b| a.0 == b.0 && a.1 == b.1);

    let mut ys: Vec<f64> = joint.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; ys.len()];
    let swaps = sort_counting_swaps(&mut ys, &mut buf);
    let tied_y = tied_pairs(&ys, |a, b| a == b);

    let total = pairs(n);
    // Pairs untied in both coordinates, minus twice the discordant ones.
    let untied_both = total - tied_x - tied_y + tied_xy;
    Ok(KendallCounts {
        numerator: untied_both as i64 - 2 * swaps as i64,
        untied_x: total - tied_x,
        untied_y: total - tied_y,
    })
}

pub fn kendall_tau_b(x: ArrayView1<'_, f64>, y: ArrayView1<'_, f64>) -> Result<Option<f64>> {
    Ok(kendall_counts(x, y)?.tau_b())
}

/// Row-wise and flattened τ-b between two similarity matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct RsaScores {
    /// τ-b of each row with its diagonal entry removed; `None` where undefined.
    pub per_row: Vec<Option<f64>>,
    /// Mean over rows where τ-b is defined.
    pub mean_row_tau: f64,
    /// Single τ-b over the strict upper triangles.
    pub flattened_tau: Option<f64>,
}

pub fn compare_similarities(text: &SimilarityMatrix, color: &SimilarityMatrix) -> Result<RsaScores> {
    let n = text.len();
    if color.len() != n {
        return Err(Error::Argument(format!("similarity sizes differ: {n} vs {}", color.len())));
    }
    if n < 3 {
        return Err(Error::Argument(format!("rsa needs at least 3 items, got {n}")));
    }
    let mut per_row = Vec::with_capacity(n);
    let mut a = ndarray::Array1::zeros(n - 1);
    let mut b = ndarray::Array1::zeros(n - 1);
    for i in 0..n {
        let mut k = 0;
        for j in (0..n).filter(|&j| j != i) {
            a[k] = text.values[[i, j]];
            b[k] = color.values[[i, j]];
            k += 1;
        }
        per_row.push(kendall_tau_b(a.view(), b.view())?);
    }
    let defined: Vec<f64> = per_row.iter().flatten().copied().collect();
    let mean_row_tau = if defined.is_empty() {
        f64::NAN
    } else {
        defined.iter().sum::<f64>() / defined.len() as f64
    };

    let upper = |m: &Array2<f64>| -> ndarray::Array1<f64> {
        (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).map(|(i, j)| m[[i, j]]).collect()
    };
    let flattened_tau = kendall_tau_b(upper(&text.values).view(), upper(&color.values).view())?;
    Ok(RsaScores {
        per_row,
        mean_row_tau,
        flattened_tau,
    })
}
