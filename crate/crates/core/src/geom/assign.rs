use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Pairwise affinities between `rows` detections and `cols` predictions.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinityMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl AffinityMatrix {
    /// Entries must be finite and lie in `[0, 1]`.
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::InvalidArgument(alloc::format!(
                "affinity matrix {rows}x{cols} needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && (0.0..=1.0).contains(*v))) {
            return Err(Error::InvalidArgument(alloc::format!("affinity {v} outside [0, 1]")));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let values = (0..rows * cols).map(|i| f(i / cols.max(1), i % cols.max(1))).collect();
        Self::new(rows, cols, values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }
}

/// A one-to-one matching between rows and columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    /// `(row, col)` pairs sorted by row.
    pub pairs: Vec<(usize, usize)>,
    /// Sum of the matched affinities, accumulated in row order.
    pub total: f64,
}

impl Assignment {
    pub fn col_for_row(&self, i: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.0 == i).map(|p| p.1)
    }

    pub fn row_for_col(&self, j: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.1 == j).map(|p| p.0)
    }
}

/// Maximum-weight bipartite matching (Kuhn-Munkres with potentials, O(n^3)).
///
/// The matrix is padded to a square with zero affinities; matches that land on the
/// padding are dropped, so at most `min(rows, cols)` pairs are returned.
pub fn hungarian(aff: &AffinityMatrix) -> Assignment {
    let n = aff.rows.max(aff.cols);
    if n == 0 {
        return Assignment {
            pairs: Vec::new(),
            total: 0.0,
        };
    }
    // minimise cost = 1 - affinity on a 1-indexed square matrix
    let cost = |i: usize, j: usize| -> f64 {
        if i <= aff.rows && j <= aff.cols {
            1.0 - aff.get(i - 1, j - 1)
        } else {
            1.0
        }
    };
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1]; // p[j] = row matched to column j
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0, j) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
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
    let mut pairs: Vec<(usize, usize)> = (1..=n)
        .filter(|&j| p[j] >= 1 && p[j] <= aff.rows && j <= aff.cols)
        .map(|j| (p[j] - 1, j - 1))
        .collect();
    pairs.sort_unstable();
    let total = pairs.iter().map(|&(i, j)| aff.get(i, j)).sum();
    Assignment { pairs, total }
}
