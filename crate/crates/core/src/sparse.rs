//! Square coordinate-list matrices kept sorted by `(row, col)`.

use ndarray::{Array2, ArrayView2};

use crate::error::{shape_err, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            entries: Vec::new(),
        }
    }

    /// Sorts the triplets and sums duplicates. Explicit zeros are kept, so a
    /// stored entry always means "edge present".
    pub fn from_triplets(n: usize, mut entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        if let Some(&(r, c, _)) = entries.iter().find(|&&(r, c, _)| r >= n || c >= n) {
            return Err(shape_err(format!("entry ({r},{c}) outside {n}x{n}")));
        }
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        entries.dedup_by(|next, kept| {
            if (next.0, next.1) == (kept.0, kept.1) {
                kept.2 += next.2;
                true
            } else {
                false
            }
        });
        Ok(Self { n, entries })
    }

    /// Wraps triplets already sorted by `(row, col)` without duplicates.
    pub(crate) fn from_sorted(n: usize, entries: Vec<(usize, usize, f64)>) -> Self {
        debug_assert!(entries.windows(2).all(|w| (w[0].0, w[0].1) < (w[1].0, w[1].1)));
        Self { n, entries }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        self.position(row, col).is_some()
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.position(row, col).map(|p| self.entries[p].2)
    }

    pub fn position(&self, row: usize, col: usize) -> Option<usize> {
        self.entries
            .binary_search_by(|e| (e.0, e.1).cmp(&(row, col)))
            .ok()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n];
        for &(r, _, v) in &self.entries {
            sums[r] += v;
        }
        sums
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n, self.n));
        for &(r, c, v) in &self.entries {
            out[[r, c]] += v;
        }
        out
    }

    /// `self * x` for a dense right-hand side.
    pub fn matmul(&self, x: ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(x.nrows(), self.n, "sparse matmul dimension mismatch");
        let mut out = Array2::zeros((self.n, x.ncols()));
        for &(r, c, v) in &self.entries {
            out.row_mut(r).scaled_add(v, &x.row(c));
        }
        out
    }

    /// `self^T * x` for a dense right-hand side.
    pub fn t_matmul(&self, x: ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(x.nrows(), self.n, "sparse matmul dimension mismatch");
        let mut out = Array2::zeros((self.n, x.ncols()));
        for &(r, c, v) in &self.entries {
            out.row_mut(c).scaled_add(v, &x.row(r));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn triplets_are_sorted_and_merged() {
        let m = SparseMatrix::from_triplets(3, vec![(2, 0, 1.0), (0, 1, 2.0), (2, 0, 0.5)]).unwrap();
        assert_eq!(m.entries(), &[(0, 1, 2.0), (2, 0, 1.5)]);
        assert_eq!(m.get(2, 0), Some(1.5));
        assert!(!m.contains(1, 1));
        assert!(SparseMatrix::from_triplets(2, vec![(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn matmul_matches_dense() {
        let m = SparseMatrix::from_triplets(3, vec![(0, 1, 2.0), (1, 1, -1.0), (2, 0, 0.5)]).unwrap();
        let x = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        assert_eq!(m.matmul(x.view()), m.to_dense().dot(&x));
        assert_eq!(m.t_matmul(x.view()), m.to_dense().t().dot(&x));
    }
}
