//! Global-wise aggregation over pattern-count signatures.
//!
//! Each node's signature is its row sum in every pattern, scaled per
//! pattern by `beta`. Nodes are linked by the similarity of signatures,
//! `B B^T`, row-normalized to unit absolute row sum.

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{shape_err, Error, Result};
use crate::patterns::PatternSet;

/// Unscaled pattern row sums, one column per pattern present.
pub(crate) fn pattern_row_sums(ps: &PatternSet) -> Array2<f64> {
    let mut out = Array2::zeros((ps.n_nodes, ps.len()));
    for (m, p) in ps.patterns.iter().enumerate() {
        for (i, s) in p.matrix.row_sums().into_iter().enumerate() {
            out[[i, m]] = s;
        }
    }
    out
}

/// `B = [rowsum(A_1) ... rowsum(A_N)] Diag(beta)`, `beta` indexed by mask slot.
pub fn build_global_pattern_matrix(ps: &PatternSet, beta: &[f64]) -> Result<Array2<f64>> {
    let mut b = pattern_row_sums(ps);
    for (m, p) in ps.patterns.iter().enumerate() {
        let scale = *beta
            .get(p.mask.slot())
            .ok_or_else(|| shape_err("beta has too few slots"))?;
        b.column_mut(m).mapv_inplace(|v| v * scale);
    }
    Ok(b)
}

fn row_abs_sums(b: ArrayView2<f64>) -> Vec<f64> {
    (0..b.nrows())
        .map(|i| b.dot(&b.row(i)).iter().map(|v| v.abs()).sum())
        .collect()
}

/// Dense `normalize(B B^T)`: every nonzero row divided by its absolute sum.
pub fn global_similarity(b: ArrayView2<f64>) -> Array2<f64> {
    let mut s = b.dot(&b.t());
    for mut row in s.axis_iter_mut(Axis(0)) {
        let total: f64 = row.iter().map(|v| v.abs()).sum();
        if total > 0.0 {
            row /= total;
        }
    }
    s
}

/// `H_global = A_global U W^1 ... W^l` (last layer only).
pub fn aggregate_global(
    a_global: ArrayView2<f64>,
    u: ArrayView2<f64>,
    w_global: &[Array2<f64>],
) -> Result<Array2<f64>> {
    if a_global.nrows() != u.nrows() || a_global.ncols() != u.nrows() {
        return Err(shape_err("global similarity does not match U"));
    }
    if w_global.is_empty() || w_global.iter().any(|w| w.nrows() != u.ncols() || w.ncols() != u.ncols()) {
        return Err(shape_err("layer weights must be d x d and nonempty"));
    }
    let mut h = a_global.dot(&u);
    for w in w_global {
        h = h.dot(w);
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("global aggregation".into()));
    }
    Ok(h)
}

/// The normalized similarity kept in factored form:
/// `A_global x = diag(1/r) B (B^T x)` with `r_i = sum_j |B_i . B_j|`.
#[derive(Clone, Debug)]
pub struct GlobalOperator {
    pub(crate) row_sums: Array2<f64>,
    pub(crate) b: Array2<f64>,
    pub(crate) r: Vec<f64>,
}

impl GlobalOperator {
    pub fn new(ps: &PatternSet, beta: &[f64]) -> Result<Self> {
        let row_sums = pattern_row_sums(ps);
        let b = build_global_pattern_matrix(ps, beta)?;
        let r = row_abs_sums(b.view());
        Ok(Self { row_sums, b, r })
    }

    pub fn pattern_matrix(&self) -> &Array2<f64> {
        &self.b
    }

    fn inv_r(&self, i: usize) -> f64 {
        if self.r[i] > 0.0 {
            1.0 / self.r[i]
        } else {
            0.0
        }
    }

    pub fn apply(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut out = self.b.dot(&self.b.t().dot(&x));
        for (i, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
            row *= self.inv_r(i);
        }
        out
    }

    /// Reverse pass of `V = A_global U` given `dV`.
    ///
    /// Returns `dU`, the gradient per beta slot, and per pattern entry weight.
    pub fn backward(
        &self,
        ps: &PatternSet,
        beta: &[f64],
        u: ArrayView2<f64>,
        dv: ArrayView2<f64>,
    ) -> (Array2<f64>, Vec<f64>, Vec<Vec<f64>>) {
        let n = self.b.nrows();
        let c = self.b.t().dot(&u);
        let w = self.b.dot(&c);
        let mut dw = dv.to_owned();
        let mut dr = vec![0.0; n];
        for i in 0..n {
            let inv = self.inv_r(i);
            if inv > 0.0 {
                dr[i] = -inv * inv * w.row(i).dot(&dv.row(i));
            }
            dw.row_mut(i).mapv_inplace(|v| v * inv);
        }
        let mut db = dw.dot(&c.t());
        let dc = self.b.t().dot(&dw);
        db += &u.dot(&dc.t());
        let du = self.b.dot(&dc);

        // r_i = sum_j |S_ij| with S symmetric: dB_i += sum_j sgn(S_ij)(dr_i + dr_j) B_j
        for i in 0..n {
            let s_row = self.b.dot(&self.b.row(i));
            let mut acc = ndarray::Array1::<f64>::zeros(self.b.ncols());
            for j in 0..n {
                let sgn = if s_row[j] > 0.0 {
                    1.0
                } else if s_row[j] < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                let g = sgn * (dr[i] + dr[j]);
                if g != 0.0 {
                    acc.scaled_add(g, &self.b.row(j));
                }
            }
            let mut row = db.row_mut(i);
            row += &acc;
        }

        let mut d_beta = vec![0.0; beta.len()];
        let mut d_weights = Vec::with_capacity(ps.len());
        for (m, p) in ps.patterns.iter().enumerate() {
            let slot = p.mask.slot();
            d_beta[slot] += db.column(m).dot(&self.row_sums.column(m));
            let scale = beta[slot];
            d_weights.push(
                p.matrix
                    .entries()
                    .iter()
                    .map(|&(i, _, _)| db[[i, m]] * scale)
                    .collect(),
            );
        }
        (du, d_beta, d_weights)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patterns::{Pattern, RelationMask};
    use crate::sparse::SparseMatrix;
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn binary_row_sums_count_edges() {
        let m = SparseMatrix::from_triplets(3, vec![(0, 1, 1.0), (0, 2, 1.0), (2, 0, 1.0)]).unwrap();
        let ps = PatternSet {
            n_nodes: 3,
            patterns: vec![
                Pattern { mask: RelationMask(1), matrix: m.clone() },
                Pattern { mask: RelationMask(2), matrix: m },
            ],
        };
        let mut beta = [1.0; 7];
        let b = build_global_pattern_matrix(&ps, &beta).unwrap();
        assert_eq!(b.column(0).to_vec(), vec![2.0, 0.0, 1.0]);
        beta[1] = 0.0;
        let b = build_global_pattern_matrix(&ps, &beta).unwrap();
        assert!(b.column(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn weighted_row_sum_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut e = Vec::new();
        for i in 0..6 {
            for j in 0..6 {
                if rng.gen_bool(0.4) {
                    e.push((i, j, rng.gen_range(0.0..1.0)));
                }
            }
        }
        let m = SparseMatrix::from_triplets(6, e.clone()).unwrap();
        let ps = PatternSet {
            n_nodes: 6,
            patterns: vec![Pattern { mask: RelationMask(4), matrix: m }],
        };
        let mut beta = [0.0; 7];
        beta[3] = 1.5;
        let b = build_global_pattern_matrix(&ps, &beta).unwrap();
        for i in 0..6 {
            let direct: f64 = e.iter().filter(|t| t.0 == i).map(|t| t.2).sum();
            assert!((b[[i, 0]] - 1.5 * direct).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_rows_give_uniform_similarity() {
        let b = Array2::from_elem((5, 2), 0.7);
        let g = global_similarity(b.view());
        assert!(g.iter().all(|&v| (v - 0.2).abs() < 1e-15));
    }

    #[test]
    fn orthogonal_signatures_give_identity() {
        let b = array![[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 3.0]];
        assert_eq!(global_similarity(b.view()), Array2::eye(3));
    }

    #[test]
    fn dense_similarity_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = random(8, 3, &mut rng);
        let g = global_similarity(b.view());
        for i in 0..8 {
            let s: Vec<f64> = (0..8)
                .map(|j| (0..3).map(|m| b[[i, m]] * b[[j, m]]).sum())
                .collect();
            let total: f64 = s.iter().map(|v: &f64| v.abs()).sum();
            for j in 0..8 {
                assert!((g[[i, j]] - s[j] / total).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn aggregation_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = random(6, 3, &mut rng);
        let eye = Array2::<f64>::eye(3);
        let h = aggregate_global(Array2::<f64>::eye(6).view(), u.view(), &[eye.clone(), eye]).unwrap();
        assert_eq!(h, u);

        let w = random(3, 3, &mut rng);
        let a = random(6, 6, &mut rng);
        let h = aggregate_global(a.view(), u.view(), std::slice::from_ref(&w)).unwrap();
        assert!((&h - &a.dot(&u).dot(&w)).iter().all(|v| v.abs() < 1e-12));

        let uniform = Array2::from_elem((6, 6), 1.0 / 6.0);
        let h = aggregate_global(uniform.view(), u.view(), &[w]).unwrap();
        for row in h.rows() {
            assert!((&row - &h.row(0)).iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn factored_operator_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let patterns = [1u8, 2, 4]
            .iter()
            .map(|&mask| {
                let mut e = Vec::new();
                for i in 0..9 {
                    for j in 0..9 {
                        if rng.gen_bool(0.3) {
                            e.push((i, j, rng.gen_range(0.0..1.0)));
                        }
                    }
                }
                Pattern { mask: RelationMask(mask), matrix: SparseMatrix::from_triplets(9, e).unwrap() }
            })
            .collect();
        let ps = PatternSet { n_nodes: 9, patterns };
        let beta = [1.0, -0.5, 0.0, 2.0, 0.0, 0.0, 0.0];
        let op = GlobalOperator::new(&ps, &beta).unwrap();
        let dense = global_similarity(op.pattern_matrix().view());
        let x = random(9, 4, &mut rng);
        assert!((&op.apply(x.view()) - &dense.dot(&x)).iter().all(|v| v.abs() < 1e-12));
        for row in dense.rows() {
            assert!(row.iter().map(|v| v.abs()).sum::<f64>() <= 1.0 + 1e-6);
        }
    }
}
