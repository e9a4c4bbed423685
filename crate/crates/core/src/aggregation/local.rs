//! Local-wise aggregation: a learnable mix of pattern matrices propagated by
//! activation-free graph convolutions.

use ndarray::{Array2, ArrayView2};

use crate::error::{shape_err, Error, Result};
use crate::patterns::PatternSet;
use crate::sparse::SparseMatrix;

/// `D^-1/2 (sym(sum_m alpha_m A_m) + I) D^-1/2` in coordinate form.
///
/// `sym(M) = (M + M^T) / 2`; degrees are row sums of the self-looped
/// matrix, and nodes with non-positive degree get a zero scale.
#[derive(Clone, Debug)]
pub struct LocalOperator {
    pub(crate) n: usize,
    pub(crate) keys: Vec<(usize, usize)>,
    /// Self-looped, symmetrized mix before degree scaling.
    pub(crate) raw: Vec<f64>,
    pub(crate) deg: Vec<f64>,
    pub(crate) inv_sqrt: Vec<f64>,
    pub(crate) values: Vec<f64>,
    /// For each pattern, the key positions of `(i, j)` and `(j, i)` per entry.
    pub(crate) positions: Vec<Vec<(usize, usize)>>,
}

impl LocalOperator {
    pub fn new(ps: &PatternSet, alpha: &[f64]) -> Result<Self> {
        let n = ps.n_nodes;
        let mut keys: Vec<(usize, usize)> = (0..n).map(|i| (i, i)).collect();
        for p in &ps.patterns {
            for &(i, j, _) in p.matrix.entries() {
                keys.push((i, j));
                keys.push((j, i));
            }
        }
        keys.sort_unstable();
        keys.dedup();
        let pos = |key: (usize, usize)| keys.binary_search(&key).expect("key present");

        let mut raw = vec![0.0; keys.len()];
        for i in 0..n {
            raw[pos((i, i))] += 1.0;
        }
        let mut positions = Vec::with_capacity(ps.len());
        for p in &ps.patterns {
            let a = *alpha
                .get(p.mask.slot())
                .ok_or_else(|| shape_err("alpha has too few slots"))?;
            let mut pp = Vec::with_capacity(p.matrix.nnz());
            for &(i, j, w) in p.matrix.entries() {
                let (ij, ji) = (pos((i, j)), pos((j, i)));
                raw[ij] += 0.5 * a * w;
                raw[ji] += 0.5 * a * w;
                pp.push((ij, ji));
            }
            positions.push(pp);
        }

        let mut deg = vec![0.0; n];
        for (&(i, _), &v) in keys.iter().zip(&raw) {
            deg[i] += v;
        }
        let inv_sqrt: Vec<f64> = deg
            .iter()
            .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
            .collect();
        let values: Vec<f64> = keys
            .iter()
            .zip(&raw)
            .map(|(&(i, j), &v)| inv_sqrt[i] * v * inv_sqrt[j])
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("local propagation matrix".into()));
        }
        Ok(Self {
            n,
            keys,
            raw,
            deg,
            inv_sqrt,
            values,
            positions,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn to_sparse(&self) -> SparseMatrix {
        let entries = self
            .keys
            .iter()
            .zip(&self.values)
            .map(|(&(i, j), &v)| (i, j, v))
            .collect();
        SparseMatrix::from_triplets(self.n, entries).expect("keys in range")
    }

    /// `A_hat * x`.
    pub fn apply(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((self.n, x.ncols()));
        for (&(i, j), &v) in self.keys.iter().zip(&self.values) {
            out.row_mut(i).scaled_add(v, &x.row(j));
        }
        out
    }

    /// `A_hat^T * x`.
    pub fn apply_t(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((self.n, x.ncols()));
        for (&(i, j), &v) in self.keys.iter().zip(&self.values) {
            out.row_mut(j).scaled_add(v, &x.row(i));
        }
        out
    }

    /// Reverse pass of `Z = A_hat * U` given `dZ`.
    ///
    /// Returns `dU`, the gradient for each alpha slot, and the gradient for
    /// every pattern entry weight (pattern order, entry order).
    pub fn backward(
        &self,
        ps: &PatternSet,
        alpha: &[f64],
        u: ArrayView2<f64>,
        dz: ArrayView2<f64>,
    ) -> (Array2<f64>, Vec<f64>, Vec<Vec<f64>>) {
        let du = self.apply_t(dz);
        let mut d_inv = vec![0.0; self.n];
        let mut d_raw = vec![0.0; self.keys.len()];
        for (k, &(i, j)) in self.keys.iter().enumerate() {
            let g = dz.row(i).dot(&u.row(j));
            d_raw[k] = g * self.inv_sqrt[i] * self.inv_sqrt[j];
            d_inv[i] += g * self.raw[k] * self.inv_sqrt[j];
            d_inv[j] += g * self.raw[k] * self.inv_sqrt[i];
        }
        let d_deg: Vec<f64> = (0..self.n)
            .map(|i| {
                if self.deg[i] > 0.0 {
                    -0.5 * d_inv[i] * self.inv_sqrt[i].powi(3)
                } else {
                    0.0
                }
            })
            .collect();
        for (k, &(i, _)) in self.keys.iter().enumerate() {
            d_raw[k] += d_deg[i];
        }
        let mut d_alpha = vec![0.0; alpha.len()];
        let mut d_weights = Vec::with_capacity(ps.len());
        for (p, pos) in ps.patterns.iter().zip(&self.positions) {
            let slot = p.mask.slot();
            let mut dw = Vec::with_capacity(pos.len());
            for (&(_, _, w), &(ij, ji)) in p.matrix.entries().iter().zip(pos) {
                let coef = 0.5 * (d_raw[ij] + d_raw[ji]);
                d_alpha[slot] += coef * w;
                dw.push(coef * alpha[slot]);
            }
            d_weights.push(dw);
        }
        (du, d_alpha, d_weights)
    }
}

/// Symmetrize, add self-loops and normalize by `D^-1/2 . D^-1/2`.
pub fn sym_norm(m: &SparseMatrix) -> SparseMatrix {
    let ps = PatternSet {
        n_nodes: m.dim(),
        patterns: vec![crate::patterns::Pattern {
            mask: crate::patterns::RelationMask(1),
            matrix: m.clone(),
        }],
    };
    LocalOperator::new(&ps, &[1.0])
        .expect("finite input")
        .to_sparse()
}

/// `W^1`, `W^1 W^2`, ..., `W^1 ... W^l`.
pub(crate) fn prefix_products(ws: &[Array2<f64>]) -> Vec<Array2<f64>> {
    let mut out: Vec<Array2<f64>> = Vec::with_capacity(ws.len());
    for w in ws {
        let next = match out.last() {
            Some(prev) => prev.dot(w),
            None => w.clone(),
        };
        out.push(next);
    }
    out
}

/// Given gradients `g[i]` with respect to each prefix product
/// `P_i = W^1 ... W^(i+1)`, accumulate the gradient of every `W^k`.
pub(crate) fn prefix_backward(ws: &[Array2<f64>], prefixes: &[Array2<f64>], g: &[Option<Array2<f64>>]) -> Vec<Array2<f64>> {
    let l = ws.len();
    let mut grads: Vec<Array2<f64>> = ws.iter().map(|w| Array2::zeros(w.raw_dim())).collect();
    for (i, gi) in g.iter().enumerate() {
        let Some(gi) = gi else { continue };
        // dP_i / dW^k for k <= i: P_(k-1)^T * g_i * (W^(k+1) ... W^i)^T
        let mut suffix: Option<Array2<f64>> = None;
        for k in (0..=i).rev() {
            let right = match &suffix {
                Some(s) => gi.dot(&s.t()),
                None => gi.clone(),
            };
            let contrib = if k == 0 { right } else { prefixes[k - 1].t().dot(&right) };
            grads[k] += &contrib;
            suffix = Some(match suffix {
                Some(s) => ws[k].dot(&s),
                None => ws[k].clone(),
            });
        }
    }
    debug_assert_eq!(grads.len(), l);
    grads
}

/// `H_local = (1/l) sum_i A_hat U W^1 ... W^i`.
pub fn aggregate_local(
    ps: &PatternSet,
    u: ArrayView2<f64>,
    alpha: &[f64],
    w_local: &[Array2<f64>],
) -> Result<Array2<f64>> {
    if u.nrows() != ps.n_nodes {
        return Err(shape_err(format!(
            "U has {} rows for {} nodes",
            u.nrows(),
            ps.n_nodes
        )));
    }
    if w_local.is_empty() || w_local.iter().any(|w| w.nrows() != u.ncols() || w.ncols() != u.ncols()) {
        return Err(shape_err("layer weights must be d x d and nonempty"));
    }
    let op = LocalOperator::new(ps, alpha)?;
    let z = op.apply(u);
    let prefixes = prefix_products(w_local);
    let h = layer_mean(&z, &prefixes);
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("local aggregation".into()));
    }
    Ok(h)
}

pub(crate) fn layer_mean(z: &Array2<f64>, prefixes: &[Array2<f64>]) -> Array2<f64> {
    let mut q = Array2::zeros(prefixes[0].raw_dim());
    for p in prefixes {
        q += p;
    }
    q /= prefixes.len() as f64;
    z.dot(&q)
}
