//! The attributed multiplex heterogeneous graph built from PAN and LR-MS
//! patches.
//!
//! Node layout: PAN node `i` sits at flat index `i`; the node for band `b`
//! of patch `i` sits at `N + 4 i + b`. Adjacency matrices use the
//! "row = receiver" convention, so `A[i][j]` is the weight of edge `j -> i`.
//!
//! Three relations connect the nodes:
//!
//! 1. PAN to PAN, from each node's `k` most cosine-similar PAN nodes;
//! 2. BAND to BAND, the same rule restricted to nodes of one band;
//! 3. BAND to PAN and PAN to BAND between the nodes of one patch.
//!
//! Every edge weight is `max(cos(u_src, u_dst), 0)` over the node attribute
//! rows, which is what lets gradients reach the embeddings through the
//! weights while the neighbor selection itself stays discrete.

use std::fmt::Write as _;

use ndarray::{s, Array2, ArrayView1, ArrayView2};

use crate::error::{shape_err, Error, Result};
use crate::imaging::{PatchGrid, MS_BANDS};
use crate::sparse::SparseMatrix;

/// Number of distinct node types (PAN, BAND).
pub const NODE_TYPES: usize = 2;
/// Number of distinct edge relations.
pub const RELATIONS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Pan,
    Band,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeIndex {
    pub kind: NodeKind,
    pub patch: usize,
    /// Band index, meaningful for [`NodeKind::Band`] only.
    pub band: usize,
}

impl NodeIndex {
    pub fn pan(patch: usize) -> Self {
        Self {
            kind: NodeKind::Pan,
            patch,
            band: 0,
        }
    }

    pub fn band(patch: usize, band: usize) -> Self {
        Self {
            kind: NodeKind::Band,
            patch,
            band,
        }
    }

    pub fn flat(&self, n_patches: usize) -> usize {
        match self.kind {
            NodeKind::Pan => self.patch,
            NodeKind::Band => n_patches + MS_BANDS * self.patch + self.band,
        }
    }

    pub fn from_flat(flat: usize, n_patches: usize) -> Self {
        if flat < n_patches {
            Self::pan(flat)
        } else {
            let r = flat - n_patches;
            Self::band(r / MS_BANDS, r % MS_BANDS)
        }
    }
}

#[inline]
pub fn pan_node(patch: usize) -> usize {
    patch
}

#[inline]
pub fn band_node(n_patches: usize, patch: usize, band: usize) -> usize {
    n_patches + MS_BANDS * patch + band
}

/// Cosine similarity; a zero-norm vector is similar to nothing.
pub fn cosine(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    let na = a.dot(&a).sqrt();
    let nb = b.dot(&b).sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        a.dot(&b) / (na * nb)
    }
}

/// Edge weight between two attribute rows.
#[inline]
pub fn edge_weight(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    cosine(a, b).max(0.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
}

fn check_finite(feats: ArrayView2<f64>, what: &str) -> Result<()> {
    if feats.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

/// For every target row, the sources of its incoming k-NN edges.
///
/// Candidates are ranked by cosine similarity, ties going to the lower
/// index, so the selection is a total, deterministic order.
pub fn select_neighbors(feats: ArrayView2<f64>, k: usize) -> Result<Vec<Vec<usize>>> {
    let m = feats.nrows();
    if m < 2 {
        return Err(shape_err("k-NN needs at least two nodes"));
    }
    if k == 0 {
        return Err(crate::error::invalid("k must be at least 1"));
    }
    check_finite(feats, "k-NN features")?;
    let norms: Vec<f64> = feats.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
    let gram = feats.dot(&feats.t());
    let keep = k.min(m - 1);
    let mut out = Vec::with_capacity(m);
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(m - 1);
    for i in 0..m {
        cand.clear();
        for j in (0..m).filter(|&j| j != i) {
            let sim = if norms[i] == 0.0 || norms[j] == 0.0 {
                0.0
            } else {
                gram[[i, j]] / (norms[i] * norms[j])
            };
            cand.push((sim, j));
        }
        let by_rank = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
        if keep < cand.len() {
            cand.select_nth_unstable_by(keep - 1, by_rank);
            cand.truncate(keep);
        }
        cand.sort_by(by_rank);
        out.push(cand.iter().map(|&(_, j)| j).collect());
    }
    Ok(out)
}

/// Directed k-NN edges `j -> i` weighted by clamped cosine similarity.
pub fn knn_edges(feats: ArrayView2<f64>, k: usize) -> Result<Vec<Edge>> {
    let nbrs = select_neighbors(feats, k)?;
    let mut edges = Vec::new();
    for (i, srcs) in nbrs.iter().enumerate() {
        for &j in srcs {
            edges.push(Edge {
                src: j,
                dst: i,
                weight: edge_weight(feats.row(i), feats.row(j)),
            });
        }
    }
    Ok(edges)
}

/// Patch features: `x_i = W_p * pan_patch_i`, `y_i^b = W_b * band_patch_i^b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Embeddings {
    pub pan: Array2<f64>,
    pub bands: Vec<Array2<f64>>,
}

fn grid_matrix(grid: &PatchGrid) -> Array2<f64> {
    let n = grid.len();
    let len = grid.layout.block_len();
    Array2::from_shape_vec((n, len), grid.patches.iter().map(|&v| f64::from(v)).collect())
        .expect("grid shape")
}

/// Patch matrices (`N x p^2`) for the PAN grid and each band grid.
pub fn patch_matrices(pan_grid: &PatchGrid, band_grids: &[PatchGrid]) -> (Array2<f64>, Vec<Array2<f64>>) {
    (grid_matrix(pan_grid), band_grids.iter().map(grid_matrix).collect())
}

pub fn embed_patches(
    pan_grid: &PatchGrid,
    band_grids: &[PatchGrid],
    w_pan: &Array2<f64>,
    w_band: &[Array2<f64>],
) -> Result<Embeddings> {
    if band_grids.len() != MS_BANDS || w_band.len() != MS_BANDS {
        return Err(shape_err(format!("expected {MS_BANDS} band grids and weights")));
    }
    let n = pan_grid.len();
    let len = pan_grid.layout.block_len();
    for g in band_grids {
        if g.len() != n || g.layout.block_len() != len {
            return Err(shape_err("band grids must match the PAN grid"));
        }
    }
    for w in std::iter::once(w_pan).chain(w_band) {
        if w.ncols() != len || w.nrows() != w_pan.nrows() {
            return Err(shape_err(format!(
                "embedding is {}x{}, expected {}x{len}",
                w.nrows(),
                w.ncols(),
                w_pan.nrows()
            )));
        }
    }
    let (pan_m, band_m) = patch_matrices(pan_grid, band_grids);
    Ok(Embeddings {
        pan: pan_m.dot(&w_pan.t()),
        bands: band_m.iter().zip(w_band).map(|(m, w)| m.dot(&w.t())).collect(),
    })
}

/// Stacks PAN rows then BAND rows in flat node order.
pub fn node_features(emb: &Embeddings) -> Array2<f64> {
    let (n, d) = emb.pan.dim();
    let mut u = Array2::zeros(((1 + MS_BANDS) * n, d));
    u.slice_mut(s![..n, ..]).assign(&emb.pan);
    for (b, feats) in emb.bands.iter().enumerate() {
        for i in 0..n {
            u.row_mut(band_node(n, i, b)).assign(&feats.row(i));
        }
    }
    u
}

/// The discrete part of the graph: who receives from whom.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Topology {
    pub pan: Vec<Vec<usize>>,
    pub bands: Vec<Vec<Vec<usize>>>,
}

impl Topology {
    pub fn select(emb: &Embeddings, k: usize) -> Result<Self> {
        Ok(Self {
            pan: select_neighbors(emb.pan.view(), k)?,
            bands: emb
                .bands
                .iter()
                .map(|f| select_neighbors(f.view(), k))
                .collect::<Result<_>>()?,
        })
    }

    pub fn n_patches(&self) -> usize {
        self.pan.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HetGraph {
    pub n_patches: usize,
    pub k: usize,
    /// Node attribute matrix `U`, `5N x d`.
    pub features: Array2<f64>,
    /// `A_1` (PAN-PAN), `A_2` (same-band BAND-BAND), `A_3` (BAND-PAN).
    pub relations: [SparseMatrix; RELATIONS],
    pub topology: Topology,
}

impl HetGraph {
    pub fn n_nodes(&self) -> usize {
        (1 + MS_BANDS) * self.n_patches
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// `relation src dst weight` lines, relations numbered from 1.
    pub fn edge_list(&self) -> String {
        let mut out = String::new();
        for (r, rel) in self.relations.iter().enumerate() {
            for &(dst, src, w) in rel.entries() {
                let _ = writeln!(out, "{} {src} {dst} {w:.6}", r + 1);
            }
        }
        out
    }
}

/// Builds the graph from patch features, selecting neighbors afresh.
pub fn build_hetss_graph(emb: &Embeddings, k: usize) -> Result<HetGraph> {
    if emb.bands.len() != MS_BANDS {
        return Err(shape_err(format!("expected {MS_BANDS} band feature sets")));
    }
    if emb.pan.nrows() < 2 {
        return Err(shape_err("graph needs at least two patches"));
    }
    let topology = Topology::select(emb, k)?;
    build_with_topology(emb, k, topology)
}

/// Builds the graph for a fixed neighbor selection; only weights depend on
/// the features.
pub fn build_with_topology(emb: &Embeddings, k: usize, topology: Topology) -> Result<HetGraph> {
    let n = emb.pan.nrows();
    if topology.n_patches() != n || topology.bands.len() != MS_BANDS {
        return Err(shape_err("topology does not match the embeddings"));
    }
    let u = node_features(emb);
    check_finite(u.view(), "node features")?;
    let total = (1 + MS_BANDS) * n;
    let w = |a: usize, b: usize| edge_weight(u.row(a), u.row(b));

    let mut pan_pan = Vec::new();
    for (i, srcs) in topology.pan.iter().enumerate() {
        for &j in srcs {
            pan_pan.push((pan_node(i), pan_node(j), w(pan_node(i), pan_node(j))));
        }
    }
    let mut band_band = Vec::new();
    for (b, nbrs) in topology.bands.iter().enumerate() {
        for (i, srcs) in nbrs.iter().enumerate() {
            let dst = band_node(n, i, b);
            for &j in srcs {
                let src = band_node(n, j, b);
                band_band.push((dst, src, w(dst, src)));
            }
        }
    }
    let mut cross = Vec::new();
    for i in 0..n {
        for b in 0..MS_BANDS {
            let (p, q) = (pan_node(i), band_node(n, i, b));
            let wt = w(p, q);
            cross.push((p, q, wt));
            cross.push((q, p, wt));
        }
    }
    let relations = [
        SparseMatrix::from_triplets(total, pan_pan)?,
        SparseMatrix::from_triplets(total, band_band)?,
        SparseMatrix::from_triplets(total, cross)?,
    ];
    Ok(HetGraph {
        n_patches: n,
        k,
        features: u,
        relations,
        topology,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{extract_patches, Image};
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0))
    }

    fn random_embeddings(n: usize, d: usize, seed: u64) -> Embeddings {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Embeddings {
            pan: random_matrix(n, d, &mut rng),
            bands: (0..MS_BANDS).map(|_| random_matrix(n, d, &mut rng)).collect(),
        }
    }

    #[test]
    fn flat_layout_is_bijective() {
        let n = 7;
        for flat in 0..5 * n {
            assert_eq!(NodeIndex::from_flat(flat, n).flat(n), flat);
        }
        assert_eq!(NodeIndex::band(2, 3).flat(n), n + 11);
    }

    #[test]
    fn identical_vectors_pick_lowest_index() {
        let feats = array![[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]];
        let edges = knn_edges(feats.view(), 1).unwrap();
        let srcs: Vec<(usize, usize)> = edges.iter().map(|e| (e.dst, e.src)).collect();
        assert_eq!(srcs, vec![(0, 1), (1, 0), (2, 0)]);
        assert!(edges.iter().all(|e| (e.weight - 1.0).abs() < 1e-12));
    }

    #[test]
    fn orthogonal_vectors_weigh_zero() {
        let feats = array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let edges = knn_edges(feats.view(), 2).unwrap();
        assert_eq!(edges.len(), 6);
        assert!(edges.iter().all(|e| e.weight == 0.0));
    }

    #[test]
    fn zero_vectors_are_dissimilar() {
        let feats = array![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
        let edges = knn_edges(feats.view(), 1).unwrap();
        assert_eq!((edges[0].src, edges[0].weight), (1, 0.0));
        assert_eq!((edges[1].src, edges[1].weight), (2, 1.0));
    }

    #[test]
    fn knn_rejects_bad_input() {
        assert!(knn_edges(array![[1.0]].view(), 1).is_err());
        assert!(knn_edges(array![[1.0], [f64::NAN]].view(), 1).is_err());
        assert!(knn_edges(array![[1.0], [2.0]].view(), 0).is_err());
    }

    // Exhaustive oracle: score every pair, stable-sort by (-sim, j).
    #[test]
    fn knn_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let feats = random_matrix(10, 4, &mut rng);
        let got = knn_edges(feats.view(), 3).unwrap();
        let mut expected = Vec::new();
        for i in 0..10 {
            let mut scored: Vec<(f64, usize)> = (0..10)
                .filter(|&j| j != i)
                .map(|j| {
                    let (a, b) = (feats.row(i), feats.row(j));
                    (a.dot(&b) / (a.dot(&a).sqrt() * b.dot(&b).sqrt()), j)
                })
                .collect();
            scored.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap().then(x.1.cmp(&y.1)));
            for &(sim, j) in &scored[..3] {
                expected.push((j, i, sim.max(0.0)));
            }
        }
        assert_eq!(got.len(), expected.len());
        for (e, (src, dst, w)) in got.iter().zip(expected) {
            assert_eq!((e.src, e.dst), (src, dst));
            assert!((e.weight - w).abs() < 1e-12);
        }
    }

    #[test]
    fn two_patch_edge_counts() {
        let g = build_hetss_graph(&random_embeddings(2, 3, 1), 1).unwrap();
        assert_eq!(g.relations[0].nnz(), 2);
        assert_eq!(g.relations[1].nnz(), 8);
        assert_eq!(g.relations[2].nnz(), 16);
    }

    #[test]
    fn identical_features_give_unit_weights() {
        let row = array![0.3, -0.2, 0.9];
        let n = 4;
        let emb = Embeddings {
            pan: Array2::from_shape_fn((n, 3), |(_, c)| row[c]),
            bands: (0..MS_BANDS)
                .map(|_| Array2::from_shape_fn((n, 3), |(_, c)| row[c]))
                .collect(),
        };
        let g = build_hetss_graph(&emb, 2).unwrap();
        for rel in &g.relations {
            assert!(rel.entries().iter().all(|e| (e.2 - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn type_purity_degree_and_range() {
        let n = 12;
        let k = 4;
        let g = build_hetss_graph(&random_embeddings(n, 5, 9), k).unwrap();
        let kind = |f: usize| NodeIndex::from_flat(f, n);
        let mut in_deg = vec![[0usize; 3]; 5 * n];
        for (r, rel) in g.relations.iter().enumerate() {
            for &(dst, src, w) in rel.entries() {
                assert!((0.0..=1.0).contains(&w));
                assert_ne!(dst, src);
                let (a, b) = (kind(dst), kind(src));
                match r {
                    0 => assert!(a.kind == NodeKind::Pan && b.kind == NodeKind::Pan),
                    1 => assert!(a.kind == NodeKind::Band && b.kind == NodeKind::Band && a.band == b.band),
                    _ => {
                        assert_ne!(a.kind, b.kind);
                        assert_eq!(a.patch, b.patch);
                    }
                }
                in_deg[dst][r] += 1;
            }
        }
        for (f, deg) in in_deg.iter().enumerate() {
            match kind(f).kind {
                NodeKind::Pan => assert_eq!(deg[0], k.min(n - 1)),
                NodeKind::Band => assert_eq!(deg[1], k.min(n - 1)),
            }
        }
        assert_eq!(NODE_TYPES + RELATIONS, 5);
    }

    #[test]
    fn deterministic_and_dump_format() {
        let emb = random_embeddings(3, 4, 2);
        let a = build_hetss_graph(&emb, 1).unwrap();
        assert_eq!(a, build_hetss_graph(&emb, 1).unwrap());
        let dump = a.edge_list();
        let first = dump.lines().next().unwrap();
        let fields: Vec<&str> = first.split(' ').collect();
        assert_eq!(fields.len(), 4);
        assert_eq!(fields[0], "1");
        assert_eq!(fields[3].split('.').nth(1).unwrap().len(), 6);
    }

    #[test]
    fn embedding_linearity_and_oracle() {
        let img = Image::new(8, 8, 1, (0..64).map(|v| v as f32 / 64.0).collect()).unwrap();
        let pan = extract_patches(&img, 4, 4).unwrap();
        let bands = vec![pan.clone(); MS_BANDS];
        // identity embedding returns the flattened patches
        let eye = Array2::eye(16);
        let emb = embed_patches(&pan, &bands, &eye, &vec![eye.clone(); MS_BANDS]).unwrap();
        for i in 0..pan.len() {
            for (c, &v) in pan.patch(i).iter().enumerate() {
                assert_eq!(emb.pan[[i, c]], f64::from(v));
            }
        }
        // random weights against an explicit mat-vec loop
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = random_matrix(5, 16, &mut rng);
        let emb = embed_patches(&pan, &bands, &w, &vec![w.clone(); MS_BANDS]).unwrap();
        for i in 0..pan.len() {
            for r in 0..5 {
                let mut acc = 0.0;
                for c in 0..16 {
                    acc += w[[r, c]] * f64::from(pan.patch(i)[c]);
                }
                assert!((emb.pan[[i, r]] - acc).abs() < 1e-12);
            }
        }
        // zero patches give zero features
        let zero = extract_patches(&Image::zeros(8, 8, 1), 4, 4).unwrap();
        let emb = embed_patches(&zero, &vec![zero.clone(); MS_BANDS], &w, &vec![w.clone(); MS_BANDS]).unwrap();
        assert!(emb.pan.iter().all(|&v| v == 0.0));
        // mismatched dimensions
        let bad = random_matrix(5, 15, &mut rng);
        assert!(embed_patches(&pan, &bands, &bad, &vec![w.clone(); MS_BANDS]).is_err());
    }
}
