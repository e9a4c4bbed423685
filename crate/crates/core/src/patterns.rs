//! Basic relationship patterns of a multiplex graph.
//!
//! For a nonempty relation subset `S`, the pattern matrix keeps exactly the
//! node pairs connected by every relation in `S` and by no relation outside
//! it. Each relation's support is XNOR-ed with a logical variable (1 for
//! relations in `S`, 0 otherwise) and the intermediate masks are AND-ed; an
//! all-zero result means the pattern does not occur. With `R` relations at
//! most `2^R - 1` patterns exist.
//!
//! Pattern weights are the mean of the participating relations' weights.

use std::fmt::Write as _;

use crate::error::{shape_err, Error, Result};
use crate::graph::HetGraph;
use crate::sparse::SparseMatrix;

/// Largest relation count a mask can describe.
pub const MAX_RELATIONS: usize = 8;

/// Relation subset as a bit mask: bit `r` set means relation `r + 1` is in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelationMask(pub u8);

impl RelationMask {
    pub fn contains(self, relation: usize) -> bool {
        self.0 & (1 << relation) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Zero-based slot for per-pattern parameters (`mask - 1`).
    pub fn slot(self) -> usize {
        self.0 as usize - 1
    }

    /// One-based relation ids, e.g. `{1,3}`.
    pub fn label(self) -> String {
        let ids: Vec<String> = (0..MAX_RELATIONS)
            .filter(|&r| self.contains(r))
            .map(|r| (r + 1).to_string())
            .collect();
        format!("{{{}}}", ids.join(","))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pattern {
    pub mask: RelationMask,
    pub matrix: SparseMatrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PatternSet {
    pub n_nodes: usize,
    pub patterns: Vec<Pattern>,
}

impl PatternSet {
    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn total_nnz(&self) -> usize {
        self.patterns.iter().map(|p| p.matrix.nnz()).sum()
    }

    pub fn get(&self, mask: RelationMask) -> Option<&Pattern> {
        self.patterns.iter().find(|p| p.mask == mask)
    }

    /// Masks ascending, entries sorted by `(row, col)`.
    pub fn canonical(&self) -> PatternSet {
        let mut patterns = self.patterns.clone();
        patterns.sort_by_key(|p| p.mask);
        PatternSet {
            n_nodes: self.n_nodes,
            patterns,
        }
    }

    /// Text dump: a `pattern S=<subset> nnz=<n>` header per pattern followed
    /// by `src dst weight` lines.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for p in &self.patterns {
            let _ = writeln!(out, "pattern S={} nnz={}", p.mask.label(), p.matrix.nnz());
            for &(dst, src, w) in p.matrix.entries() {
                let _ = writeln!(out, "{src} {dst} {w:.6}");
            }
        }
        out
    }
}

fn check_relations(relations: &[SparseMatrix]) -> Result<usize> {
    let n = relations
        .first()
        .map(SparseMatrix::dim)
        .ok_or_else(|| shape_err("no relations given"))?;
    if relations.len() > MAX_RELATIONS {
        return Err(shape_err(format!("at most {MAX_RELATIONS} relations are supported")));
    }
    if relations.iter().any(|r| r.dim() != n) {
        return Err(shape_err("relations must share one node set"));
    }
    Ok(n)
}

/// Pattern generation by logical XNOR/AND over relation supports.
pub fn patterns_from_relations(relations: &[SparseMatrix]) -> Result<PatternSet> {
    let n = check_relations(relations)?;
    // Union support, sorted; outside it every relation is absent, so every
    // nonempty subset's XNOR/AND is zero there.
    let mut union: Vec<(usize, usize)> = relations
        .iter()
        .flat_map(|r| r.entries().iter().map(|&(i, j, _)| (i, j)))
        .collect();
    union.sort_unstable();
    union.dedup();

    // Presence bits and weights of each relation on the union support.
    let lookups: Vec<Vec<Option<f64>>> = relations
        .iter()
        .map(|rel| {
            let mut out = Vec::with_capacity(union.len());
            let mut it = rel.entries().iter().peekable();
            for &(i, j) in &union {
                match it.peek() {
                    Some(&&(a, b, w)) if (a, b) == (i, j) => {
                        out.push(Some(w));
                        it.next();
                    }
                    _ => out.push(None),
                }
            }
            out
        })
        .collect();

    let n_rel = relations.len();
    let mut patterns = Vec::new();
    for bits in 1u16..(1u16 << n_rel) {
        let mask = RelationMask(bits as u8);
        let mut entries = Vec::new();
        for (pos, &(i, j)) in union.iter().enumerate() {
            // AND over r of XNOR(present_r, variable_r)
            let keep = (0..n_rel).all(|r| lookups[r][pos].is_some() == mask.contains(r));
            if keep {
                let sum: f64 = (0..n_rel).filter_map(|r| lookups[r][pos]).sum();
                entries.push((i, j, sum / mask.len() as f64));
            }
        }
        if !entries.is_empty() {
            patterns.push(Pattern {
                mask,
                matrix: SparseMatrix::from_sorted(n, entries),
            });
        }
    }
    Ok(PatternSet {
        n_nodes: n,
        patterns,
    })
}

pub fn generate_patterns(g: &HetGraph) -> PatternSet {
    patterns_from_relations(&g.relations).expect("graph relations share one node set")
}

/// Largest node count [`pattern_oracle`] will enumerate densely.
pub const ORACLE_NODE_BUDGET: usize = 10_000;

/// Independent reference: visit every ordered pair, read its relation
/// signature by direct lookup and file it under that signature.
pub fn pattern_oracle(relations: &[SparseMatrix]) -> Result<PatternSet> {
    let n = check_relations(relations)?;
    if n > ORACLE_NODE_BUDGET {
        return Err(Error::Budget(format!(
            "{n} nodes exceeds the oracle budget of {ORACLE_NODE_BUDGET}"
        )));
    }
    let n_rel = relations.len();
    let mut buckets: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); 1 << n_rel];
    for i in 0..n {
        for j in 0..n {
            let mut signature = 0usize;
            let mut sum = 0.0;
            for (r, rel) in relations.iter().enumerate() {
                if let Some(w) = rel.get(i, j) {
                    signature |= 1 << r;
                    sum += w;
                }
            }
            if signature != 0 {
                let size = signature.count_ones() as f64;
                buckets[signature].push((i, j, sum / size));
            }
        }
    }
    let patterns = buckets
        .into_iter()
        .enumerate()
        .filter(|(_, e)| !e.is_empty())
        .map(|(mask, entries)| Pattern {
            mask: RelationMask(mask as u8),
            matrix: SparseMatrix::from_sorted(n, entries),
        })
        .collect();
    Ok(PatternSet {
        n_nodes: n,
        patterns,
    })
}
