//! Runtime scaling of pattern generation and global aggregation.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::aggregation::{GlobalOperator, PATTERN_SLOTS};
use crate::error::{invalid, Result};
use crate::graph::RELATIONS;
use crate::patterns::patterns_from_relations;
use crate::sparse::SparseMatrix;

pub const DEFAULT_SIZES: [usize; 4] = [100, 200, 400, 800];

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    /// In-neighbors per node and relation.
    pub k: usize,
    /// Feature width fed to the aggregation.
    pub dim: usize,
    /// Each stage is repeated until at least this much time has passed; the
    /// mean per run is reported.
    pub min_time: Duration,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sizes: DEFAULT_SIZES.to_vec(),
            k: 8,
            dim: 64,
            min_time: Duration::from_millis(200),
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    pub pattern_secs: f64,
    pub global_secs: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub pattern_exponent: f64,
    pub global_exponent: f64,
}

impl BenchReport {
    /// CSV rows `n,pattern_secs,global_secs` followed by `# exponent` lines.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,pattern_secs,global_secs\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{:.6e},{:.6e}", r.n, r.pattern_secs, r.global_secs);
        }
        let _ = writeln!(out, "# exponent pattern_generation {:.3}", self.pattern_exponent);
        let _ = writeln!(out, "# exponent global_aggregation {:.3}", self.global_exponent);
        out
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let cov: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    cov / var
}

/// Three relations on `n` nodes, each giving every node `k` distinct random
/// in-neighbors with weights in `(0, 1]`.
pub fn random_multiplex(n: usize, k: usize, rng: &mut impl Rng) -> Result<Vec<SparseMatrix>> {
    let k = k.min(n.saturating_sub(1));
    (0..RELATIONS)
        .map(|_| {
            let mut entries = Vec::with_capacity(n * k);
            for dst in 0..n {
                for src in rand::seq::index::sample(rng, n - 1, k) {
                    let src = if src >= dst { src + 1 } else { src };
                    entries.push((dst, src, 1.0 - rng.gen::<f64>()));
                }
            }
            SparseMatrix::from_triplets(n, entries)
        })
        .collect()
}

fn time_per_run(min_time: Duration, mut f: impl FnMut()) -> f64 {
    let start = Instant::now();
    let mut runs = 0u32;
    while runs == 0 || start.elapsed() < min_time {
        f();
        runs += 1;
    }
    start.elapsed().as_secs_f64() / f64::from(runs)
}

pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.sizes.len() < 2 || cfg.sizes.iter().any(|&n| n < 2) {
        return Err(invalid("need at least two sizes of two or more nodes"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let beta = vec![1.0; PATTERN_SLOTS];
    let mut rows = Vec::new();
    for &n in &cfg.sizes {
        let rels = random_multiplex(n, cfg.k, &mut rng)?;
        let u = Array2::from_shape_fn((n, cfg.dim), |_| rng.gen_range(-1.0..1.0));
        let ps = patterns_from_relations(&rels)?;
        let pattern_secs = time_per_run(cfg.min_time, || {
            std::hint::black_box(patterns_from_relations(std::hint::black_box(&rels)).ok());
        });
        let global_secs = time_per_run(cfg.min_time, || {
            let op = GlobalOperator::new(&ps, &beta).expect("beta has one entry per slot");
            std::hint::black_box(op.apply(u.view()));
        });
        rows.push(BenchRow {
            n,
            pattern_secs,
            global_secs,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let pattern: Vec<f64> = rows.iter().map(|r| r.pattern_secs).collect();
    let global: Vec<f64> = rows.iter().map(|r| r.global_secs).collect();
    Ok(BenchReport {
        pattern_exponent: loglog_slope(&xs, &pattern),
        global_exponent: loglog_slope(&xs, &global),
        rows,
    })
}
