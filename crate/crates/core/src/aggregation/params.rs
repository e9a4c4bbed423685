use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{shape_err, Result};
use crate::graph::RELATIONS;
use crate::imaging::MS_BANDS;

/// Number of per-pattern weight slots: one per nonempty relation subset.
pub const PATTERN_SLOTS: usize = (1 << RELATIONS) - 1;

/// Every learnable tensor of the network.
///
/// `alpha` and `beta` are `1 x 7` rows indexed by pattern mask slot
/// (`mask - 1`), so a parameter keeps its meaning when a pattern is absent
/// from some graph.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    /// `d x p^2` PAN patch embedding.
    pub w_pan: Array2<f64>,
    /// Per-band `d x p^2` LR-MS patch embeddings.
    pub w_band: Vec<Array2<f64>>,
    pub alpha: Array2<f64>,
    pub beta: Array2<f64>,
    /// Local-branch layer weights, `d x d` each.
    pub w_local: Vec<Array2<f64>>,
    /// Global-branch layer weights, `d x d` each.
    pub w_global: Vec<Array2<f64>>,
    /// Per-band `p^2 x 2d` residual decoders.
    pub recon: Vec<Array2<f64>>,
}

fn glorot(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-bound..bound))
}

impl ModelParams {
    /// Glorot-uniform embeddings and layers, `alpha = 1/3` (one per relation
    /// pattern the graph can realize), `beta = 1`, zero decoders so the
    /// untrained model reproduces the bicubic upsample.
    pub fn init(patch: usize, dim: usize, layers: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p2 = patch * patch;
        let w_pan = glorot(dim, p2, &mut rng);
        let w_band = (0..MS_BANDS).map(|_| glorot(dim, p2, &mut rng)).collect();
        let w_local = (0..layers).map(|_| glorot(dim, dim, &mut rng)).collect();
        let w_global = (0..layers).map(|_| glorot(dim, dim, &mut rng)).collect();
        Self {
            w_pan,
            w_band,
            alpha: Array2::from_elem((1, PATTERN_SLOTS), 1.0 / RELATIONS as f64),
            beta: Array2::ones((1, PATTERN_SLOTS)),
            w_local,
            w_global,
            recon: (0..MS_BANDS).map(|_| Array2::zeros((p2, 2 * dim))).collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let z = |a: &Array2<f64>| Array2::zeros(a.raw_dim());
        Self {
            w_pan: z(&self.w_pan),
            w_band: self.w_band.iter().map(z).collect(),
            alpha: z(&self.alpha),
            beta: z(&self.beta),
            w_local: self.w_local.iter().map(z).collect(),
            w_global: self.w_global.iter().map(z).collect(),
            recon: self.recon.iter().map(z).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.w_pan.nrows()
    }

    pub fn patch_len(&self) -> usize {
        self.w_pan.ncols()
    }

    pub fn layers(&self) -> usize {
        self.w_local.len()
    }

    /// Tensors with stable names such as `w_band.2` or `alpha`.
    pub fn tensors(&self) -> Vec<(String, &Array2<f64>)> {
        let mut out = vec![("w_pan".to_string(), &self.w_pan)];
        out.extend(self.w_band.iter().enumerate().map(|(i, t)| (format!("w_band.{i}"), t)));
        out.push(("alpha".to_string(), &self.alpha));
        out.push(("beta".to_string(), &self.beta));
        out.extend(self.w_local.iter().enumerate().map(|(i, t)| (format!("w_local.{i}"), t)));
        out.extend(self.w_global.iter().enumerate().map(|(i, t)| (format!("w_global.{i}"), t)));
        out.extend(self.recon.iter().enumerate().map(|(i, t)| (format!("recon.{i}"), t)));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Array2<f64>)> {
        let mut out = vec![("w_pan".to_string(), &mut self.w_pan)];
        out.extend(self.w_band.iter_mut().enumerate().map(|(i, t)| (format!("w_band.{i}"), t)));
        out.push(("alpha".to_string(), &mut self.alpha));
        out.push(("beta".to_string(), &mut self.beta));
        out.extend(self.w_local.iter_mut().enumerate().map(|(i, t)| (format!("w_local.{i}"), t)));
        out.extend(self.w_global.iter_mut().enumerate().map(|(i, t)| (format!("w_global.{i}"), t)));
        out.extend(self.recon.iter_mut().enumerate().map(|(i, t)| (format!("recon.{i}"), t)));
        out
    }

    /// Assembles parameters from named tensors, checking every shape.
    pub fn from_tensors(named: Vec<(String, Array2<f64>)>) -> Result<Self> {
        let mut w_pan = None;
        let mut alpha = None;
        let mut beta = None;
        let mut w_band = Vec::new();
        let mut w_local = Vec::new();
        let mut w_global = Vec::new();
        let mut recon = Vec::new();
        for (name, t) in named {
            let (group, idx) = match name.split_once('.') {
                Some((g, i)) => (g, i.parse::<usize>().ok()),
                None => (name.as_str(), None),
            };
            let push = |v: &mut Vec<(usize, Array2<f64>)>, t| match idx {
                Some(i) => {
                    v.push((i, t));
                    Ok(())
                }
                None => Err(shape_err(format!("tensor {name} lacks an index"))),
            };
            match group {
                "w_pan" => w_pan = Some(t),
                "alpha" => alpha = Some(t),
                "beta" => beta = Some(t),
                "w_band" => push(&mut w_band, t)?,
                "w_local" => push(&mut w_local, t)?,
                "w_global" => push(&mut w_global, t)?,
                "recon" => push(&mut recon, t)?,
                _ => return Err(shape_err(format!("unknown tensor {name}"))),
            }
        }
        let ordered = |mut v: Vec<(usize, Array2<f64>)>, what: &str| -> Result<Vec<Array2<f64>>> {
            v.sort_by_key(|(i, _)| *i);
            if v.iter().enumerate().any(|(k, (i, _))| k != *i) {
                return Err(shape_err(format!("{what} indices are not contiguous")));
            }
            Ok(v.into_iter().map(|(_, t)| t).collect())
        };
        let params = Self {
            w_pan: w_pan.ok_or_else(|| shape_err("missing w_pan"))?,
            w_band: ordered(w_band, "w_band")?,
            alpha: alpha.ok_or_else(|| shape_err("missing alpha"))?,
            beta: beta.ok_or_else(|| shape_err("missing beta"))?,
            w_local: ordered(w_local, "w_local")?,
            w_global: ordered(w_global, "w_global")?,
            recon: ordered(recon, "recon")?,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let (d, p2) = self.w_pan.dim();
        let ok = self.w_band.len() == MS_BANDS
            && self.w_band.iter().all(|w| w.dim() == (d, p2))
            && self.alpha.dim() == (1, PATTERN_SLOTS)
            && self.beta.dim() == (1, PATTERN_SLOTS)
            && !self.w_local.is_empty()
            && self.w_local.len() == self.w_global.len()
            && self.w_local.iter().chain(&self.w_global).all(|w| w.dim() == (d, d))
            && self.recon.len() == MS_BANDS
            && self.recon.iter().all(|r| r.dim() == (p2, 2 * d));
        if !ok {
            return Err(shape_err("inconsistent model parameter shapes"));
        }
        if self.tensors().iter().any(|(_, t)| t.iter().any(|v| !v.is_finite())) {
            return Err(crate::Error::NonFinite("model parameters".into()));
        }
        Ok(())
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) {
        for ((_, a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.scaled_add(scale, b);
        }
    }
}
