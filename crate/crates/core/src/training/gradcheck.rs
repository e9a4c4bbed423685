//! Central finite differences against the analytic reverse pass.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::backward::{backward_from_pass, pass_loss};
use crate::aggregation::{forward_prepared, ModelParams, PreparedScene};
use crate::config::{Precision, TrainConfig};
use crate::error::{invalid, Result};
use crate::graph::Topology;
use crate::imaging::{wald_degrade, Image, ScenePair, MS_BANDS};

/// One scalar inside [`ModelParams`], addressed by tensor name.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamCoord {
    pub tensor: String,
    pub row: usize,
    pub col: usize,
}

fn coord_mut<'a>(params: &'a mut ModelParams, c: &ParamCoord) -> Result<&'a mut f64> {
    params
        .tensors_mut()
        .into_iter()
        .find(|(name, _)| *name == c.tensor)
        .and_then(|(_, t)| t.get_mut((c.row, c.col)))
        .ok_or_else(|| invalid(format!("no coordinate {}[{}, {}]", c.tensor, c.row, c.col)))
}

/// `(f(x + h) - f(x - h)) / 2h`.
pub fn central_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

fn frozen_loss(prep: &PreparedScene, params: &ModelParams, cfg: &TrainConfig, topo: &Topology) -> Result<f64> {
    let pass = forward_prepared(prep, params, cfg, Some(topo))?;
    Ok(pass_loss(prep, &pass, cfg)?.total)
}

/// Central difference of the total loss along one coordinate, with the step
/// `eps * max(|theta|, 1)` and neighbor selection frozen at `params`.
pub fn finite_diff_grad(
    prep: &PreparedScene,
    params: &ModelParams,
    cfg: &TrainConfig,
    coord: &ParamCoord,
    eps: f64,
) -> Result<f64> {
    if cfg.precision != Precision::High {
        return Err(invalid("finite differences need high precision mode"));
    }
    let topo = forward_prepared(prep, params, cfg, None)?.graph.topology;
    fd_with_topology(prep, params, cfg, &topo, coord, eps)
}

fn fd_with_topology(
    prep: &PreparedScene,
    params: &ModelParams,
    cfg: &TrainConfig,
    topo: &Topology,
    coord: &ParamCoord,
    eps: f64,
) -> Result<f64> {
    let mut p = params.clone();
    let theta = *coord_mut(&mut p, coord)?;
    let h = eps * theta.abs().max(1.0);
    *coord_mut(&mut p, coord)? = theta + h;
    let plus = frozen_loss(prep, &p, cfg, topo)?;
    *coord_mut(&mut p, coord)? = theta - h;
    let minus = frozen_loss(prep, &p, cfg, topo)?;
    Ok((plus - minus) / (2.0 * h))
}

/// Worst disagreement within one parameter group (`w_band` covers all bands).
#[derive(Clone, Debug, PartialEq)]
pub struct GroupError {
    pub group: String,
    pub coords: usize,
    pub max_rel: f64,
}

/// Relative error with a floor so coordinates whose true gradient is zero do
/// not divide by roundoff.
fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-7)
}

/// Compares every coordinate of every tensor, grouped by tensor family.
pub fn grad_check(prep: &PreparedScene, params: &ModelParams, cfg: &TrainConfig, eps: f64) -> Result<Vec<GroupError>> {
    if cfg.precision != Precision::High {
        return Err(invalid("gradient checks need high precision mode"));
    }
    let pass = forward_prepared(prep, params, cfg, None)?;
    let (_, grads) = backward_from_pass(prep, params, cfg, &pass)?;
    let topo = pass.graph.topology;
    let mut out: Vec<GroupError> = Vec::new();
    for (name, g) in grads.tensors() {
        let group = name.split('.').next().unwrap_or(&name).to_string();
        if out.last().map_or(true, |e| e.group != group) {
            out.push(GroupError {
                group,
                coords: 0,
                max_rel: 0.0,
            });
        }
        let entry = out.last_mut().expect("just pushed");
        for ((row, col), &analytic) in g.indexed_iter() {
            let coord = ParamCoord {
                tensor: name.clone(),
                row,
                col,
            };
            let fd = fd_with_topology(prep, params, cfg, &topo, &coord, eps)?;
            entry.coords += 1;
            entry.max_rel = entry.max_rel.max(rel_err(analytic, fd));
        }
    }
    Ok(out)
}

/// A two-patch scene (8 x 4 reference, `p = 4`, `stride = 4`) with a
/// matching high-precision config (`d = 8`, `l = 2`, `k = 1`) and
/// parameters whose decoder, alpha and beta are randomized so every
/// gradient path is live.
pub fn toy_scene(seed: u64) -> Result<(PreparedScene, ModelParams, TrainConfig)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w) = (4, 8);
    let gt: Vec<f32> = (0..h * w * MS_BANDS).map(|_| rng.gen_range(0.2..0.8)).collect();
    let gt = Image::new(h, w, MS_BANDS, gt)?;
    let pan: Vec<f32> = (0..h * w)
        .map(|px| (0..MS_BANDS).map(|b| gt.data()[px * MS_BANDS + b]).sum::<f32>() / MS_BANDS as f32)
        .collect();
    let pan = Image::new(h, w, 1, pan)?;
    let scene: ScenePair = wald_degrade(&gt, &pan, 4)?;

    let cfg = TrainConfig {
        patch: 4,
        stride: 4,
        d: 8,
        layers: 2,
        k: 1,
        precision: Precision::High,
        ..TrainConfig::default()
    };
    let mut params = ModelParams::init(cfg.patch, cfg.d, cfg.layers, seed);
    let jitter = |a: &mut Array2<f64>, lo: f64, hi: f64, rng: &mut ChaCha8Rng| a.mapv_inplace(|_| rng.gen_range(lo..hi));
    for r in &mut params.recon {
        jitter(r, -0.05, 0.05, &mut rng);
    }
    jitter(&mut params.alpha, 0.1, 0.6, &mut rng);
    jitter(&mut params.beta, 0.5, 1.5, &mut rng);
    let prep = PreparedScene::new(&scene, cfg.patch, cfg.stride)?;
    Ok((prep, params, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::backward;

    #[test]
    fn quadratic_probe() {
        let f = |x: f64| 3.0 * x * x - 2.0 * x + 1.0;
        let d = central_difference(f, 0.7, 1e-3);
        assert!((d - (6.0 * 0.7 - 2.0)).abs() < 1e-9);
        let cubic = |x: f64| x * x * x;
        for h in [1e-2, 1e-3] {
            let err = (central_difference(cubic, 1.0, h) - 3.0).abs();
            assert!((err - h * h).abs() < 1e-9);
        }
    }

    #[test]
    fn standard_precision_is_refused() {
        let (prep, params, mut cfg) = toy_scene(0).unwrap();
        cfg.precision = Precision::Standard;
        let c = ParamCoord {
            tensor: "alpha".into(),
            row: 0,
            col: 0,
        };
        assert!(finite_diff_grad(&prep, &params, &cfg, &c, 1e-4).is_err());
        assert!(grad_check(&prep, &params, &cfg, 1e-4).is_err());
    }

    #[test]
    fn toy_scene_passes() {
        let (prep, params, cfg) = toy_scene(0).unwrap();
        assert_eq!(prep.n_patches(), 2);
        let report = grad_check(&prep, &params, &cfg, 1e-4).unwrap();
        assert_eq!(report.len(), 7);
        for g in &report {
            assert!(g.max_rel <= 1e-4, "{g:?}");
        }
    }

    #[test]
    fn random_coordinates_agree() {
        let (prep, params, mut cfg) = toy_scene(3).unwrap();
        cfg.gamma = 1.0;
        let (_, grads) = backward(&prep, &params, &cfg).unwrap();
        let named = grads.tensors();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let (name, t) = &named[rng.gen_range(0..named.len())];
            let (row, col) = (rng.gen_range(0..t.nrows()), rng.gen_range(0..t.ncols()));
            let c = ParamCoord {
                tensor: name.clone(),
                row,
                col,
            };
            let fd = finite_diff_grad(&prep, &params, &cfg, &c, 1e-4).unwrap();
            assert!(rel_err(t[[row, col]], fd) <= 1e-4, "{name}[{row},{col}] {} vs {fd}", t[[row, col]]);
        }
    }

    #[test]
    fn gamma_enters_linearly() {
        let (prep, params, mut cfg) = toy_scene(1).unwrap();
        let mut g = Vec::new();
        for gamma in [0.0, 0.01, 0.02] {
            cfg.gamma = gamma;
            g.push(backward(&prep, &params, &cfg).unwrap().1);
        }
        for ((a, b), c) in g[0].tensors().iter().zip(g[1].tensors()).zip(g[2].tensors()) {
            for ((x0, x1), x2) in a.1.iter().zip(b.1.iter()).zip(c.1.iter()) {
                assert!(((x2 - x0) - 2.0 * (x1 - x0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn step_size_sweep_is_v_shaped() {
        let (prep, params, cfg) = toy_scene(0).unwrap();
        let (_, grads) = backward(&prep, &params, &cfg).unwrap();
        let c = ParamCoord {
            tensor: "w_local.0".into(),
            row: 0,
            col: 0,
        };
        let analytic = grads.w_local[0][[0, 0]];
        let errs: Vec<f64> = [1e-1, 1e-4, 1e-11]
            .iter()
            .map(|&eps| (finite_diff_grad(&prep, &params, &cfg, &c, eps).unwrap() - analytic).abs())
            .collect();
        assert!(errs[1] < errs[0] && errs[1] < errs[2], "{errs:?}");
    }
}
