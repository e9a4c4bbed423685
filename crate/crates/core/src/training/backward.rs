//! Reverse pass through reconstruction, fusion, both aggregation branches,
//! pattern weights, edge weights and the patch embeddings.
//!
//! Neighbor selection and pattern supports are constants within a step.
//! Clamps and `max(., 0)` take subgradient 0 at and beyond their kinks.

use ndarray::{s, Array2, ArrayView1};

use super::loss::{contrastive_with_grad, l1_mean};
use super::LossBreakdown;
use crate::aggregation::{forward_prepared, prefix_backward, ForwardPass, ModelParams, PreparedScene};
use crate::config::{Ablation, TrainConfig};
use crate::error::{invalid, Error, Result};
use crate::graph::{band_node, pan_node};
use crate::imaging::MS_BANDS;

/// Loss of a finished forward pass against the scene's reference.
pub fn pass_loss(prep: &PreparedScene, pass: &ForwardPass, cfg: &TrainConfig) -> Result<LossBreakdown> {
    let gt = prep
        .gt
        .as_ref()
        .ok_or_else(|| invalid("training needs a reference image"))?;
    let l1 = l1_mean(&pass.fused, gt);
    let lcl = match cfg.ablation {
        Ablation::Full => {
            contrastive_with_grad(pass.repr.h_local.view(), pass.repr.h_global.view(), cfg.tau, false)?.0
        }
        _ => 0.0,
    };
    Ok(LossBreakdown::new(l1, lcl, cfg.gamma))
}

/// `d cos(a, b) / d a`, zero when either vector vanishes.
fn cosine_grad(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Option<(f64, ndarray::Array1<f64>)> {
    let na = a.dot(&a).sqrt();
    let nb = b.dot(&b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    let cos = a.dot(&b) / (na * nb);
    Some((cos, &b / (na * nb) - &(&a * (cos / (na * na)))))
}

/// Gradients of the total loss for one scene, running the forward pass
/// first.
pub fn backward(prep: &PreparedScene, params: &ModelParams, cfg: &TrainConfig) -> Result<(LossBreakdown, ModelParams)> {
    let pass = forward_prepared(prep, params, cfg, None)?;
    backward_from_pass(prep, params, cfg, &pass)
}

/// Gradients of the total loss given the intermediates of `pass`.
pub fn backward_from_pass(
    prep: &PreparedScene,
    params: &ModelParams,
    cfg: &TrainConfig,
    pass: &ForwardPass,
) -> Result<(LossBreakdown, ModelParams)> {
    let gt = prep
        .gt
        .as_ref()
        .ok_or_else(|| invalid("training needs a reference image"))?;
    let n = prep.n_patches();
    let d = params.dim();
    let layout = &prep.layout;
    let mut grads = params.zeros_like();

    // L1 through the clamp.
    let count = pass.fused.len() as f64;
    let d_out: Vec<f64> = pass
        .unclamped
        .iter()
        .zip(&pass.fused)
        .zip(gt)
        .map(|((&raw, &f), &g)| {
            if raw <= 0.0 || raw >= 1.0 || f == g {
                0.0
            } else {
                (f - g).signum() / count
            }
        })
        .collect();

    // Decoder and overlap averaging.
    let mut dh = Array2::<f64>::zeros(pass.repr.h.raw_dim());
    for b in 0..MS_BANDS {
        let plane: Vec<f64> = d_out.iter().skip(b).step_by(MS_BANDS).copied().collect();
        let blocks = layout.reassemble_adjoint(&plane);
        let dblocks = Array2::from_shape_vec((n, layout.block_len()), blocks).expect("block shape");
        grads.recon[b] = dblocks.t().dot(&pass.decoder_inputs[b]);
        let dc = dblocks.dot(&params.recon[b]);
        for i in 0..n {
            let mut row = dh.row_mut(pan_node(i));
            row += &dc.slice(s![i, ..d]);
            let mut row = dh.row_mut(band_node(n, i, b));
            row += &dc.slice(s![i, d..]);
        }
    }

    // Fusion and the contrastive term.
    let (mut dhl, mut dhg) = match cfg.ablation {
        Ablation::Full => (&dh * 0.5, &dh * 0.5),
        Ablation::LocalOnly => (dh, Array2::zeros(pass.repr.h_global.raw_dim())),
        Ablation::GlobalOnly => (Array2::zeros(pass.repr.h_local.raw_dim()), dh),
    };
    let l1 = l1_mean(&pass.fused, gt);
    let mut lcl = 0.0;
    if cfg.ablation == Ablation::Full {
        let (loss, g) = contrastive_with_grad(
            pass.repr.h_local.view(),
            pass.repr.h_global.view(),
            cfg.tau,
            cfg.gamma != 0.0,
        )?;
        lcl = loss;
        if let Some((gl, gg)) = g {
            dhl.scaled_add(cfg.gamma, &gl);
            dhg.scaled_add(cfg.gamma, &gg);
        }
    }

    let u = pass.graph.features.view();
    let alpha = params.alpha.as_slice().expect("contiguous alpha");
    let beta = params.beta.as_slice().expect("contiguous beta");

    // Local branch: H_local = Z Q, Q = mean of prefix products.
    let l = params.layers();
    let mut q = Array2::<f64>::zeros((d, d));
    for p in &pass.prefix_local {
        q += p;
    }
    q /= l as f64;
    let dq = pass.z_local.t().dot(&dhl) / l as f64;
    grads.w_local = prefix_backward(&params.w_local, &pass.prefix_local, &vec![Some(dq); l]);
    let dz = dhl.dot(&q.t());
    let (du_local, d_alpha, dw_local) = pass.local.backward(&pass.patterns, alpha, u, dz.view());

    // Global branch: H_global = V P_l.
    let last = pass.prefix_global.last().expect("at least one layer");
    let mut g_prefix: Vec<Option<Array2<f64>>> = vec![None; l];
    g_prefix[l - 1] = Some(pass.v_global.t().dot(&dhg));
    grads.w_global = prefix_backward(&params.w_global, &pass.prefix_global, &g_prefix);
    let dv = dhg.dot(&last.t());
    let (du_global, d_beta, dw_global) = pass.global.backward(&pass.patterns, beta, u, dv.view());

    grads.alpha = Array2::from_shape_vec((1, d_alpha.len()), d_alpha).expect("alpha shape");
    grads.beta = Array2::from_shape_vec((1, d_beta.len()), d_beta).expect("beta shape");

    // Pattern entry weights are max(cos(u_i, u_j), 0) of their endpoints.
    let mut du = du_local + du_global;
    for (m, p) in pass.patterns.patterns.iter().enumerate() {
        for (e, &(i, j, _)) in p.matrix.entries().iter().enumerate() {
            let g = dw_local[m][e] + dw_global[m][e];
            if g == 0.0 {
                continue;
            }
            let (ui, uj) = (u.row(i), u.row(j));
            if let (Some((cos, gi)), Some((_, gj))) = (cosine_grad(ui, uj), cosine_grad(uj, ui)) {
                if cos > 0.0 {
                    du.row_mut(i).scaled_add(g, &gi);
                    du.row_mut(j).scaled_add(g, &gj);
                }
            }
        }
    }

    // Embeddings.
    let dx = du.slice(s![..n, ..]);
    grads.w_pan = dx.t().dot(&prep.pan_patches);
    for b in 0..MS_BANDS {
        let mut dy = Array2::<f64>::zeros((n, d));
        for i in 0..n {
            dy.row_mut(i).assign(&du.row(band_node(n, i, b)));
        }
        grads.w_band[b] = dy.t().dot(&prep.band_patches[b]);
    }

    for (name, t) in grads.tensors() {
        if t.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { param: name, iter: 0 });
        }
    }
    Ok((LossBreakdown::new(l1, lcl, cfg.gamma), grads))
}
