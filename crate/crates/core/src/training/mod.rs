//! Losses, exact gradients, the optimizer, checkpoints and the training loop.

mod adam;
mod backward;
mod checkpoint;
mod gradcheck;
mod loss;
mod train;

pub use adam::{adam_step, AdamState};
pub use backward::{backward, backward_from_pass, pass_loss};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use gradcheck::{central_difference, finite_diff_grad, grad_check, toy_scene, GroupError, ParamCoord};
pub use loss::{loss_contrastive, loss_l1};
pub use train::{train, train_with, TrainEvent, TrainLog, TrainOutcome};

use ndarray::ArrayView2;

use crate::config::TrainConfig;
use crate::error::{shape_err, Result};
use crate::imaging::Image;

/// Loss components of one evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossBreakdown {
    pub l1: f64,
    pub lcl: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(l1: f64, lcl: f64, gamma: f64) -> Self {
        Self {
            l1,
            lcl,
            total: l1 + gamma * lcl,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.l1.is_finite() && self.lcl.is_finite() && self.total.is_finite()
    }
}

/// `l1 + gamma * lcl` from the fused image and both branch outputs.
pub fn total_loss(
    fused: &Image,
    gt: &Image,
    h_local: ArrayView2<f64>,
    h_global: ArrayView2<f64>,
    cfg: &TrainConfig,
) -> Result<LossBreakdown> {
    if !fused.same_shape(gt) {
        return Err(shape_err("fused and reference images differ in shape"));
    }
    let l1 = loss_l1(fused, gt)?;
    let lcl = loss_contrastive(h_local, h_global, cfg.tau)?;
    Ok(LossBreakdown::new(l1, lcl, cfg.gamma))
}

/// Step decay: `lr0 * decay^floor(iter / decay_every)`.
pub fn lr_schedule(iter: usize, cfg: &TrainConfig) -> f64 {
    let steps = iter / cfg.decay_every.max(1);
    cfg.lr0 * cfg.decay.powi(steps as i32)
}
