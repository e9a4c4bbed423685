use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::{adam_step, AdamState};
use super::backward::backward_from_pass;
use super::{lr_schedule, LossBreakdown};
use crate::aggregation::{forward_prepared, ModelParams, PreparedScene};
use crate::config::TrainConfig;
use crate::error::{invalid, Error, Result};
use crate::imaging::ScenePair;

/// Per-iteration batch-mean losses and the learning rate used.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub entries: Vec<(usize, LossBreakdown, f64)>,
}

impl TrainLog {
    /// CSV with header `iter,l1,lcl,total,lr`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,l1,lcl,total,lr\n");
        for (iter, b, lr) in &self.entries {
            let _ = writeln!(out, "{iter},{},{},{},{lr}", b.l1, b.lcl, b.total);
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub log: TrainLog,
}

/// Progress notifications from [`train_with`].
pub enum TrainEvent<'a> {
    Iteration { iter: usize, loss: LossBreakdown, lr: f64 },
    /// Periodic and final snapshots.
    Checkpoint { iter: usize, params: &'a ModelParams },
    /// Training stopped on a non-finite value; `params` are the last finite ones.
    Diverged { iter: usize, params: &'a ModelParams },
}

/// [`train_with`] from fresh parameters, ignoring events.
pub fn train(dataset: &[ScenePair], cfg: &TrainConfig) -> Result<TrainOutcome> {
    let params = ModelParams::init(cfg.patch, cfg.d, cfg.layers, cfg.seed);
    train_with(dataset, cfg, params, &mut |_| Ok(()))
}

/// Adam on batch-averaged gradients. Each batch holds `min(batch, len)`
/// distinct scenes drawn from a seeded shuffle that is redrawn once used up.
pub fn train_with(
    dataset: &[ScenePair],
    cfg: &TrainConfig,
    mut params: ModelParams,
    on_event: &mut dyn FnMut(TrainEvent<'_>) -> Result<()>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    params.validate()?;
    if dataset.is_empty() {
        return Err(invalid("training needs at least one scene"));
    }
    if dataset.iter().any(|s| s.gt.is_none()) {
        return Err(invalid("every training scene needs a reference image"));
    }
    let prepared = dataset
        .iter()
        .map(|s| PreparedScene::new(s, cfg.patch, cfg.stride))
        .collect::<Result<Vec<_>>>()?;
    let batch = cfg.batch.min(prepared.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = Vec::new();
    let mut state = AdamState::new(&params);
    let mut log = TrainLog::default();

    for iter in 0..cfg.iters {
        let lr = lr_schedule(iter, cfg);
        let mut picks = Vec::with_capacity(batch);
        while picks.len() < batch {
            if order.is_empty() {
                order = (0..prepared.len()).collect();
                order.shuffle(&mut rng);
            }
            let idx = order.pop().expect("refilled");
            if !picks.contains(&idx) {
                picks.push(idx);
            }
        }

        let mut grads = params.zeros_like();
        let (mut l1, mut lcl) = (0.0, 0.0);
        let step = (|| -> Result<()> {
            for &i in &picks {
                let pass = forward_prepared(&prepared[i], &params, cfg, None)?;
                let (loss, g) = backward_from_pass(&prepared[i], &params, cfg, &pass)?;
                l1 += loss.l1;
                lcl += loss.lcl;
                grads.add_scaled(&g, 1.0 / batch as f64);
            }
            Ok(())
        })();
        let loss = LossBreakdown::new(l1 / batch as f64, lcl / batch as f64, cfg.gamma);
        let step = step.and_then(|_| {
            if loss.is_finite() {
                Ok(())
            } else {
                Err(Error::Divergence {
                    param: "loss".into(),
                    iter,
                })
            }
        });
        let step = step.and_then(|_| {
            let mut next = params.clone();
            adam_step(&mut next, &grads, &mut state, lr, cfg)?;
            Ok(next)
        });
        match step {
            Ok(next) => params = next,
            Err(e) => {
                on_event(TrainEvent::Diverged { iter, params: &params })?;
                return Err(match e {
                    Error::Divergence { param, .. } => Error::Divergence { param, iter },
                    Error::NonFinite(what) => Error::Divergence { param: what, iter },
                    other => other,
                });
            }
        }
        log.entries.push((iter, loss, lr));
        on_event(TrainEvent::Iteration { iter, loss, lr })?;
        let done = iter + 1;
        if cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0 && done != cfg.iters {
            on_event(TrainEvent::Checkpoint { iter: done, params: &params })?;
        }
    }
    on_event(TrainEvent::Checkpoint {
        iter: cfg.iters,
        params: &params,
    })?;
    Ok(TrainOutcome { params, log })
}
