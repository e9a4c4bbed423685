use crate::aggregation::ModelParams;
use crate::config::TrainConfig;
use crate::error::{shape_err, Error, Result};

/// First and second moment estimates plus the step count.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: ModelParams,
    pub v: ModelParams,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    state: &mut AdamState,
    lr: f64,
    cfg: &TrainConfig,
) -> Result<()> {
    let (b1, b2, eps) = (cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    state.t += 1;
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    let g = grads.tensors();
    let mut m = state.m.tensors_mut();
    let mut v = state.v.tensors_mut();
    let mut p = params.tensors_mut();
    if g.len() != p.len() || m.len() != p.len() || v.len() != p.len() {
        return Err(shape_err("optimizer state does not match the parameters"));
    }
    for (k, (name, theta)) in p.iter_mut().enumerate() {
        let (_, gk) = &g[k];
        if gk.dim() != theta.dim() || m[k].1.dim() != theta.dim() {
            return Err(shape_err(format!("gradient shape mismatch for {name}")));
        }
        let mut updated = (*theta).clone();
        ndarray::Zip::from(&mut updated)
            .and(&mut *m[k].1)
            .and(&mut *v[k].1)
            .and(*gk)
            .for_each(|t, m, v, &g| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *t -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            });
        if updated.iter().any(|x| !x.is_finite()) {
            return Err(Error::Divergence {
                param: name.clone(),
                iter: state.t as usize,
            });
        }
        theta.assign(&updated);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (ModelParams, TrainConfig) {
        (ModelParams::init(2, 3, 2, 4), TrainConfig::default())
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let (mut p, cfg) = setup();
        let before = p.clone();
        let mut st = AdamState::new(&p);
        adam_step(&mut p, &before.zeros_like(), &mut st, 1e-3, &cfg).unwrap();
        assert_eq!(p, before);
        assert_eq!(st.t, 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let (mut p, cfg) = setup();
        let before = p.clone();
        let mut g = p.zeros_like();
        g.w_pan.fill(0.37);
        g.alpha.fill(-2.0);
        let mut st = AdamState::new(&p);
        adam_step(&mut p, &g, &mut st, 1e-3, &cfg).unwrap();
        for (a, b) in p.w_pan.iter().zip(before.w_pan.iter()) {
            assert!((a - b + 1e-3).abs() < 1e-9);
        }
        for (a, b) in p.alpha.iter().zip(before.alpha.iter()) {
            assert!((a - b - 1e-3).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_gradient_settles_at_lr() {
        let (mut p, cfg) = setup();
        let mut g = p.zeros_like();
        g.beta.fill(0.05);
        let mut st = AdamState::new(&p);
        let mut last = p.beta[[0, 0]];
        let mut step = 0.0;
        for _ in 0..1000 {
            adam_step(&mut p, &g, &mut st, 1e-3, &cfg).unwrap();
            step = p.beta[[0, 0]] - last;
            last = p.beta[[0, 0]];
        }
        assert!((step + 1e-3).abs() < 1e-8, "{step}");
    }

    #[test]
    fn rejects_mismatch_and_nan() {
        let (mut p, cfg) = setup();
        let other = ModelParams::init(3, 3, 2, 0);
        let mut st = AdamState::new(&p);
        assert!(adam_step(&mut p, &other.zeros_like(), &mut st, 1e-3, &cfg).is_err());
        let mut g = p.zeros_like();
        g.w_local[1][[0, 0]] = f64::NAN;
        let mut st = AdamState::new(&p);
        match adam_step(&mut p, &g, &mut st, 1e-3, &cfg) {
            Err(Error::Divergence { param, .. }) => assert_eq!(param, "w_local.1"),
            other => panic!("{other:?}"),
        }
    }
}
