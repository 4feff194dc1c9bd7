use super::graph::{Gradients, ParamId, ParamStore};
use super::{NnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
}

impl SgdConfig {
    pub fn new(learning_rate: f64, weight_decay: f64) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(NnError::InvalidLearningRate(learning_rate));
        }
        if !(weight_decay >= 0.0 && weight_decay.is_finite()) {
            return Err(NnError::InvalidWeightDecay(weight_decay));
        }
        Ok(Self {
            learning_rate,
            weight_decay,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Descent,
    Ascent,
}

/// One plain gradient step on `params`.
///
/// Descent: `p ← p − lr·(g + wd·p)`. Ascent flips only the gradient sign, so
/// decay still shrinks `p`. Parameters the loss does not reach get `g = 0`.
pub fn sgd_step(
    store: &mut ParamStore,
    grads: &Gradients,
    params: &[ParamId],
    cfg: &SgdConfig,
    direction: Direction,
) -> Result<()> {
    for &id in params {
        if let Some(g) = grads.get(id) {
            let (ps, gs) = (store.get(id).shape(), g.shape());
            if ps != gs {
                return Err(NnError::ShapeMismatch {
                    op: "sgd_step",
                    left: ps,
                    right: gs,
                });
            }
        }
    }
    let sign = match direction {
        Direction::Descent => 1.0,
        Direction::Ascent => -1.0,
    };
    let (lr, wd) = (cfg.learning_rate, cfg.weight_decay);
    for &id in params {
        let g = grads.get(id).cloned();
        let p = store.get_mut(id);
        match g {
            Some(g) => {
                for (v, gv) in p.data_mut().iter_mut().zip(g.data()) {
                    *v -= lr * (sign * gv + wd * *v);
                }
            }
            None if wd > 0.0 => p.data_mut().iter_mut().for_each(|v| *v -= lr * wd * *v),
            None => {}
        }
    }
    Ok(())
}
