use serde::{Deserialize, Serialize};

use super::params::{Gradients, ParamStore};
use super::NnError;

/// Bias-corrected Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One Adam update of every tensor in `store`. Missing gradients count as
/// zero. Nothing is modified if any gradient is non-finite.
pub fn adam_step(store: &mut ParamStore, grads: &Gradients, cfg: &AdamConfig) -> Result<(), NnError> {
    if grads.len() != store.len() {
        return Err(NnError::Shape(format!(
            "{} gradients for {} parameters",
            grads.len(),
            store.len()
        )));
    }
    for (id, g) in grads.iter() {
        if let Some(g) = g {
            if g.len() != store.value(id).len() {
                return Err(NnError::Shape(format!(
                    "gradient of {} has {} values, parameter has {}",
                    store.name(id),
                    g.len(),
                    store.value(id).len()
                )));
            }
            if let Some(pos) = g.data().iter().position(|v| !v.is_finite()) {
                return Err(NnError::NonFinite {
                    name: store.name(id).to_string(),
                    index: pos,
                    value: g.data()[pos],
                });
            }
        }
    }

    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let g = grads.get(id).map(|g| g.data());
        let p = store.param_mut(id);
        p.adam.step += 1;
        let t = p.adam.step as i32;
        let c1 = 1.0 - cfg.beta1.powi(t);
        let c2 = 1.0 - cfg.beta2.powi(t);
        let (m, v, w) = (p.adam.m.data_mut(), p.adam.v.data_mut(), p.value.data_mut());
        for i in 0..w.len() {
            let gi = g.map_or(0.0, |g| g[i]);
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            w[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}
