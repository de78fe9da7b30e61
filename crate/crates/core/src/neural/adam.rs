use serde::{Deserialize, Serialize};

use super::params::{Gradients, ParamId, ParamStore};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    /// Generator/discriminator optimizer settings of the reference setup.
    fn default() -> Self {
        AdamConfig { lr: 1e-4, beta1: 0.5, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam moments for one parameter group.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub ids: Vec<ParamId>,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, store: &ParamStore, ids: Vec<ParamId>) -> Self {
        let m: Vec<Vec<f64>> = ids.iter().map(|&id| vec![0.0; store.get(id).len()]).collect();
        AdamState { config, v: m.clone(), m, ids, t: 0 }
    }

    /// One bias-corrected Adam update over the group. Missing gradients count
    /// as zero. Fails before touching any parameter if a gradient is not
    /// finite.
    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients) -> Result<()> {
        for &id in &self.ids {
            if let Some(g) = grads.get(id) {
                if let Some((index, &value)) = g.data.iter().enumerate().find(|(_, x)| !x.is_finite()) {
                    return Err(Error::NonFiniteGradient { param: store.name(id).to_string(), index, value });
                }
            }
        }
        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for (slot, &id) in self.ids.iter().enumerate() {
            let g = grads.get(id);
            let (m, v) = (&mut self.m[slot], &mut self.v[slot]);
            let theta = &mut store.get_mut(id).data;
            for i in 0..theta.len() {
                let gi = g.map_or(0.0, |g| g.data[i]);
                m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                let mh = m[i] / bc1;
                let vh = v[i] / bc2;
                theta[i] -= lr * mh / (vh.sqrt() + eps);
            }
        }
        Ok(())
    }
}
