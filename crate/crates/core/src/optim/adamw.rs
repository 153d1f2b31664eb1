use serde::{Deserialize, Serialize};

use crate::model::Parameters;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for OptimHyper {
    fn default() -> Self {
        OptimHyper {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.1,
        }
    }
}

impl OptimHyper {
    pub fn validate(&self) -> Result<()> {
        let beta_ok = |b: f64| (0.0..1.0).contains(&b);
        if !beta_ok(self.beta1) || !beta_ok(self.beta2) || !(self.eps > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::Config(format!("invalid optimizer hyperparameters {self:?}")));
        }
        Ok(())
    }
}

/// First/second moments per tensor plus the global update counter.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimState {
    pub step: u64,
    pub m: Vec<Vec<f32>>,
    pub v: Vec<Vec<f32>>,
}

impl OptimState {
    pub fn new(params: &Parameters<f32>) -> Self {
        let zeros = || params.tensors.iter().map(|t| vec![0.0; t.tensor.len()]).collect();
        OptimState {
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }
}

/// One AdamW update with decoupled weight decay:
/// `θ ← θ(1 − lr·wd) − lr · m̂ / (sqrt(v̂) + eps)`.
pub fn adamw_step(
    state: &mut OptimState,
    params: &mut Parameters<f32>,
    grads: &Parameters<f32>,
    lr: f64,
    hyper: &OptimHyper,
) -> Result<()> {
    if !params.same_layout(grads) || state.m.len() != params.tensors.len() {
        return Err(Error::Shape("gradients or optimizer state do not mirror parameters".into()));
    }
    for (p, g) in params.tensors.iter().zip(&grads.tensors) {
        if g.tensor.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("gradient of {}", g.name)));
        }
        debug_assert_eq!(p.name, g.name);
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - hyper.beta1.powi(t);
    let bc2 = 1.0 - hyper.beta2.powi(t);
    let decay = 1.0 - lr * hyper.weight_decay;
    for (k, (p, g)) in params.tensors.iter_mut().zip(&grads.tensors).enumerate() {
        let (m, v) = (&mut state.m[k], &mut state.v[k]);
        for i in 0..p.tensor.data.len() {
            let gi = g.tensor.data[i] as f64;
            let mi = hyper.beta1 * m[i] as f64 + (1.0 - hyper.beta1) * gi;
            let vi = hyper.beta2 * v[i] as f64 + (1.0 - hyper.beta2) * gi * gi;
            m[i] = mi as f32;
            v[i] = vi as f32;
            let update = (mi / bc1) / ((vi / bc2).sqrt() + hyper.eps);
            let theta = p.tensor.data[i] as f64 * decay - lr * update;
            p.tensor.data[i] = theta as f32;
        }
    }
    Ok(())
}
