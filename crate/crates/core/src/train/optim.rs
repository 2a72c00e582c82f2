use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::model::{ParamId, Params};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Linear warm-up from `start` to `peak`, then geometric decay from `peak` to `end`.
/// Positions are measured in (fractional) epochs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LrSchedule {
    pub start: f64,
    pub peak: f64,
    pub end: f64,
    pub warmup_epochs: usize,
    pub decay_epochs: usize,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self {
            start: 1e-3,
            peak: 5e-3,
            end: 5e-4,
            warmup_epochs: 5,
            decay_epochs: 15,
        }
    }
}

impl LrSchedule {
    pub fn epochs(&self) -> usize {
        self.warmup_epochs + self.decay_epochs
    }

    pub fn at(&self, epoch: f64) -> f64 {
        let w = self.warmup_epochs as f64;
        if epoch < w {
            return self.start + (self.peak - self.start) * epoch / w;
        }
        if self.decay_epochs == 0 {
            return self.peak;
        }
        let t = ((epoch - w) / self.decay_epochs as f64).min(1.0);
        self.peak * (self.end / self.peak).powf(t)
    }
}

/// SGD with momentum and L2 weight decay; frozen parameters are never touched.
#[derive(Clone, Debug)]
pub struct Sgd<T> {
    pub momentum: f64,
    pub weight_decay: f64,
    velocity: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Sgd<T> {
    pub fn new(momentum: f64, weight_decay: f64) -> Self {
        Self {
            momentum,
            weight_decay,
            velocity: Vec::new(),
        }
    }

    /// Rescales `grads` so their global norm is at most `clip` (when `clip > 0`) and
    /// returns the norm before clipping.
    pub fn clip(grads: &mut [(ParamId, Tensor<T>)], clip: f64) -> f64 {
        let norm = grads.iter().map(|(_, g)| g.squared_norm().to_f64()).sum::<f64>().sqrt();
        if clip > 0.0 && norm > clip {
            let s = T::of(clip / norm);
            for (_, g) in grads.iter_mut() {
                g.scale_in_place(s);
            }
        }
        norm
    }

    pub fn step(&mut self, params: &mut Params<T>, grads: &[(ParamId, Tensor<T>)], lr: f64) {
        if self.velocity.len() != params.len() {
            self.velocity = (0..params.len()).map(|_| None).collect();
        }
        let (mu, wd, lr) = (T::of(self.momentum), T::of(self.weight_decay), T::of(lr));
        for (id, g) in grads {
            if params.is_frozen(*id) {
                continue;
            }
            let w = params.get_mut(*id);
            let v = self.velocity[id.index()].get_or_insert_with(|| Tensor::zeros(w.shape()));
            for ((vi, &gi), wi) in v.data_mut().iter_mut().zip(g.data()).zip(w.data_mut()) {
                *vi = mu * *vi + gi + wd * *wi;
                *wi -= lr * *vi;
            }
        }
    }
}
