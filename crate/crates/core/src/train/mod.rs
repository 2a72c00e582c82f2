//! Training: crops and augmentation, anchors, label assignment, losses and the SGD
//! loop.

mod anchors;
mod labels;
pub mod losses;
mod objective;
mod optim;
mod pair;

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use anchors::{decode_deltas, encode_deltas, AnchorGrid};
pub use labels::{labels_three_branch, labels_two_branch, mask_labels, positive_rows};
pub use losses::LossParts;
pub use objective::{objective, Targets};
pub use optim::{LrSchedule, Sgd};
pub use pair::{
    box_to_patch, context_side, jittered_window, make_pair_with, make_training_pair, Jitter, PairSource, RepeatPair,
    SequenceSampler, TrainingPair, MIN_MASK_PIXELS,
};

use crate::autograd::Graph;
use crate::error::{Error, Result};
use crate::model::{Network, ParamId, Variant};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub mask: f64,
    pub score: f64,
    pub reg: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            mask: 32.0,
            score: 1.0,
            reg: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Augment {
    /// Maximum exemplar displacement, patch pixels.
    pub exemplar_shift: f64,
    pub search_shift: f64,
    pub exemplar_scale: (f64, f64),
    pub search_scale: (f64, f64),
}

impl Default for Augment {
    fn default() -> Self {
        Self {
            exemplar_shift: 4.0,
            search_shift: 64.0,
            exemplar_scale: (0.95, 1.05),
            search_scale: (0.82, 1.18),
        }
    }
}

/// Which mask heads the mask loss trains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    Plain,
    Refined,
    Both,
}

/// Denominator of the anchor regression loss.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegNorm {
    /// `2 k |D|`: every anchor counts, so the loss scales with the positive fraction.
    #[default]
    Anchors,
    /// `2 * positives`: a mean over positive anchors, independent of the grid size.
    Positives,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub loss: LossWeights,
    pub smooth_l1_beta: f64,
    pub reg_norm: RegNorm,
    /// Probability clamp for the anchor cross-entropy.
    pub prob_eps: f64,
    pub iou_positive: f64,
    /// Two-branch positive radius around the target centre, search-patch pixels.
    pub center_radius: f64,
    pub schedule: LrSchedule,
    pub steps_per_epoch: usize,
    pub batch_size: usize,
    pub momentum: f64,
    pub weight_decay: f64,
    /// Global gradient-norm clip; 0 disables.
    pub grad_clip: f64,
    pub augment: Augment,
    /// Context margin around the target when cropping.
    pub context: f64,
    pub mask_mode: MaskMode,
    /// Positive RoWs per pair pushed through the refinement decoder.
    pub max_refined_rows: usize,
    /// Largest frame gap between exemplar and search frames.
    pub frame_range: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossWeights::default(),
            smooth_l1_beta: 1.0,
            reg_norm: RegNorm::Anchors,
            prob_eps: 1e-7,
            iou_positive: 0.6,
            center_radius: 16.0,
            schedule: LrSchedule::default(),
            steps_per_epoch: 100,
            batch_size: 4,
            momentum: 0.9,
            weight_decay: 1e-4,
            grad_clip: 10.0,
            augment: Augment::default(),
            context: 0.5,
            mask_mode: MaskMode::Both,
            max_refined_rows: 2,
            frame_range: 20,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.loss.mask >= 0.0
            && self.loss.score >= 0.0
            && self.loss.reg >= 0.0
            && self.smooth_l1_beta > 0.0
            && self.prob_eps > 0.0
            && self.prob_eps < 0.5
            && self.iou_positive > 0.0
            && self.iou_positive <= 1.0
            && self.center_radius > 0.0
            && self.schedule.start > 0.0
            && self.schedule.peak > 0.0
            && self.schedule.end > 0.0
            && self.schedule.epochs() > 0
            && self.steps_per_epoch > 0
            && self.batch_size > 0
            && (0.0..1.0).contains(&self.momentum)
            && self.weight_decay >= 0.0
            && self.grad_clip >= 0.0
            && self.context >= 0.0
            && self.augment.exemplar_scale.0 > 0.0
            && self.augment.search_scale.0 > 0.0
            && self.augment.exemplar_scale.0 <= self.augment.exemplar_scale.1
            && self.augment.search_scale.0 <= self.augment.search_scale.1;
        if ok {
            Ok(())
        } else {
            Err(Error::Config("training settings out of range".into()))
        }
    }
}

/// One optimiser step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub epoch: usize,
    pub lr: f64,
    /// Batch-mean weighted loss.
    pub loss: f64,
    /// Batch-mean components.
    pub parts: LossParts,
    pub grad_norm: f64,
}

/// Per-parameter gradients, in registration order.
pub type Gradients<T> = Vec<(ParamId, Tensor<T>)>;

/// Loss and gradients of one pair.
pub fn pair_gradients<T: Scalar>(
    net: &Network<T>,
    pair: &TrainingPair<T>,
    targets: &Targets,
    cfg: &TrainConfig,
) -> Result<(f64, LossParts, Gradients<T>)> {
    let mut g = Graph::new();
    let mut p = net.binder();
    let z = g.constant(&pair.exemplar);
    let x = g.constant(&pair.search);
    let (loss, parts) = objective(net, &mut g, &mut p, z, x, targets, cfg)?;
    let value = g.value(loss).data()[0].to_f64();
    let mut grads = g.backward(loss)?;
    Ok((value, parts, p.collect(&mut grads)))
}

/// Runs the full schedule. `on_epoch(epoch, net, records)` is called after every
/// epoch with that epoch's step records; an error from it stops training.
pub fn train<T: Scalar, S: PairSource<T>>(
    net: &mut Network<T>,
    source: &mut S,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, &Network<T>, &[StepRecord]) -> Result<()>,
) -> Result<Vec<StepRecord>> {
    cfg.validate()?;
    let model = net.config().clone();
    let anchors = (model.variant == Variant::ThreeBranch).then(|| AnchorGrid::new(&model));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut sgd = Sgd::new(cfg.momentum, cfg.weight_decay);
    let mut history = Vec::new();
    let epochs = cfg.schedule.epochs();
    let mut step = 0;
    for epoch in 0..epochs {
        let first = history.len();
        for s in 0..cfg.steps_per_epoch {
            let lr = cfg.schedule.at(epoch as f64 + s as f64 / cfg.steps_per_epoch as f64);
            let mut acc: Vec<(ParamId, Tensor<T>)> = Vec::new();
            let mut loss = 0.0;
            let mut parts = LossParts::default();
            for _ in 0..cfg.batch_size {
                let pair = source.next_pair(&mut rng, &model, cfg)?;
                let targets = Targets::build(&model, cfg, anchors.as_ref(), &pair.gt_box, &pair.gt_mask, &mut rng)?;
                let (l, pp, grads) = pair_gradients(net, &pair, &targets, cfg)?;
                if !l.is_finite() {
                    return Err(Error::Diverged {
                        step,
                        detail: alloc::format!("loss {l} (parts {pp:?})"),
                    });
                }
                loss += l;
                parts.mask += pp.mask;
                parts.sim += pp.sim;
                parts.score += pp.score;
                parts.reg += pp.reg;
                merge(&mut acc, grads);
            }
            let inv = 1.0 / cfg.batch_size as f64;
            for (_, g) in acc.iter_mut() {
                g.scale_in_place(T::of(inv));
            }
            let grad_norm = Sgd::clip(&mut acc, cfg.grad_clip);
            if !grad_norm.is_finite() {
                return Err(Error::Diverged {
                    step,
                    detail: "non-finite gradient".into(),
                });
            }
            sgd.step(net.params_mut(), &acc, lr);
            history.push(StepRecord {
                step,
                epoch,
                lr,
                loss: loss * inv,
                parts: LossParts {
                    mask: parts.mask * inv,
                    sim: parts.sim * inv,
                    score: parts.score * inv,
                    reg: parts.reg * inv,
                },
                grad_norm,
            });
            step += 1;
        }
        if !net.params().all_finite() {
            return Err(Error::Diverged {
                step,
                detail: "non-finite weights".into(),
            });
        }
        on_epoch(epoch, net, &history[first..])?;
    }
    Ok(history)
}

fn merge<T: Scalar>(acc: &mut Vec<(ParamId, Tensor<T>)>, grads: Vec<(ParamId, Tensor<T>)>) {
    if acc.is_empty() {
        *acc = grads;
        return;
    }
    for (id, g) in grads {
        match acc.binary_search_by_key(&id, |(i, _)| *i) {
            Ok(pos) => acc[pos].1.add_assign(&g),
            Err(pos) => acc.insert(pos, (id, g)),
        }
    }
}
