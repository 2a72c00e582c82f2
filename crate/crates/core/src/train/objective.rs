use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::Rng;

use super::anchors::{encode_deltas, AnchorGrid};
use super::labels::{labels_three_branch, labels_two_branch, mask_labels, positive_rows};
use super::losses::LossParts;
use super::{MaskMode, RegNorm, TrainConfig};
use crate::autograd::{Graph, Var};
use crate::error::Result;
use crate::geom::{AxisBox, BinaryMask};
use crate::model::{Binder, ModelConfig, Network, Variant};
use crate::scalar::Scalar;

/// Everything the losses compare against for one search patch.
#[derive(Clone, Debug, PartialEq)]
pub struct Targets {
    /// Two-branch: one `±1` per RoW; three-branch: one per anchor.
    pub labels: Vec<f64>,
    /// Three-branch regression targets, laid out like the box head output.
    pub deltas: Vec<f64>,
    /// Positive RoWs, row-major.
    pub rows: Vec<(usize, usize)>,
    /// Plain-head mask labels for `rows`, laid out `[pixel][row]`.
    pub masks: Vec<f64>,
    /// Refined-head labels for a subset of `rows`.
    pub refined: Vec<((usize, usize), Vec<f64>)>,
}

impl Targets {
    pub fn build<R: Rng>(
        model: &ModelConfig,
        cfg: &TrainConfig,
        anchors: Option<&AnchorGrid>,
        gt_box: &AxisBox,
        gt_mask: &BinaryMask,
        rng: &mut R,
    ) -> Result<Self> {
        let side = model.response_side;
        let cells = side * side;
        let (labels, deltas) = match (model.variant, anchors) {
            (Variant::ThreeBranch, Some(anchors)) => {
                let labels = labels_three_branch(anchors, gt_box, cfg.iou_positive);
                let k = anchors.per_cell;
                let mut deltas = vec![0.0; 4 * k * cells];
                for (idx, a) in anchors.boxes().iter().enumerate() {
                    if labels[idx] > 0.0 {
                        let d = encode_deltas(a, gt_box)?;
                        let (anchor, n) = (idx / cells, idx % cells);
                        for (j, v) in d.iter().enumerate() {
                            deltas[(j * k + anchor) * cells + n] = *v;
                        }
                    }
                }
                (labels, deltas)
            }
            (Variant::ThreeBranch, None) => {
                let anchors = AnchorGrid::new(model);
                return Self::build(model, cfg, Some(&anchors), gt_box, gt_mask, rng);
            }
            (Variant::TwoBranch, _) => (labels_two_branch(model, gt_box, cfg.center_radius), Vec::new()),
        };
        let rows = positive_rows(&labels, side);
        let mut masks = Vec::new();
        if cfg.mask_mode != MaskMode::Refined && !rows.is_empty() {
            let m2 = model.mask_side * model.mask_side;
            masks = vec![0.0; m2 * rows.len()];
            for (i, &rc) in rows.iter().enumerate() {
                for (px, v) in mask_labels(model, gt_mask, rc, model.mask_side).into_iter().enumerate() {
                    masks[px * rows.len() + i] = v;
                }
            }
        }
        let mut refined = Vec::new();
        if cfg.mask_mode != MaskMode::Plain && !rows.is_empty() {
            // always keep the RoW nearest the target centre; sample the rest
            let (gx, gy) = gt_box.center();
            let dist = |&(i, j): &(usize, usize)| {
                let (cx, cy) = model.row_center(i, j);
                (cx - gx).hypot(cy - gy)
            };
            let nearest = *rows
                .iter()
                .min_by(|a, b| dist(a).partial_cmp(&dist(b)).expect("finite"))
                .expect("nonempty");
            let mut rest: Vec<_> = rows.iter().copied().filter(|&r| r != nearest).collect();
            rest.shuffle(rng);
            let take = cfg.max_refined_rows.max(1) - 1;
            for rc in core::iter::once(nearest).chain(rest.into_iter().take(take)) {
                refined.push((rc, mask_labels(model, gt_mask, rc, model.refined_mask_side)));
            }
        }
        Ok(Self {
            labels,
            deltas,
            rows,
            masks,
            refined,
        })
    }
}

/// Builds the weighted multi-task loss of one pair on the tape. Returns the scalar
/// loss node and its components.
pub fn objective<'a, T: Scalar>(
    net: &'a Network<T>,
    g: &mut Graph<'a, T>,
    p: &mut Binder<'a, T>,
    exemplar: Var,
    search: Var,
    targets: &Targets,
    cfg: &TrainConfig,
) -> Result<(Var, LossParts)> {
    let model = net.config();
    let side = model.response_side;
    let cells = (side * side) as f64;
    let of = T::of;
    let tv = |v: &[f64]| v.iter().map(|&x| of(x)).collect::<Vec<T>>();
    let z = net.exemplar(g, p, exemplar)?;
    let x = net.search(g, p, search)?;
    let corr = g.xcorr(z, x.features)?;
    let scores = net.scores(g, p, corr)?;
    let mut parts = LossParts::default();
    let mut terms: Vec<(Var, T)> = Vec::new();
    match model.variant {
        Variant::TwoBranch => {
            let n = targets.labels.len();
            let l = g.logistic_loss(scores, tv(&targets.labels), vec![of(1.0 / cells); n])?;
            parts.sim = g.value(l).data()[0].to_f64();
            terms.push((l, T::one()));
        }
        Variant::ThreeBranch => {
            let k = model.anchors_per_cell;
            let bg = g.slice_channels(scores, 0, k)?;
            let fg = g.slice_channels(scores, k, k)?;
            let logit = g.sub(fg, bg)?;
            let n = targets.labels.len();
            let w = of(1.0 / (k as f64 * cells));
            let t01: Vec<f64> = targets.labels.iter().map(|&y| (y + 1.0) / 2.0).collect();
            let ls = g.bce_loss(logit, tv(&t01), vec![w; n], of(cfg.prob_eps))?;
            parts.score = g.value(ls).data()[0].to_f64();
            terms.push((ls, of(cfg.loss.score)));

            let deltas = net.deltas(g, p, corr)?;
            let denom = match cfg.reg_norm {
                RegNorm::Anchors => k as f64 * cells,
                RegNorm::Positives => targets.labels.iter().filter(|&&y| y > 0.0).count().max(1) as f64,
            };
            let mut wr = vec![T::zero(); 4 * k * side * side];
            for (idx, &y) in targets.labels.iter().enumerate() {
                let (anchor, cell) = (idx / (side * side), idx % (side * side));
                for j in 0..4 {
                    wr[(j * k + anchor) * side * side + cell] = of((y + 1.0) / (2.0 * denom));
                }
            }
            let lr = g.smooth_l1_loss(deltas, tv(&targets.deltas), wr, of(cfg.smooth_l1_beta))?;
            parts.reg = g.value(lr).data()[0].to_f64();
            terms.push((lr, of(cfg.loss.reg)));
        }
    }
    let npos = targets.rows.len();
    if npos > 0 {
        let lm = of(cfg.loss.mask);
        if !targets.masks.is_empty() {
            let m = net.masks_at(g, p, corr, &targets.rows)?;
            let wh = (model.mask_side * model.mask_side) as f64;
            let l = g.logistic_loss(m, tv(&targets.masks), vec![of(1.0 / wh); targets.masks.len()])?;
            parts.mask += g.value(l).data()[0].to_f64();
            terms.push((l, lm));
        }
        if !targets.refined.is_empty() {
            // the sampled RoWs stand in for every positive RoW
            let share = npos as f64 / targets.refined.len() as f64;
            let s2 = model.refined_mask_side * model.refined_mask_side;
            for (rc, labels) in &targets.refined {
                let m = net.refine(g, p, corr, &x, *rc)?;
                let l = g.logistic_loss(m, tv(labels), vec![of(share / s2 as f64); s2])?;
                parts.mask += g.value(l).data()[0].to_f64();
                terms.push((l, lm));
            }
        }
    }
    let total = g.weighted_sum(&terms)?;
    Ok((total, parts))
}
