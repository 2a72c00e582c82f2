//! Closed-form loss values over plain slices. The training objective builds the same
//! quantities on the autograd tape; these are the reference definitions.

#[allow(unused_imports)]
use num_traits::Float;

pub use crate::autograd::smooth_l1;

fn softplus(v: f64) -> f64 {
    if v > 0.0 {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}

/// Mean logistic loss of similarity logits against `±1` labels.
pub fn loss_sim(scores: &[f64], labels: &[f64]) -> f64 {
    assert_eq!(scores.len(), labels.len());
    scores.iter().zip(labels).map(|(&g, &y)| softplus(-y * g)).sum::<f64>() / scores.len() as f64
}

/// Cross-entropy of anchor probabilities against `±1` labels, averaged over the
/// `k * cells` anchors; probabilities are clamped to `[eps, 1 - eps]`.
pub fn loss_score(probs: &[f64], labels: &[f64], eps: f64) -> f64 {
    assert_eq!(probs.len(), labels.len());
    let s: f64 = probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(eps, 1.0 - eps);
            if y > 0.0 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    s / probs.len() as f64
}

/// Anchor regression loss: `1 / (2 * n) * sum_anchors (y + 1) * sum_j smooth_l1(target_j - pred_j)`
/// where `n` is the anchor count. `pred` and `target` hold four values per anchor.
pub fn loss_reg(pred: &[[f64; 4]], target: &[[f64; 4]], labels: &[f64], beta: f64) -> f64 {
    assert!(pred.len() == target.len() && pred.len() == labels.len());
    let s: f64 = pred
        .iter()
        .zip(target)
        .zip(labels)
        .map(|((q, d), &y)| (y + 1.0) * (0..4).map(|j| smooth_l1(d[j] - q[j], beta)).sum::<f64>())
        .sum();
    s / (2.0 * pred.len() as f64)
}

/// Mask loss over RoWs: each RoW `n` contributes
/// `(1 + y_n) / (2 w h) * sum_px log(1 + exp(-c * m))`, so negative RoWs add nothing.
pub fn loss_mask(logits: &[&[f64]], labels: &[&[f64]], row_labels: &[f64]) -> f64 {
    assert!(logits.len() == labels.len() && logits.len() == row_labels.len());
    logits
        .iter()
        .zip(labels)
        .zip(row_labels)
        .map(|((m, c), &y)| {
            if y <= -1.0 {
                return 0.0;
            }
            let wh = m.len() as f64;
            (1.0 + y) / (2.0 * wh) * m.iter().zip(c.iter()).map(|(&m, &c)| softplus(-c * m)).sum::<f64>()
        })
        .sum()
}

/// Weighted multi-task total. Two-branch: `l_mask * L_mask + L_sim`; three-branch:
/// `l_mask * L_mask + l_score * L_score + l_reg * L_reg`.
#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossParts {
    pub mask: f64,
    pub sim: f64,
    pub score: f64,
    pub reg: f64,
}

impl LossParts {
    pub fn total(&self, weights: &super::LossWeights) -> f64 {
        weights.mask * self.mask + self.sim + weights.score * self.score + weights.reg * self.reg
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;

    #[test]
    fn closed_forms() {
        let ln2 = 2f64.ln();
        assert!((loss_sim(&[0.0; 289], &[1.0; 289]) - ln2).abs() < 1e-12);
        assert!(loss_sim(&[50.0, -50.0], &[1.0, -1.0]) < 1e-20);
        assert!((loss_score(&[0.5; 10], &[1.0; 10], 1e-7) - ln2).abs() < 1e-12);
        assert_eq!(loss_score(&[1.0, 0.0], &[1.0, -1.0], 0.0), 0.0);
        assert!((smooth_l1(0.5, 1.0) - 0.125).abs() < 1e-15);
        assert_eq!(smooth_l1(0.0, 1.0), 0.0);
        assert_eq!(smooth_l1(1.0, 1.0), 0.5);
        let mut err = [0.0; 4];
        err[2] = 0.5;
        assert!((loss_reg(&[[0.0; 4]], &[err], &[1.0], 1.0) - 0.125).abs() < 1e-15);
        assert_eq!(loss_reg(&[[3.0; 4]; 4], &[[0.0; 4]; 4], &[-1.0; 4], 1.0), 0.0);
        let z = vec![0.0; 49];
        let c = vec![1.0; 49];
        assert!((loss_mask(&[&z], &[&c], &[1.0]) - ln2).abs() < 1e-12);
        assert_eq!(loss_mask(&[&z, &z], &[&c, &c], &[-1.0, -1.0]), 0.0);
    }

    #[test]
    fn weighted_total() {
        let w = crate::train::LossWeights::default();
        let p = LossParts {
            mask: 0.1,
            sim: 0.0,
            score: 0.2,
            reg: 0.3,
        };
        assert!((p.total(&w) - 3.7).abs() < 1e-12);
        assert_eq!(LossParts::default().total(&w), 0.0);
    }

    #[test]
    fn elementwise_reference() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let g: Vec<f64> = (0..289).map(|_| rng.random_range(-5.0..5.0)).collect();
        let y: Vec<f64> = (0..289)
            .map(|_| if rng.random_bool(0.2) { 1.0 } else { -1.0 })
            .collect();
        let brute = g.iter().zip(&y).map(|(g, y)| (1.0 + (-y * g).exp()).ln()).sum::<f64>() / 289.0;
        assert!((loss_sim(&g, &y) - brute).abs() < 1e-12);
    }
}
