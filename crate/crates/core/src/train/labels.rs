use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use super::anchors::AnchorGrid;
use crate::geom::{iou_axis, AxisBox, BinaryMask};
use crate::model::ModelConfig;

/// Two-branch labels: `+1` where the RoW centre lies strictly closer than `radius`
/// search-patch pixels to the target centre, `-1` elsewhere. Row-major over the grid.
pub fn labels_two_branch(cfg: &ModelConfig, gt: &AxisBox, radius: f64) -> Vec<f64> {
    let (gx, gy) = gt.center();
    let r = cfg.response_side;
    (0..r * r)
        .map(|n| {
            let (cx, cy) = cfg.row_center(n / r, n % r);
            if (cx - gx).hypot(cy - gy) < radius {
                1.0
            } else {
                -1.0
            }
        })
        .collect()
}

/// Three-branch labels: `+1` for anchors whose IoU with `gt` is at least `threshold`.
/// Indexed like [`AnchorGrid`].
pub fn labels_three_branch(anchors: &AnchorGrid, gt: &AxisBox, threshold: f64) -> Vec<f64> {
    anchors
        .boxes()
        .iter()
        .map(|a| if iou_axis(a, gt) >= threshold { 1.0 } else { -1.0 })
        .collect()
}

/// RoWs with at least one positive anchor, in row-major order.
pub fn positive_rows(labels: &[f64], side: usize) -> Vec<(usize, usize)> {
    let cells = side * side;
    (0..cells)
        .filter(|&n| labels.iter().skip(n).step_by(cells).any(|&y| y > 0.0))
        .map(|n| (n / side, n % side))
        .collect()
}

/// `side x side` mask labels (`+1` foreground, `-1` background) for the candidate
/// window of RoW `(row, col)`, by nearest sampling of the search-patch mask.
pub fn mask_labels(cfg: &ModelConfig, gt_mask: &BinaryMask, (row, col): (usize, usize), side: usize) -> Vec<f64> {
    let win = cfg.row_window(row, col);
    let step = win.width() / side as f64;
    let mut out = Vec::with_capacity(side * side);
    for u in 0..side {
        let y = (win.y_min + (u as f64 + 0.5) * step).floor() as isize;
        for v in 0..side {
            let x = (win.x_min + (v as f64 + 0.5) * step).floor() as isize;
            out.push(if gt_mask.get_signed(y, x) { 1.0 } else { -1.0 });
        }
    }
    out
}
