use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::geom::AxisBox;
use crate::model::ModelConfig;

/// Anchor boxes replicated over the response grid, in search-patch pixels.
///
/// Anchor `a` of RoW `(i, j)` lives at flat index `a * side^2 + i * side + j`, which is
/// also the layout of the per-anchor score and label planes.
#[derive(Clone, Debug, PartialEq)]
pub struct AnchorGrid {
    pub side: usize,
    pub per_cell: usize,
    boxes: Vec<AxisBox>,
}

impl AnchorGrid {
    pub fn new(cfg: &ModelConfig) -> Self {
        let side = cfg.response_side;
        let mut boxes = Vec::with_capacity(cfg.anchor_ratios.len() * side * side);
        for &ratio in &cfg.anchor_ratios {
            let w = cfg.anchor_size * ratio.sqrt();
            let h = cfg.anchor_size / ratio.sqrt();
            for i in 0..side {
                for j in 0..side {
                    let (cx, cy) = cfg.row_center(i, j);
                    boxes.push(AxisBox::from_center_size(cx, cy, w, h).expect("positive anchor"));
                }
            }
        }
        Self {
            side,
            per_cell: cfg.anchor_ratios.len(),
            boxes,
        }
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn get(&self, anchor: usize, row: usize, col: usize) -> &AxisBox {
        &self.boxes[(anchor * self.side + row) * self.side + col]
    }

    pub fn boxes(&self) -> &[AxisBox] {
        &self.boxes
    }
}

/// Normalised offsets of `gt` relative to `anchor`: centre shift over anchor size and
/// log size ratios.
pub fn encode_deltas(anchor: &AxisBox, gt: &AxisBox) -> Result<[f64; 4]> {
    let (aw, ah) = (anchor.width(), anchor.height());
    let (tw, th) = (gt.width(), gt.height());
    if !(aw > 0.0 && ah > 0.0) {
        return Err(Error::DegenerateBox(alloc::format!("anchor {aw}x{ah}")));
    }
    if !(tw > 0.0 && th > 0.0) {
        return Err(Error::DegenerateBox(alloc::format!("target {tw}x{th}")));
    }
    let (ax, ay) = anchor.center();
    let (tx, ty) = gt.center();
    Ok([(tx - ax) / aw, (ty - ay) / ah, (tw / aw).ln(), (th / ah).ln()])
}

pub fn decode_deltas(anchor: &AxisBox, d: &[f64; 4]) -> Result<AxisBox> {
    let (ax, ay) = anchor.center();
    let (aw, ah) = (anchor.width(), anchor.height());
    AxisBox::from_center_size(ax + d[0] * aw, ay + d[1] * ah, aw * d[2].exp(), ah * d[3].exp())
}
