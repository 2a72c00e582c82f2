use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::autograd::ConvSpec;
use crate::error::{Error, Result};
use crate::geom::AxisBox;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackboneKind {
    /// ResNet-50 truncated after the fourth stage, last stage dilated.
    Resnet50C4,
    /// Four plain conv stages with strides 2-2-2-1, the last dilated.
    ToyConvnet,
}

/// Which heads sit on top of the correlation features.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Similarity score + mask.
    TwoBranch,
    /// Anchor scores + box regression + mask.
    ThreeBranch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub backbone: BackboneKind,
    pub variant: Variant,
    /// Output channels of the four toy stages (ignored by the ResNet backbone).
    pub toy_channels: Vec<usize>,
    pub feature_channels: usize,
    pub head_hidden: usize,
    pub anchors_per_cell: usize,
    /// Width/height ratios, one per anchor.
    pub anchor_ratios: Vec<f64>,
    /// Side of the square anchor before applying the ratio.
    pub anchor_size: f64,
    pub mask_side: usize,
    pub refined_mask_side: usize,
    pub refinement_channels: Vec<usize>,
    pub exemplar_side: usize,
    pub search_side: usize,
    pub response_side: usize,
    pub total_stride: usize,
    pub pixel_mean: [f64; 3],
    pub pixel_scale: [f64; 3],
}

/// Spatial sides of the backbone taps for one input size, shallowest first.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LevelSides {
    /// Side of the maps that feed the refinement modules: third, second, first skip.
    pub skips: [usize; 3],
    pub out: usize,
}

/// The CPU-sized three-branch configuration.
impl Default for ModelConfig {
    fn default() -> Self {
        Self::toy(Variant::ThreeBranch)
    }
}

impl ModelConfig {
    /// Full-size configuration with the ResNet-50 backbone.
    pub fn full(variant: Variant) -> Self {
        Self {
            backbone: BackboneKind::Resnet50C4,
            variant,
            toy_channels: vec![16, 32, 64, 64],
            feature_channels: 256,
            head_hidden: 256,
            anchors_per_cell: 5,
            anchor_ratios: vec![1.0 / 3.0, 0.5, 1.0, 2.0, 3.0],
            anchor_size: 64.0,
            mask_side: 63,
            refined_mask_side: 127,
            refinement_channels: vec![32, 16, 8],
            exemplar_side: 127,
            search_side: 255,
            response_side: 17,
            total_stride: 8,
            pixel_mean: [123.675, 116.28, 103.53],
            pixel_scale: [58.395, 57.12, 57.375],
        }
    }

    /// Same geometry as [`ModelConfig::full`] on the small CPU backbone.
    pub fn toy(variant: Variant) -> Self {
        Self {
            backbone: BackboneKind::ToyConvnet,
            feature_channels: 64,
            head_hidden: 64,
            ..Self::full(variant)
        }
    }

    /// A tiny configuration (5x5 grid, two anchors, 7x7 masks) for gradient checks.
    pub fn tiny(variant: Variant) -> Self {
        Self {
            backbone: BackboneKind::ToyConvnet,
            variant,
            toy_channels: vec![3, 4, 4, 4],
            feature_channels: 4,
            head_hidden: 5,
            anchors_per_cell: 2,
            anchor_ratios: vec![0.5, 2.0],
            anchor_size: 16.0,
            mask_side: 7,
            refined_mask_side: 31,
            refinement_channels: vec![3, 2, 2],
            exemplar_side: 31,
            search_side: 63,
            response_side: 5,
            total_stride: 8,
            pixel_mean: [128.0; 3],
            pixel_scale: [64.0; 3],
        }
    }

    /// Channels produced per RoW by the score head.
    pub fn score_channels(&self) -> usize {
        match self.variant {
            Variant::TwoBranch => 1,
            Variant::ThreeBranch => 2 * self.anchors_per_cell,
        }
    }

    pub fn box_channels(&self) -> usize {
        match self.variant {
            Variant::TwoBranch => 0,
            Variant::ThreeBranch => 4 * self.anchors_per_cell,
        }
    }

    pub fn mask_channels(&self) -> usize {
        self.mask_side * self.mask_side
    }

    /// Channels of the three refinement skip taps, in the order they are consumed.
    pub fn skip_channels(&self) -> [usize; 3] {
        match self.backbone {
            BackboneKind::Resnet50C4 => [512, 256, 64],
            BackboneKind::ToyConvnet => [self.toy_channels[2], self.toy_channels[1], self.toy_channels[0]],
        }
    }

    pub fn backbone_channels(&self) -> usize {
        match self.backbone {
            BackboneKind::Resnet50C4 => 1024,
            BackboneKind::ToyConvnet => self.toy_channels[3],
        }
    }

    /// Spatial sides produced by the backbone for a square input, or `None` when the
    /// input is too small.
    pub fn level_sides(&self, input: usize) -> Option<LevelSides> {
        match self.backbone {
            BackboneKind::ToyConvnet => {
                let mut s = input;
                let mut sides = [0; 4];
                for (i, spec) in toy_specs().iter().enumerate() {
                    s = spec.output_side(s, 3)?;
                    sides[i] = s;
                }
                Some(LevelSides {
                    skips: [sides[2], sides[1], sides[0]],
                    out: sides[3],
                })
            }
            BackboneKind::Resnet50C4 => {
                let stem = RESNET_STEM.output_side(input, 7)?;
                let pooled = ConvSpec::new(2, 1, 1).output_side(stem, 3)?;
                let l2 = RESNET_DOWN.output_side(pooled, 3)?;
                let l3 = l2;
                Some(LevelSides {
                    skips: [l2, pooled, stem],
                    out: l3,
                })
            }
        }
    }

    /// Checks every shape relation the network relies on.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: alloc::string::String| Err(Error::Config(m));
        if self.feature_channels == 0 || self.head_hidden == 0 || self.mask_side == 0 {
            return bad("channel counts and mask side must be positive".into());
        }
        if self.backbone == BackboneKind::ToyConvnet && (self.toy_channels.len() != 4 || self.toy_channels.contains(&0))
        {
            return bad("toy backbone needs four positive channel counts".into());
        }
        if self.refinement_channels.len() != 3 || self.refinement_channels.contains(&0) {
            return bad("refinement needs three positive channel counts".into());
        }
        if self.variant == Variant::ThreeBranch {
            if self.anchors_per_cell == 0 || self.anchor_ratios.len() != self.anchors_per_cell {
                return bad(format!(
                    "{} anchor ratios for {} anchors per cell",
                    self.anchor_ratios.len(),
                    self.anchors_per_cell
                ));
            }
            if self.anchor_ratios.iter().any(|r| !(r.is_finite() && *r > 0.0))
                || !(self.anchor_size.is_finite() && self.anchor_size > 0.0)
            {
                return bad("anchor ratios and size must be positive".into());
            }
        }
        if !self.pixel_scale.iter().all(|s| s.is_finite() && *s > 0.0) {
            return bad("pixel scale must be positive".into());
        }
        if self.search_side <= self.exemplar_side || self.total_stride == 0 {
            return bad("search side must exceed exemplar side".into());
        }
        if !(self.search_side - self.exemplar_side).is_multiple_of(self.total_stride) {
            return bad(format!(
                "stride {} does not divide {} - {}",
                self.total_stride, self.search_side, self.exemplar_side
            ));
        }
        let (Some(z), Some(x)) = (self.level_sides(self.exemplar_side), self.level_sides(self.search_side)) else {
            return bad("inputs too small for the backbone".into());
        };
        if x.out < z.out || x.out - z.out + 1 != self.response_side {
            return bad(format!(
                "response side {} but backbone gives {} and {}",
                self.response_side, z.out, x.out
            ));
        }
        if (self.search_side - self.exemplar_side) / self.total_stride + 1 != self.response_side {
            return bad("response side inconsistent with stride".into());
        }
        if self.response_side > 1 {
            for l in 0..3 {
                let (zs, xs) = (z.skips[l], x.skips[l]);
                if xs < zs || (xs - zs) % (self.response_side - 1) != 0 {
                    return bad(format!("skip level {l}: windows of {zs} do not tile {xs}"));
                }
            }
        }
        if z.skips[0] != z.out {
            return bad("first skip must match the exemplar feature side".into());
        }
        Ok(())
    }

    /// Side of the map `e1` produced by deconvolving a RoW vector.
    pub fn seed_side(&self) -> usize {
        self.level_sides(self.exemplar_side).map(|s| s.out).unwrap_or(0)
    }

    /// Centre of RoW `(row, col)` in search-patch pixels.
    pub fn row_center(&self, row: usize, col: usize) -> (f64, f64) {
        let mid = (self.response_side as f64 - 1.0) / 2.0;
        let c = self.search_side as f64 / 2.0;
        let s = self.total_stride as f64;
        (c + (col as f64 - mid) * s, c + (row as f64 - mid) * s)
    }

    /// The exemplar-sized candidate window of RoW `(row, col)` in search-patch pixels.
    pub fn row_window(&self, row: usize, col: usize) -> AxisBox {
        let (cx, cy) = self.row_center(row, col);
        let e = self.exemplar_side as f64;
        AxisBox::from_center_size(cx, cy, e, e).expect("positive exemplar side")
    }
}

pub(crate) fn toy_specs() -> [ConvSpec; 4] {
    [
        ConvSpec::new(2, 0, 1),
        ConvSpec::new(2, 0, 1),
        ConvSpec::new(2, 0, 1),
        ConvSpec::new(1, 2, 2),
    ]
}

pub(crate) const RESNET_STEM: ConvSpec = ConvSpec {
    stride: 2,
    padding: 0,
    dilation: 1,
};

/// The stride-2 3x3 convolution that opens the second ResNet stage (and its shortcut).
pub(crate) const RESNET_DOWN: ConvSpec = ConvSpec {
    stride: 2,
    padding: 0,
    dilation: 1,
};
