use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use super::{Augment, TrainConfig};
use crate::data::AnnotatedSequence;
use crate::error::{Error, Result};
use crate::geom::{min_max_box, AxisBox, BinaryMask};
use crate::image::{CropWindow, RgbImage};
use crate::model::ModelConfig;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Fewest foreground pixels a search-patch mask may keep before the pair is dropped.
pub const MIN_MASK_PIXELS: usize = 4;

/// Side of the square exemplar context region around a target box: the box padded by
/// `amount * (w + h)` in both directions, squared to equal area.
pub fn context_side(b: &AxisBox, amount: f64) -> f64 {
    let p = amount * (b.width() + b.height());
    ((b.width() + p) * (b.height() + p)).sqrt()
}

/// Jitter applied to one crop: displacement of the object from the patch centre in
/// patch pixels, and magnification (> 1 makes the object larger).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jitter {
    pub shift: (f64, f64),
    pub scale: f64,
}

impl Jitter {
    pub const NONE: Self = Self {
        shift: (0.0, 0.0),
        scale: 1.0,
    };

    fn sample<R: Rng>(rng: &mut R, max_shift: f64, scale: (f64, f64)) -> Self {
        let shift = if max_shift > 0.0 {
            (
                rng.random_range(-max_shift..=max_shift),
                rng.random_range(-max_shift..=max_shift),
            )
        } else {
            (0.0, 0.0)
        };
        let scale = if scale.1 > scale.0 {
            rng.random_range(scale.0..=scale.1)
        } else {
            scale.0
        };
        Self { shift, scale }
    }
}

/// The crop window that places `target` at the patch centre displaced by `jitter`.
/// `magnify` is the ratio of patch side to exemplar side (1 for exemplars).
pub fn jittered_window(target: &AxisBox, context: f64, out: usize, magnify: f64, jitter: Jitter) -> Result<CropWindow> {
    let side = context_side(target, context) * magnify / jitter.scale;
    let s = side / out as f64;
    let (cx, cy) = target.center();
    CropWindow::new(cx - jitter.shift.0 * s, cy - jitter.shift.1 * s, side, out)
}

/// Maps a frame-space box into a crop's patch coordinates.
pub fn box_to_patch(win: &CropWindow, b: &AxisBox) -> AxisBox {
    let (x0, y0) = win.to_patch(b.x_min, b.y_min);
    let (x1, y1) = win.to_patch(b.x_max, b.y_max);
    AxisBox::new(x0, y0, x1, y1).expect("monotone map")
}

#[derive(Clone, Debug)]
pub struct TrainingPair<T> {
    pub exemplar: Tensor<T>,
    pub search: Tensor<T>,
    /// Target box in search-patch pixels.
    pub gt_box: AxisBox,
    /// Target mask in search-patch pixels.
    pub gt_mask: BinaryMask,
}

/// Builds a pair with explicit jitter. The exemplar frame's mask gives the exemplar
/// box; the search frame's mask gives the search box and labels.
pub fn make_pair_with<T: Scalar>(
    model: &ModelConfig,
    context: f64,
    exemplar: (&RgbImage, &BinaryMask),
    search: (&RgbImage, &BinaryMask),
    jz: Jitter,
    jx: Jitter,
) -> Result<TrainingPair<T>> {
    let zb = min_max_box(exemplar.1).map_err(|_| Error::PairRejected("exemplar object absent".into()))?;
    let xb = min_max_box(search.1).map_err(|_| Error::PairRejected("search object absent".into()))?;
    let zw = jittered_window(&zb, context, model.exemplar_side, 1.0, jz)?;
    let magnify = model.search_side as f64 / model.exemplar_side as f64;
    let xw = jittered_window(&xb, context, model.search_side, magnify, jx)?;
    let gt_mask = xw.crop_mask(search.1);
    if gt_mask.count() < MIN_MASK_PIXELS {
        return Err(Error::PairRejected(alloc::format!(
            "{} foreground pixels after cropping",
            gt_mask.count()
        )));
    }
    Ok(TrainingPair {
        exemplar: zw.crop(exemplar.0, model.pixel_mean, model.pixel_scale),
        search: xw.crop(search.0, model.pixel_mean, model.pixel_scale),
        gt_box: box_to_patch(&xw, &xb),
        gt_mask,
    })
}

/// Builds a pair with jitter drawn from the configured augmentation ranges.
pub fn make_training_pair<T: Scalar, R: Rng>(
    model: &ModelConfig,
    cfg: &TrainConfig,
    exemplar: (&RgbImage, &BinaryMask),
    search: (&RgbImage, &BinaryMask),
    rng: &mut R,
) -> Result<TrainingPair<T>> {
    let a: &Augment = &cfg.augment;
    let jz = Jitter::sample(rng, a.exemplar_shift, a.exemplar_scale);
    let jx = Jitter::sample(rng, a.search_shift, a.search_scale);
    make_pair_with(model, cfg.context, exemplar, search, jz, jx)
}

/// Where training pairs come from.
pub trait PairSource<T> {
    fn next_pair(
        &mut self,
        rng: &mut rand_chacha::ChaCha8Rng,
        model: &ModelConfig,
        cfg: &TrainConfig,
    ) -> Result<TrainingPair<T>>;
}

/// Samples (exemplar frame, search frame) pairs of the same object from annotated
/// sequences, at most `cfg.frame_range` frames apart.
pub struct SequenceSampler<'d> {
    sequences: &'d [AnnotatedSequence],
    /// (sequence, object) pairs with at least one visible frame.
    tracks: Vec<(usize, usize)>,
}

impl<'d> SequenceSampler<'d> {
    pub fn new(sequences: &'d [AnnotatedSequence]) -> Result<Self> {
        let tracks: Vec<_> = sequences
            .iter()
            .enumerate()
            .flat_map(|(s, seq)| {
                seq.objects
                    .iter()
                    .enumerate()
                    .filter(|(_, o)| o.masks.iter().any(|m| m.count() >= MIN_MASK_PIXELS))
                    .map(move |(o, _)| (s, o))
            })
            .collect();
        if tracks.is_empty() {
            return Err(Error::InvalidArgument("no visible objects to train on".into()));
        }
        Ok(Self { sequences, tracks })
    }
}

impl<T: Scalar> PairSource<T> for SequenceSampler<'_> {
    fn next_pair(
        &mut self,
        rng: &mut rand_chacha::ChaCha8Rng,
        model: &ModelConfig,
        cfg: &TrainConfig,
    ) -> Result<TrainingPair<T>> {
        let mut last = Error::PairRejected("no attempt".into());
        for _ in 0..32 {
            let (s, o) = self.tracks[rng.random_range(0..self.tracks.len())];
            let seq = &self.sequences[s];
            let obj = &seq.objects[o];
            let visible: Vec<usize> = (0..seq.len())
                .filter(|&t| obj.masks[t].count() >= MIN_MASK_PIXELS)
                .collect();
            let tz = visible[rng.random_range(0..visible.len())];
            let near: Vec<usize> = visible
                .iter()
                .copied()
                .filter(|&t| t.abs_diff(tz) <= cfg.frame_range)
                .collect();
            let tx = near[rng.random_range(0..near.len())];
            match make_training_pair(
                model,
                cfg,
                (&seq.frames[tz], &obj.masks[tz]),
                (&seq.frames[tx], &obj.masks[tx]),
                rng,
            ) {
                Ok(p) => return Ok(p),
                Err(e @ Error::PairRejected(_)) => last = e,
                Err(e) => return Err(e),
            }
        }
        Err(last)
    }
}

/// Serves the same pair forever (overfitting checks).
pub struct RepeatPair<T>(pub TrainingPair<T>);

impl<T: Scalar> PairSource<T> for RepeatPair<T> {
    fn next_pair(
        &mut self,
        _: &mut rand_chacha::ChaCha8Rng,
        _: &ModelConfig,
        _: &TrainConfig,
    ) -> Result<TrainingPair<T>> {
        Ok(self.0.clone())
    }
}
