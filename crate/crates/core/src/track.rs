//! Online single-object tracking: one axis-aligned box initialises the exemplar, then
//! every frame is searched around the previous target, the best-scoring RoW gives the
//! mask, and the mask (or the box branch) moves the search region.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::OnlineTracker;
use crate::geom::{mbr, min_max_box, opt_box, AxisBox, BinaryMask, RotatedBox};
use crate::image::{CropWindow, RgbImage};
use crate::model::{Network, ResponseGrid, Variant};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::train::{context_side, decode_deltas, AnchorGrid};

/// Smallest target side, in frame pixels, accepted at initialisation.
pub const MIN_INIT_SIDE: f64 = 2.0;
/// Smallest side the search reference may shrink to.
const MIN_TARGET_SIDE: f64 = 4.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxStrategy {
    #[default]
    MinMax,
    Mbr,
    Opt,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackOptions {
    /// Context margin around the target, as a fraction of `w + h`.
    pub context: f64,
    /// Weight of the new size estimate when updating the search reference.
    pub size_damping: f64,
    /// Use the refinement decoder rather than the plain mask head.
    pub refined: bool,
    pub strategy: BoxStrategy,
    /// Blend of a Hann window into the scores before the argmax; 0 disables it.
    pub window_influence: f64,
    /// Below this logit the frame yields an empty mask and is flagged.
    pub score_floor: Option<f64>,
}

impl Default for TrackOptions {
    fn default() -> Self {
        Self {
            context: 0.5,
            size_damping: 0.35,
            refined: true,
            strategy: BoxStrategy::MinMax,
            window_influence: 0.0,
            score_floor: None,
        }
    }
}

impl TrackOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.context >= 0.0
            && self.context.is_finite()
            && self.size_damping > 0.0
            && self.size_damping <= 1.0
            && (0.0..=1.0).contains(&self.window_influence)
            && self.score_floor.is_none_or(|f| f.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid track options {self:?}")))
        }
    }
}

/// Box reported for a frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputBox {
    Axis(AxisBox),
    Rotated(RotatedBox),
}

impl OutputBox {
    /// Axis boxes as 4 numbers, rotated boxes as their 8 corner coordinates.
    pub fn to_numbers(&self) -> Vec<f64> {
        match self {
            OutputBox::Axis(b) => vec![b.x_min, b.y_min, b.x_max, b.y_max],
            OutputBox::Rotated(r) => r.corners().iter().flat_map(|&(x, y)| [x, y]).collect(),
        }
    }

    /// Inverse of [`OutputBox::to_numbers`]; 8 numbers are corners in that order.
    pub fn from_numbers(v: &[f64]) -> Result<Self> {
        match *v {
            [x0, y0, x1, y1] => Ok(OutputBox::Axis(AxisBox::new(x0, y0, x1, y1)?)),
            [x0, y0, x1, y1, x2, y2, x3, y3] => {
                let w = (x1 - x0).hypot(y1 - y0);
                let h = (x2 - x1).hypot(y2 - y1);
                let angle = (y1 - y0).atan2(x1 - x0);
                let (cx, cy) = ((x0 + x1 + x2 + x3) / 4.0, (y0 + y1 + y2 + y3) / 4.0);
                Ok(OutputBox::Rotated(RotatedBox::new(cx, cy, w, h, angle)?))
            }
            _ => Err(Error::InvalidArgument(format!(
                "a box has 4 or 8 numbers, got {}",
                v.len()
            ))),
        }
    }

    pub fn as_rotated(&self) -> Option<RotatedBox> {
        match self {
            OutputBox::Axis(b) => b.to_rotated(),
            OutputBox::Rotated(r) => Some(*r),
        }
    }
}

/// Box for a mask under a strategy; `None` for an empty mask.
pub fn generate_box(mask: &BinaryMask, strategy: BoxStrategy) -> Option<OutputBox> {
    match strategy {
        BoxStrategy::MinMax => min_max_box(mask).ok().map(OutputBox::Axis),
        BoxStrategy::Mbr => mbr(mask).ok().map(OutputBox::Rotated),
        BoxStrategy::Opt => opt_box(mask).ok().map(OutputBox::Rotated),
    }
}

/// The best-scoring location of a response grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Peak {
    pub row: usize,
    pub col: usize,
    /// Anchor index for the three-branch variant.
    pub anchor: Option<usize>,
    /// Raw classification logit at the peak (foreground minus background for anchors).
    pub score: f64,
}

/// Per-cell classification logits: the single score, or the best anchor's
/// foreground-minus-background margin with its index.
fn cell_logits<T: Scalar>(net: &Network<T>, scores: &Tensor<T>) -> Vec<(f64, Option<usize>)> {
    let cfg = net.config();
    let r = cfg.response_side;
    let d = scores.data();
    match cfg.variant {
        Variant::TwoBranch => d[..r * r].iter().map(|&v| (Scalar::to_f64(v), None)).collect(),
        Variant::ThreeBranch => {
            let k = cfg.anchors_per_cell;
            (0..r * r)
                .map(|n| {
                    let mut best = (f64::NEG_INFINITY, 0);
                    for a in 0..k {
                        let v = d[(k + a) * r * r + n].to_f64() - d[a * r * r + n].to_f64();
                        if v > best.0 {
                            best = (v, a);
                        }
                    }
                    (best.0, Some(best.1))
                })
                .collect()
        }
    }
}

fn hann(n: usize, i: usize) -> f64 {
    if n < 2 {
        1.0
    } else {
        0.5 - 0.5 * (TAU * i as f64 / (n - 1) as f64).cos()
    }
}

/// Argmax over the grid; ties go to the first cell in row-major order.
pub fn find_peak<T: Scalar>(net: &Network<T>, scores: &Tensor<T>, window_influence: f64) -> Peak {
    let r = net.config().response_side;
    let logits = cell_logits(net, scores);
    let mut best: Option<(f64, usize)> = None;
    for (n, &(v, _)) in logits.iter().enumerate() {
        let ranked = if window_influence > 0.0 {
            (1.0 - window_influence) * v + window_influence * hann(r, n / r) * hann(r, n % r)
        } else {
            v
        };
        if best.is_none_or(|(b, _)| ranked > b) {
            best = Some((ranked, n));
        }
    }
    let n = best.map_or(0, |(_, n)| n);
    Peak {
        row: n / r,
        col: n % r,
        anchor: logits[n].1,
        score: logits[n].0,
    }
}

/// One search: the crop window, the network response and its peak.
pub struct Search<T> {
    pub window: CropWindow,
    pub grid: ResponseGrid<T>,
    pub peak: Peak,
}

/// Square search window around `target`, scaled like training crops.
pub fn search_window<T: Scalar>(net: &Network<T>, target: &AxisBox, context: f64) -> Result<CropWindow> {
    let cfg = net.config();
    let (cx, cy) = target.center();
    let side = context_side(target, context) * cfg.search_side as f64 / cfg.exemplar_side as f64;
    CropWindow::new(cx, cy, side, cfg.search_side)
}

/// Runs the network on a search crop around `target`.
pub fn search<T: Scalar>(
    net: &Network<T>,
    exemplar: &Tensor<T>,
    frame: &RgbImage,
    target: &AxisBox,
    opts: &TrackOptions,
) -> Result<Search<T>> {
    let cfg = net.config();
    let window = search_window(net, target, opts.context)?;
    let patch = window.crop(frame, cfg.pixel_mean, cfg.pixel_scale);
    let grid = net.respond(exemplar, &patch)?;
    let peak = find_peak(net, &grid.scores, opts.window_influence);
    Ok(Search { window, grid, peak })
}

impl<T: Scalar> Search<T> {
    /// The box branch's estimate at the peak anchor, in frame coordinates.
    pub fn decoded_box(&self, net: &Network<T>, anchors: &AnchorGrid) -> Option<AxisBox> {
        let (deltas, a) = (self.grid.deltas.as_ref()?, self.peak.anchor?);
        let cfg = net.config();
        let (k, r) = (cfg.anchors_per_cell, cfg.response_side);
        let n = self.peak.row * r + self.peak.col;
        let d: [f64; 4] = core::array::from_fn(|j| deltas.data()[(j * k + a) * r * r + n].to_f64());
        let b = decode_deltas(anchors.get(a, self.peak.row, self.peak.col), &d).ok()?;
        let (x0, y0) = self.window.to_frame(b.x_min, b.y_min);
        let (x1, y1) = self.window.to_frame(b.x_max, b.y_max);
        AxisBox::new(x0, y0, x1, y1).ok()
    }

    /// Binarised mask of the peak RoW pasted into a `width x height` frame.
    pub fn segment(&self, net: &Network<T>, refined: bool, width: usize, height: usize) -> Result<BinaryMask> {
        let logits = net.mask_logits(&self.grid, (self.peak.row, self.peak.col), refined)?;
        paste_mask(
            net,
            &self.window,
            (self.peak.row, self.peak.col),
            &logits,
            width,
            height,
        )
    }
}

/// Maps a RoW's square mask logits back into frame pixels: every frame pixel whose
/// centre falls inside the RoW's candidate window reads the nearest logit, and is
/// foreground when that logit is strictly positive (probability above one half).
pub fn paste_mask<T: Scalar>(
    net: &Network<T>,
    window: &CropWindow,
    (row, col): (usize, usize),
    logits: &Tensor<T>,
    width: usize,
    height: usize,
) -> Result<BinaryMask> {
    let side = logits.shape()[0];
    let row_win = net.config().row_window(row, col);
    let step = row_win.width() / side as f64;
    let (fx0, fy0) = window.to_frame(row_win.x_min, row_win.y_min);
    let (fx1, fy1) = window.to_frame(row_win.x_max, row_win.y_max);
    let span = |lo: f64, hi: f64, n: usize| {
        (
            (lo.floor().max(0.0)) as usize,
            (hi.ceil().min(n as f64).max(0.0)) as usize,
        )
    };
    let (c0, c1) = span(fx0, fx1, width);
    let (r0, r1) = span(fy0, fy1, height);
    let mut bits = vec![false; width * height];
    let d = logits.data();
    for y in r0..r1 {
        for x in c0..c1 {
            let (px, py) = window.to_patch(x as f64 + 0.5, y as f64 + 0.5);
            let u = (py - row_win.y_min) / step;
            let v = (px - row_win.x_min) / step;
            if u < 0.0 || v < 0.0 || u >= side as f64 || v >= side as f64 {
                continue;
            }
            bits[y * width + x] = d[u as usize * side + v as usize].to_f64() > 0.0;
        }
    }
    BinaryMask::from_bits(height, width, bits)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameResult {
    pub mask: BinaryMask,
    pub output: OutputBox,
    pub score: f64,
    pub row: (usize, usize),
    /// The mask was empty and the previous box was reused.
    pub fallback: bool,
    /// The peak score fell below the configured floor.
    pub low_score: bool,
    /// Search reference for the next frame.
    pub target: AxisBox,
}

/// A tracker bound to frozen network parameters. Exemplar features are computed once.
pub struct TrackerState<'n, T: Scalar> {
    net: &'n Network<T>,
    opts: TrackOptions,
    anchors: Option<AnchorGrid>,
    exemplar: Tensor<T>,
    target: AxisBox,
    output: OutputBox,
    frame_size: (usize, usize),
}

impl<'n, T: Scalar> TrackerState<'n, T> {
    pub fn init(net: &'n Network<T>, frame: &RgbImage, init: &AxisBox, opts: TrackOptions) -> Result<Self> {
        opts.validate()?;
        let (w, h) = (frame.width(), frame.height());
        let clipped = init.clamped(w as f64, h as f64);
        if clipped.width() < MIN_INIT_SIDE || clipped.height() < MIN_INIT_SIDE {
            return Err(Error::DegenerateBox(format!(
                "initial box {:.1}x{:.1} inside the frame, need at least {MIN_INIT_SIDE} px per side",
                clipped.width(),
                clipped.height()
            )));
        }
        let cfg = net.config();
        let (cx, cy) = clipped.center();
        let zw = CropWindow::new(cx, cy, context_side(&clipped, opts.context), cfg.exemplar_side)?;
        let exemplar = net.embed_exemplar(&zw.crop(frame, cfg.pixel_mean, cfg.pixel_scale))?;
        let anchors = (cfg.variant == Variant::ThreeBranch).then(|| AnchorGrid::new(cfg));
        Ok(Self {
            net,
            opts,
            anchors,
            exemplar,
            target: clipped,
            output: OutputBox::Axis(clipped),
            frame_size: (w, h),
        })
    }

    pub fn exemplar(&self) -> &Tensor<T> {
        &self.exemplar
    }

    pub fn target(&self) -> &AxisBox {
        &self.target
    }

    pub fn options(&self) -> &TrackOptions {
        &self.opts
    }

    pub fn network(&self) -> &'n Network<T> {
        self.net
    }

    pub fn anchors(&self) -> Option<&AnchorGrid> {
        self.anchors.as_ref()
    }

    /// Moves the search reference, e.g. onto an associated detection.
    pub fn set_target(&mut self, target: &AxisBox) {
        self.target = self.fitted(target);
    }

    /// `b` with its centre moved into the frame and each side kept within
    /// `[MIN_TARGET_SIDE, frame side]`: a usable search reference even when `b` lies
    /// partly or wholly outside the frame.
    pub fn fitted(&self, b: &AxisBox) -> AxisBox {
        let (cx, cy) = b.center();
        self.fit_in_frame(cx, cy, b.width(), b.height())
    }

    fn fit_in_frame(&self, cx: f64, cy: f64, w: f64, h: f64) -> AxisBox {
        let (fw, fh) = (self.frame_size.0 as f64, self.frame_size.1 as f64);
        let w = w.clamp(MIN_TARGET_SIDE, fw.max(MIN_TARGET_SIDE));
        let h = h.clamp(MIN_TARGET_SIDE, fh.max(MIN_TARGET_SIDE));
        AxisBox::from_center_size(cx.clamp(0.0, fw), cy.clamp(0.0, fh), w, h).expect("positive size")
    }

    /// Searches around an arbitrary reference box with this tracker's exemplar.
    pub fn search_at(&self, frame: &RgbImage, target: &AxisBox) -> Result<Search<T>> {
        search(self.net, &self.exemplar, frame, target, &self.opts)
    }

    pub fn track_frame(&mut self, frame: &RgbImage) -> Result<FrameResult> {
        let (w, h) = (frame.width(), frame.height());
        if (w, h) != self.frame_size {
            return Err(Error::DimensionMismatch {
                expected: (self.frame_size.1, self.frame_size.0),
                actual: (h, w),
            });
        }
        let s = self.search_at(frame, &self.target)?;
        let low_score = self.opts.score_floor.is_some_and(|f| s.peak.score < f);
        let mask = if low_score {
            BinaryMask::empty(h, w)?
        } else {
            s.segment(self.net, self.opts.refined, w, h)?
        };
        let (output, fallback) = match generate_box(&mask, self.opts.strategy) {
            Some(b) => (b, false),
            None => (self.output, true),
        };
        let estimate = match &self.anchors {
            Some(anchors) if !low_score => s.decoded_box(self.net, anchors),
            _ => min_max_box(&mask).ok(),
        };
        if let Some(e) = estimate {
            self.target = self.update_target(&e);
        }
        self.output = output;
        Ok(FrameResult {
            mask,
            output,
            score: s.peak.score,
            row: (s.peak.row, s.peak.col),
            fallback,
            low_score,
            target: self.target,
        })
    }

    /// New centre from the estimate, size smoothed towards it, kept inside the frame.
    fn update_target(&self, estimate: &AxisBox) -> AxisBox {
        let d = self.opts.size_damping;
        let w = (1.0 - d) * self.target.width() + d * estimate.width();
        let h = (1.0 - d) * self.target.height() + d * estimate.height();
        let (cx, cy) = estimate.center();
        self.fit_in_frame(cx, cy, w, h)
    }
}

/// Re-initialisable tracker for the reset protocol; keeps the latest frame result.
pub struct OnlineSiamTracker<'n, T: Scalar> {
    net: &'n Network<T>,
    opts: TrackOptions,
    state: Option<TrackerState<'n, T>>,
    pub last: Option<FrameResult>,
}

impl<'n, T: Scalar> OnlineSiamTracker<'n, T> {
    pub fn new(net: &'n Network<T>, opts: TrackOptions) -> Self {
        Self {
            net,
            opts,
            state: None,
            last: None,
        }
    }
}

impl<T: Scalar> OnlineTracker for OnlineSiamTracker<'_, T> {
    fn start(&mut self, frame: &RgbImage, init: &AxisBox) -> Result<()> {
        self.state = Some(TrackerState::init(self.net, frame, init, self.opts.clone())?);
        self.last = None;
        Ok(())
    }

    fn step(&mut self, frame: &RgbImage) -> Result<BinaryMask> {
        let state = self
            .state
            .as_mut()
            .ok_or_else(|| Error::InvalidArgument("tracker stepped before start".into()))?;
        let r = state.track_frame(frame)?;
        let mask = r.mask.clone();
        self.last = Some(r);
        Ok(mask)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    fn tiny(variant: Variant) -> Network<f64> {
        Network::new(ModelConfig::tiny(variant), 5).unwrap()
    }

    fn frame() -> RgbImage {
        let mut img = RgbImage::new(80, 60, [90, 90, 90]).unwrap();
        for y in 20..40 {
            for x in 30..50 {
                img.put_pixel(x, y, [200, 30, 30]);
            }
        }
        img
    }

    #[test]
    fn degenerate_init_is_rejected() {
        let net = tiny(Variant::TwoBranch);
        let b = AxisBox::new(10.0, 10.0, 11.0, 11.0).unwrap();
        assert!(matches!(
            TrackerState::init(&net, &frame(), &b, TrackOptions::default()),
            Err(Error::DegenerateBox(_))
        ));
        let outside = AxisBox::new(100.0, 100.0, 120.0, 120.0).unwrap();
        assert!(TrackerState::init(&net, &frame(), &outside, TrackOptions::default()).is_err());
    }

    #[test]
    fn fitted_keeps_size_and_pulls_the_centre_inside() {
        let net = tiny(Variant::TwoBranch);
        let b = AxisBox::new(30.0, 20.0, 50.0, 40.0).unwrap();
        let state = TrackerState::init(&net, &frame(), &b, TrackOptions::default()).unwrap();
        // wholly below the 80x60 frame: clamping would collapse it to zero height
        let below = AxisBox::new(20.0, 70.0, 46.0, 90.0).unwrap();
        assert_eq!(below.clamped(80.0, 60.0).height(), 0.0);
        let f = state.fitted(&below);
        assert_eq!((f.width(), f.height()), (26.0, 20.0));
        assert_eq!(f.center(), (33.0, 60.0));
        let sliver = AxisBox::new(10.0, 10.0, 10.5, 200.0).unwrap();
        let f = state.fitted(&sliver);
        assert_eq!((f.width(), f.height()), (MIN_TARGET_SIDE, 60.0));
        assert_eq!(state.fitted(&b), b);
    }

    #[test]
    fn init_is_deterministic_and_parameters_stay_fixed() {
        let net = tiny(Variant::ThreeBranch);
        let before = net.params().clone();
        let b = AxisBox::new(30.0, 20.0, 50.0, 40.0).unwrap();
        let mut a = TrackerState::init(&net, &frame(), &b, TrackOptions::default()).unwrap();
        let c = TrackerState::init(&net, &frame(), &b, TrackOptions::default()).unwrap();
        assert_eq!(a.exemplar(), c.exemplar());
        let r1 = a.track_frame(&frame()).unwrap();
        let mut c = c;
        let r2 = c.track_frame(&frame()).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(net.params(), &before);
    }

    #[test]
    fn peak_prefers_first_of_equal_scores() {
        let net = tiny(Variant::TwoBranch);
        let r = net.config().response_side;
        let mut s = Tensor::zeros(&[1, r, r]);
        s.data_mut()[r + 2] = 3.0;
        s.data_mut()[2 * r + 1] = 3.0;
        let p = find_peak(&net, &s, 0.0);
        assert_eq!((p.row, p.col, p.score), (1, 2, 3.0));
        let flat = find_peak(&net, &Tensor::zeros(&[1, r, r]), 0.0);
        assert_eq!((flat.row, flat.col), (0, 0));
        // a Hann window breaks the flat tie towards the centre
        let centred = find_peak(&net, &Tensor::zeros(&[1, r, r]), 0.5);
        assert_eq!((centred.row, centred.col), (r / 2, r / 2));
    }

    #[test]
    fn three_branch_peak_uses_anchor_margin() {
        let net = tiny(Variant::ThreeBranch);
        let cfg = net.config();
        let (k, r) = (cfg.anchors_per_cell, cfg.response_side);
        let mut s = Tensor::zeros(&[2 * k, r, r]);
        let n = 3 * r + 4;
        s.data_mut()[(k + 1) * r * r + n] = 2.0;
        s.data_mut()[r * r + n] = 0.5;
        let p = find_peak(&net, &s, 0.0);
        assert_eq!((p.row, p.col, p.anchor, p.score), (3, 4, Some(1), 1.5));
    }

    #[test]
    fn zero_logits_give_an_empty_mask() {
        let net = tiny(Variant::TwoBranch);
        let win = CropWindow::new(40.0, 30.0, 63.0, 63).unwrap();
        let side = net.config().refined_mask_side;
        let m = paste_mask(&net, &win, (2, 2), &Tensor::zeros(&[side, side]), 80, 60).unwrap();
        assert!(m.is_empty());
    }

    #[test]
    fn pasted_mask_stays_in_the_row_footprint() {
        let net = tiny(Variant::TwoBranch);
        let cfg = net.config();
        let (fw, fh) = (100, 80);
        let win = CropWindow::new(50.0, 40.0, 126.0, cfg.search_side).unwrap();
        let side = cfg.refined_mask_side;
        for rc in [(2, 2), (0, 4)] {
            let m = paste_mask(&net, &win, rc, &Tensor::full(&[side, side], 1.0), fw, fh).unwrap();
            let rw = cfg.row_window(rc.0, rc.1);
            let (x0, y0) = win.to_frame(rw.x_min, rw.y_min);
            let (x1, y1) = win.to_frame(rw.x_max, rw.y_max);
            let b = min_max_box(&m).unwrap();
            assert!(b.x_min >= x0.max(0.0).floor() && b.x_max <= x1.min(fw as f64).ceil());
            assert!(b.y_min >= y0.max(0.0).floor() && b.y_max <= y1.min(fh as f64).ceil());
        }
        // a footprint fully inside the frame is pasted whole, centred on the RoW
        let m = paste_mask(&net, &win, (2, 2), &Tensor::full(&[side, side], 1.0), fw, fh).unwrap();
        assert_eq!(min_max_box(&m).unwrap().center(), (50.0, 40.0));
        assert_eq!(m.count(), 62 * 62);
    }

    #[test]
    fn box_strategies() {
        let rect = BinaryMask::from_fn(30, 30, |r, c| (5..15).contains(&r) && (3..23).contains(&c)).unwrap();
        assert_eq!(
            generate_box(&rect, BoxStrategy::MinMax),
            Some(OutputBox::Axis(AxisBox::new(3.0, 5.0, 23.0, 15.0).unwrap()))
        );
        let diamond = BinaryMask::from_fn(41, 41, |r, c| (r as i32 - 20).abs() + (c as i32 - 20).abs() <= 12).unwrap();
        let Some(OutputBox::Rotated(b)) = generate_box(&diamond, BoxStrategy::Mbr) else {
            panic!("rotated box expected")
        };
        assert!((b.angle - core::f64::consts::FRAC_PI_4).abs() < 0.02);
        assert_eq!(generate_box(&BinaryMask::empty(5, 5).unwrap(), BoxStrategy::Opt), None);
        assert_eq!(
            OutputBox::Axis(AxisBox::new(1.0, 2.0, 3.0, 4.0).unwrap()).to_numbers(),
            vec![1.0, 2.0, 3.0, 4.0]
        );
    }

    #[test]
    fn empty_mask_falls_back_to_previous_box() {
        let net = tiny(Variant::TwoBranch);
        let b = AxisBox::new(30.0, 20.0, 50.0, 40.0).unwrap();
        let opts = TrackOptions {
            score_floor: Some(1e9),
            ..TrackOptions::default()
        };
        let mut t = TrackerState::init(&net, &frame(), &b, opts).unwrap();
        let r = t.track_frame(&frame()).unwrap();
        assert!(r.low_score && r.fallback && r.mask.is_empty());
        assert_eq!(r.output, OutputBox::Axis(b));
        assert_eq!(r.target, b);
    }
}
