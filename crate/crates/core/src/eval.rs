//! Evaluation: region (J) and contour (F) statistics with mean, recall and decay,
//! box success rates, the reset protocol, representation oracles and identity
//! switches.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::data::AnnotatedSequence;
use crate::error::{Error, Result};
use crate::geom::{iou_axis, iou_mask, iou_rotated, mbr, min_max_box, AxisBox, BinaryMask, RotatedBox};
use crate::image::RgbImage;
use crate::track::OutputBox;

/// Version tag written into every report.
pub const REPORT_VERSION: u32 = 1;

/// Mean, recall (fraction of frames above 0.5) and decay (first-quartile mean minus
/// last-quartile mean) of a per-frame measure.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SeriesStats {
    pub mean: f64,
    pub recall: f64,
    pub decay: f64,
}

/// Mean taken relative to the first element, so constant runs average exactly.
fn mean(v: &[f64]) -> f64 {
    match v.first() {
        None => 0.0,
        Some(&v0) => v0 + v.iter().map(|x| x - v0).sum::<f64>() / v.len() as f64,
    }
}

/// Splits `n` items into 4 nearly equal consecutive parts, the first `n % 4` parts
/// one longer.
fn quartiles(n: usize) -> [core::ops::Range<usize>; 4] {
    let (q, r) = (n / 4, n % 4);
    let mut start = 0;
    core::array::from_fn(|i| {
        let len = q + usize::from(i < r);
        let range = start..start + len;
        start += len;
        range
    })
}

pub fn series_stats(values: &[f64]) -> Result<SeriesStats> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("statistics of an empty sequence".into()));
    }
    let q = quartiles(values.len());
    let decay = if values.len() >= 4 {
        mean(&values[q[0].clone()]) - mean(&values[q[3].clone()])
    } else {
        0.0
    };
    Ok(SeriesStats {
        mean: mean(values),
        recall: values.iter().filter(|&&v| v > 0.5).count() as f64 / values.len() as f64,
        decay,
    })
}

/// J statistics from per-frame predicted and ground-truth masks.
pub fn jaccard_stats(pred: &[BinaryMask], gt: &[BinaryMask]) -> Result<SeriesStats> {
    series_stats(&per_frame(pred, gt, iou_mask)?)
}

/// F statistics from per-frame predicted and ground-truth masks.
pub fn contour_stats(pred: &[BinaryMask], gt: &[BinaryMask]) -> Result<SeriesStats> {
    series_stats(&per_frame(pred, gt, contour_fmeasure)?)
}

fn per_frame(
    pred: &[BinaryMask],
    gt: &[BinaryMask],
    f: impl Fn(&BinaryMask, &BinaryMask) -> Result<f64>,
) -> Result<Vec<f64>> {
    if pred.len() != gt.len() {
        return Err(Error::InvalidArgument(alloc::format!(
            "{} predicted frames for {} ground-truth frames",
            pred.len(),
            gt.len()
        )));
    }
    pred.iter().zip(gt).map(|(p, g)| f(p, g)).collect()
}

/// Boundary matching tolerance: 0.8% of the image diagonal, rounded up, at least 1.
pub fn contour_tolerance(height: usize, width: usize) -> usize {
    let diag = ((height * height + width * width) as f64).sqrt();
    ((0.008 * diag).ceil() as usize).max(1)
}

/// Boundary F-measure: a boundary pixel counts as matched when the other mask's
/// boundary lies within the tolerance disk around it.
pub fn contour_fmeasure(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    pred.check_same_dims(gt)?;
    let (pb, gb) = (pred.boundary(), gt.boundary());
    let (np, ng) = (pb.count(), gb.count());
    if np == 0 && ng == 0 {
        return Ok(1.0);
    }
    if np == 0 || ng == 0 {
        return Ok(0.0);
    }
    let theta = contour_tolerance(pred.height(), pred.width());
    let precision = pb.overlap_counts(&gb.dilated_disk(theta))?.0 as f64 / np as f64;
    let recall = gb.overlap_counts(&pb.dilated_disk(theta))?.0 as f64 / ng as f64;
    Ok(if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    })
}

/// Overlap of two boxes. Any pair is compared exactly as rotated rectangles, so axis
/// boxes against rotated ones need no rasterisation.
pub fn box_iou(a: &OutputBox, b: &OutputBox) -> f64 {
    match (a, b) {
        (OutputBox::Axis(x), OutputBox::Axis(y)) => iou_axis(x, y),
        _ => match (a.as_rotated(), b.as_rotated()) {
            (Some(x), Some(y)) => iou_rotated(&x, &y),
            _ => 0.0,
        },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRate {
    pub threshold: f64,
    pub rate: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SuccessStats {
    pub miou: f64,
    pub success: Vec<ThresholdRate>,
}

/// Mean IoU and the fraction of frames at or above each threshold, both averaged over
/// sequences. Each inner slice holds one sequence's per-frame IoU.
pub fn success_map(sequences: &[Vec<f64>], thresholds: &[f64]) -> Result<SuccessStats> {
    if sequences.is_empty() || sequences.iter().any(|s| s.is_empty()) {
        return Err(Error::InvalidArgument("success rates need nonempty sequences".into()));
    }
    let n = sequences.len() as f64;
    Ok(SuccessStats {
        miou: sequences.iter().map(|s| mean(s)).sum::<f64>() / n,
        success: thresholds
            .iter()
            .map(|&t| ThresholdRate {
                threshold: t,
                rate: sequences
                    .iter()
                    .map(|s| s.iter().filter(|&&v| v >= t).count() as f64 / s.len() as f64)
                    .sum::<f64>()
                    / n,
            })
            .collect(),
    })
}

/// A tracker driven by the reset protocol.
pub trait OnlineTracker {
    fn start(&mut self, frame: &RgbImage, init: &AxisBox) -> Result<()>;
    fn step(&mut self, frame: &RgbImage) -> Result<BinaryMask>;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResetProtocol {
    /// Frames between a failure and the re-initialisation.
    pub reinit_gap: usize,
    /// Frames after every initialisation excluded from accuracy.
    pub burn_in: usize,
}

impl Default for ResetProtocol {
    fn default() -> Self {
        Self {
            reinit_gap: 5,
            burn_in: 10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "overlap")]
pub enum FrameOutcome {
    /// Tracker (re)initialised from ground truth on this frame.
    Init,
    /// Not tracked: waiting to re-initialise, or the object is absent.
    Skipped,
    Failure,
    BurnIn(f64),
    Counted(f64),
}

impl FrameOutcome {
    /// Overlap of a tracked frame.
    pub fn overlap(&self) -> Option<f64> {
        match self {
            FrameOutcome::Failure => Some(0.0),
            FrameOutcome::BurnIn(v) | FrameOutcome::Counted(v) => Some(*v),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResetReport {
    /// Mean overlap over counted frames; 0 when there are none.
    pub accuracy: f64,
    pub failures: usize,
    pub frames: Vec<FrameOutcome>,
}

impl ResetReport {
    /// Pools several runs: failures add up, accuracy averages all counted frames.
    pub fn pooled(reports: &[ResetReport]) -> (f64, usize) {
        let counted: Vec<f64> = reports
            .iter()
            .flat_map(|r| &r.frames)
            .filter_map(|f| match f {
                FrameOutcome::Counted(v) => Some(*v),
                _ => None,
            })
            .collect();
        (mean(&counted), reports.iter().map(|r| r.failures).sum())
    }

    /// Mean overlap over every tracked frame (burn-in included).
    pub fn mean_overlap(&self) -> f64 {
        let v: Vec<f64> = self.frames.iter().filter_map(FrameOutcome::overlap).collect();
        mean(&v)
    }
}

/// Runs `tracker` over one object of a sequence. A tracked frame with zero mask
/// overlap is a failure; the tracker restarts from the ground-truth box
/// `reinit_gap` frames later (or at the next frame the object is visible).
pub fn accuracy_robustness<Tr: OnlineTracker>(
    tracker: &mut Tr,
    seq: &AnnotatedSequence,
    object: usize,
    protocol: ResetProtocol,
) -> Result<ResetReport> {
    let obj = seq
        .objects
        .get(object)
        .ok_or_else(|| Error::InvalidArgument(alloc::format!("object index {object} out of range")))?;
    let mut frames = Vec::with_capacity(seq.len());
    let mut failures = 0;
    // None while tracking; Some(t) while waiting to restart at frame t
    let mut restart_at = Some(0);
    let mut burn = 0;
    for t in 0..seq.len() {
        let gt = &obj.masks[t];
        if let Some(at) = restart_at {
            if t >= at && !gt.is_empty() {
                tracker.start(&seq.frames[t], &min_max_box(gt)?)?;
                restart_at = None;
                burn = protocol.burn_in;
                frames.push(FrameOutcome::Init);
            } else {
                frames.push(FrameOutcome::Skipped);
            }
            continue;
        }
        let pred = tracker.step(&seq.frames[t])?;
        if gt.is_empty() {
            frames.push(FrameOutcome::Skipped);
            continue;
        }
        let overlap = iou_mask(&pred, gt)?;
        if overlap == 0.0 {
            failures += 1;
            restart_at = Some(t + protocol.reinit_gap);
            frames.push(FrameOutcome::Failure);
        } else if burn > 0 {
            burn -= 1;
            frames.push(FrameOutcome::BurnIn(overlap));
        } else {
            frames.push(FrameOutcome::Counted(overlap));
        }
    }
    let counted: Vec<f64> = frames
        .iter()
        .filter_map(|f| match f {
            FrameOutcome::Counted(v) => Some(*v),
            _ => None,
        })
        .collect();
    Ok(ResetReport {
        accuracy: mean(&counted),
        failures,
        frames,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub fixed_aspect: SuccessStats,
    pub min_max: SuccessStats,
    pub mbr: SuccessStats,
}

/// Scores three ground-truth-fed box representations against the rotated
/// ground-truth boxes:
/// - fixed aspect: axis box with the true centre and area but the aspect ratio of the
///   first frame's enclosing axis box;
/// - Min-max: the axis box enclosing the rotated ground truth;
/// - MBR: the minimum-area rotated rectangle of the ground-truth mask.
pub fn representation_oracles(sequences: &[AnnotatedSequence], thresholds: &[f64]) -> Result<OracleReport> {
    let mut fixed = Vec::new();
    let mut minmax = Vec::new();
    let mut rect = Vec::new();
    for seq in sequences {
        for obj in &seq.objects {
            let mut aspect = None;
            let (mut f, mut m, mut r) = (Vec::new(), Vec::new(), Vec::new());
            for (gt, mask) in obj.rotated.iter().zip(&obj.masks) {
                let (Some(gt), false) = (gt, mask.is_empty()) else {
                    continue;
                };
                let enclosing = gt.enclosing_axis();
                let a = *aspect.get_or_insert(enclosing.width() / enclosing.height());
                let area = gt.area();
                let (w, h) = ((area * a).sqrt(), (area / a).sqrt());
                let fixed_box = RotatedBox::new(gt.cx, gt.cy, w, h, 0.0)?;
                f.push(iou_rotated(&fixed_box, gt));
                m.push(iou_rotated(&enclosing.to_rotated().expect("positive size"), gt));
                r.push(iou_rotated(&mbr(mask)?, gt));
            }
            if !f.is_empty() {
                fixed.push(f);
                minmax.push(m);
                rect.push(r);
            }
        }
    }
    Ok(OracleReport {
        fixed_aspect: success_map(&fixed, thresholds)?,
        min_max: success_map(&minmax, thresholds)?,
        mbr: success_map(&rect, thresholds)?,
    })
}

/// Identity switches between ground-truth objects and track ids. Per frame each
/// object is matched to the track whose mask overlaps it best with IoU above 0.5; a
/// switch is counted whenever an object's matched id differs from its previous one.
/// `gt[o][t]` is object `o` at frame `t`; `tracks[t]` lists `(id, mask)` pairs.
pub fn id_switches(gt: &[Vec<BinaryMask>], tracks: &[Vec<(u32, BinaryMask)>]) -> Result<usize> {
    let mut last: Vec<Option<u32>> = vec![None; gt.len()];
    let mut switches = 0;
    for (t, live) in tracks.iter().enumerate() {
        for (o, frames) in gt.iter().enumerate() {
            let Some(g) = frames.get(t) else { continue };
            let mut best: Option<(f64, u32)> = None;
            for (id, m) in live {
                let v = iou_mask(g, m)?;
                if v > 0.5 && best.is_none_or(|(b, _)| v > b) {
                    best = Some((v, *id));
                }
            }
            if let Some((_, id)) = best {
                if last[o].is_some_and(|prev| prev != id) {
                    switches += 1;
                }
                last[o] = Some(id);
            }
        }
    }
    Ok(switches)
}

/// One tracked object: predictions and ground truth per frame.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceResult {
    pub name: String,
    pub object: u32,
    pub class_tag: u32,
    /// Seen/unseen category split membership, when the dataset defines one.
    pub seen: Option<bool>,
    pub pred_masks: Vec<BinaryMask>,
    pub pred_boxes: Vec<Option<OutputBox>>,
    pub gt_masks: Vec<BinaryMask>,
    /// Rotated ground truth where available; the mask's axis box otherwise.
    pub gt_boxes: Vec<Option<OutputBox>>,
}

impl SequenceResult {
    pub fn validate(&self) -> Result<()> {
        let n = self.gt_masks.len();
        if n == 0
            || [self.pred_masks.len(), self.pred_boxes.len(), self.gt_boxes.len()]
                .iter()
                .any(|&l| l != n)
        {
            return Err(Error::InvalidArgument(alloc::format!(
                "{}/{}: per-frame lists must be nonempty and of equal length",
                self.name,
                self.object
            )));
        }
        Ok(())
    }

    pub fn box_ious(&self) -> Vec<f64> {
        self.pred_boxes
            .iter()
            .zip(&self.gt_boxes)
            .map(|(p, g)| match (p, g) {
                (Some(p), Some(g)) => box_iou(p, g),
                _ => 0.0,
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceMetrics {
    pub name: String,
    pub object: u32,
    pub class_tag: u32,
    pub seen: Option<bool>,
    pub j: SeriesStats,
    pub f: SeriesStats,
    pub miou: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub j_mean: f64,
    pub f_mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub version: u32,
    pub boxes: SuccessStats,
    pub j: SeriesStats,
    pub f: SeriesStats,
    pub seen: Option<SplitMetrics>,
    pub unseen: Option<SplitMetrics>,
    /// Mean of seen and unseen J and F means, when both splits are present.
    pub overall: Option<f64>,
    pub accuracy: Option<f64>,
    pub robustness: Option<usize>,
    pub sequences: Vec<SequenceMetrics>,
}

fn average_stats(s: &[SeriesStats]) -> SeriesStats {
    let n = s.len().max(1) as f64;
    SeriesStats {
        mean: s.iter().map(|x| x.mean).sum::<f64>() / n,
        recall: s.iter().map(|x| x.recall).sum::<f64>() / n,
        decay: s.iter().map(|x| x.decay).sum::<f64>() / n,
    }
}

/// Aggregates per-object results; J, F and box rates average over objects, and the
/// seen and unseen splits are averaged separately.
pub fn evaluate(results: &[SequenceResult], thresholds: &[f64]) -> Result<MetricsReport> {
    if results.is_empty() {
        return Err(Error::InvalidArgument("nothing to evaluate".into()));
    }
    let mut per = Vec::with_capacity(results.len());
    let mut box_series = Vec::with_capacity(results.len());
    for r in results {
        r.validate()?;
        let ious = r.box_ious();
        per.push(SequenceMetrics {
            name: r.name.clone(),
            object: r.object,
            class_tag: r.class_tag,
            seen: r.seen,
            j: jaccard_stats(&r.pred_masks, &r.gt_masks)?,
            f: contour_stats(&r.pred_masks, &r.gt_masks)?,
            miou: mean(&ious),
        });
        box_series.push(ious);
    }
    let split = |seen: bool| -> Option<SplitMetrics> {
        let part: Vec<&SequenceMetrics> = per.iter().filter(|m| m.seen == Some(seen)).collect();
        (!part.is_empty()).then(|| SplitMetrics {
            j_mean: part.iter().map(|m| m.j.mean).sum::<f64>() / part.len() as f64,
            f_mean: part.iter().map(|m| m.f.mean).sum::<f64>() / part.len() as f64,
        })
    };
    let (seen, unseen) = (split(true), split(false));
    let overall = match (seen, unseen) {
        (Some(s), Some(u)) => Some(overall_score(s.j_mean, u.j_mean, s.f_mean, u.f_mean)),
        _ => None,
    };
    Ok(MetricsReport {
        version: REPORT_VERSION,
        boxes: success_map(&box_series, thresholds)?,
        j: average_stats(&per.iter().map(|m| m.j).collect::<Vec<_>>()),
        f: average_stats(&per.iter().map(|m| m.f).collect::<Vec<_>>()),
        seen,
        unseen,
        overall,
        accuracy: None,
        robustness: None,
        sequences: per,
    })
}

/// The overall score over seen and unseen categories: the mean of the four measures.
pub fn overall_score(j_seen: f64, j_unseen: f64, f_seen: f64, f_unseen: f64) -> f64 {
    (j_seen + j_unseen + f_seen + f_unseen) / 4.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, ObjectSpec, SceneSpec, Shape};

    fn block(r0: usize, c0: usize, side: usize) -> BinaryMask {
        BinaryMask::from_fn(100, 100, |r, c| {
            (r0..r0 + side).contains(&r) && (c0..c0 + side).contains(&c)
        })
        .unwrap()
    }

    #[test]
    fn series_statistics() {
        let s = series_stats(&[0.8; 37]).unwrap();
        assert_eq!((s.mean, s.recall, s.decay), (0.8, 1.0, 0.0));
        let ramp: Vec<f64> = (0..100).map(|t| 1.0 - t as f64 / 100.0).collect();
        // first 25 frames average 0.88, last 25 average 0.13
        assert!((series_stats(&ramp).unwrap().decay - 0.75).abs() < 1e-9);
        assert!(series_stats(&[]).is_err());
        assert_eq!(quartiles(10).map(|r| r.len()), [3, 3, 2, 2]);
    }

    #[test]
    fn empty_predictions_score_zero() {
        let gt = vec![block(10, 10, 20); 8];
        let pred = vec![BinaryMask::empty(100, 100).unwrap(); 8];
        let s = jaccard_stats(&pred, &gt).unwrap();
        assert_eq!((s.mean, s.recall, s.decay), (0.0, 0.0, 0.0));
    }

    #[test]
    fn contour_measure_cases() {
        let a = block(30, 30, 20);
        assert_eq!(contour_fmeasure(&a, &a).unwrap(), 1.0);
        assert_eq!(contour_fmeasure(&a, &block(80, 80, 10)).unwrap(), 0.0);
        assert_eq!(contour_tolerance(100, 100), 2);
        let grown = a.dilated_disk(1);
        assert_eq!(contour_fmeasure(&a, &grown).unwrap(), 1.0);
        let b = block(34, 30, 20);
        assert_eq!(contour_fmeasure(&a, &b).unwrap(), contour_fmeasure(&b, &a).unwrap());
        assert!(contour_fmeasure(&a, &BinaryMask::empty(50, 50).unwrap()).is_err());
    }

    #[test]
    fn success_rates() {
        let s = success_map(&[vec![0.9; 10]], &[0.5, 0.7]).unwrap();
        assert_eq!(s.success.iter().map(|r| r.rate).collect::<Vec<_>>(), [1.0, 1.0]);
        let half: Vec<f64> = (0..10).map(|i| if i < 5 { 0.6 } else { 0.3 }).collect();
        let s = success_map(&[half], &[0.5, 0.7, 0.0]).unwrap();
        assert_eq!(s.success.iter().map(|r| r.rate).collect::<Vec<_>>(), [0.5, 0.0, 1.0]);
    }

    struct Oracle<'s> {
        seq: &'s AnnotatedSequence,
        t: usize,
        empty: bool,
    }

    impl OnlineTracker for Oracle<'_> {
        fn start(&mut self, frame: &RgbImage, _init: &AxisBox) -> Result<()> {
            self.t = self.seq.frames.iter().position(|f| f == frame).unwrap();
            Ok(())
        }
        fn step(&mut self, _frame: &RgbImage) -> Result<BinaryMask> {
            self.t += 1;
            let m = &self.seq.objects[0].masks[self.t];
            Ok(if self.empty {
                BinaryMask::empty(m.height(), m.width())?
            } else {
                m.clone()
            })
        }
    }

    #[test]
    fn reset_protocol_extremes() {
        let seq = generate(&SceneSpec::single_object("r", 3, 64, 30)).unwrap();
        let mut perfect = Oracle {
            seq: &seq,
            t: 0,
            empty: false,
        };
        let r = accuracy_robustness(&mut perfect, &seq, 0, ResetProtocol::default()).unwrap();
        assert_eq!((r.accuracy, r.failures), (1.0, 0));
        let mut blind = Oracle {
            seq: &seq,
            t: 0,
            empty: true,
        };
        let r = accuracy_robustness(&mut blind, &seq, 0, ResetProtocol::default()).unwrap();
        // init at 0, fail at 1, restart at 6, fail at 7, ... restart at 24, fail at 25
        assert_eq!((r.accuracy, r.failures), (0.0, 5));
        assert_eq!(r.frames[6], FrameOutcome::Init);
        assert_eq!(
            r,
            accuracy_robustness(&mut blind, &seq, 0, ResetProtocol::default()).unwrap()
        );
    }

    #[test]
    fn oracles_on_axis_aligned_objects_are_exact() {
        let spec = SceneSpec {
            name: "still".into(),
            width: 80,
            height: 80,
            frames: 6,
            background: [100; 3],
            noise: 0.0,
            objects: vec![ObjectSpec {
                shape: Shape::Rectangle,
                size: (30.0, 12.0),
                start: (40.0, 40.0),
                velocity: (1.0, 1.0),
                angle: 0.0,
                rotation_rate: 0.0,
                color: [250, 0, 0],
                texture: 0.0,
                bounds: None,
            }],
            seed: 0,
        };
        let r = representation_oracles(&[generate(&spec).unwrap()], &[0.5]).unwrap();
        assert!((r.min_max.miou - 1.0).abs() < 1e-9);
        assert!((r.mbr.miou - 1.0).abs() < 1e-9);
        assert!((r.fixed_aspect.miou - 1.0).abs() < 1e-9);
    }

    #[test]
    fn switches_are_counted_per_object() {
        let a = block(10, 10, 20);
        let b = block(60, 60, 20);
        let gt = vec![vec![a.clone(); 3], vec![b.clone(); 3]];
        let stable = vec![vec![(1, a.clone()), (2, b.clone())]; 3];
        assert_eq!(id_switches(&gt, &stable).unwrap(), 0);
        let swapped = vec![
            vec![(1, a.clone()), (2, b.clone())],
            vec![(2, a.clone()), (1, b.clone())],
            vec![(2, a.clone()), (1, b.clone())],
        ];
        assert_eq!(id_switches(&gt, &swapped).unwrap(), 2);
    }

    #[test]
    fn report_against_itself() {
        let seq = generate(&SceneSpec::single_object("g", 9, 64, 6)).unwrap();
        let obj = &seq.objects[0];
        let boxes: Vec<Option<OutputBox>> = obj.rotated.iter().map(|r| r.map(OutputBox::Rotated)).collect();
        let res = SequenceResult {
            name: seq.name.clone(),
            object: obj.id,
            class_tag: obj.class_tag,
            seen: Some(true),
            pred_masks: obj.masks.clone(),
            pred_boxes: boxes.clone(),
            gt_masks: obj.masks.clone(),
            gt_boxes: boxes,
        };
        let rep = evaluate(&[res.clone(), res.clone()], &[0.5, 0.7]).unwrap();
        assert!((rep.boxes.miou - 1.0).abs() < 1e-9);
        assert_eq!((rep.j.mean, rep.f.mean), (1.0, 1.0));
        assert!(rep.seen.is_some() && rep.unseen.is_none() && rep.overall.is_none());
        let unseen = SequenceResult {
            seen: Some(false),
            ..res.clone()
        };
        let rep = evaluate(&[res, unseen], &[0.5]).unwrap();
        assert_eq!(rep.overall, Some(1.0));
        assert!((overall_score(0.5, 0.7, 0.6, 0.2) - 0.5).abs() < 1e-15);
    }
}
