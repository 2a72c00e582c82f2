//! Multi-object tracking and segmentation: each track runs a two-stage cascade
//! (box branch for a coarse location, then a re-centred crop for the mask), the
//! predictions are matched to detector masks by IoU with the Hungarian method, and
//! unmatched detections or tracks start or age trajectories.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::AnnotatedSequence;
use crate::error::{Error, Result};
use crate::geom::{hungarian, iou_axis, iou_mask, min_max_box, AffinityMatrix, Assignment, AxisBox, BinaryMask};
use crate::image::RgbImage;
use crate::model::{Network, Variant};
use crate::scalar::Scalar;
use crate::track::{TrackOptions, TrackerState};

#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    pub mask: BinaryMask,
    pub bbox: AxisBox,
    pub confidence: f64,
}

impl Detection {
    pub fn new(mask: BinaryMask, confidence: f64) -> Result<Self> {
        let bbox = min_max_box(&mask)?;
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::InvalidArgument(format!("detection confidence {confidence}")));
        }
        Ok(Self { mask, bbox, confidence })
    }
}

/// Source of per-frame detections. Implementations must be deterministic for a fixed
/// seed.
pub trait Detector {
    fn detect(&mut self, t: usize, frame: &RgbImage) -> Result<Vec<Detection>>;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorNoise {
    /// Probability that a visible object is missed.
    pub dropout: f64,
    /// Erosion radius applied to every ground-truth mask, pixels.
    pub erosion: usize,
}

/// Ground-truth masks as detections, optionally degraded.
pub struct OracleDetector<'d> {
    sequence: &'d AnnotatedSequence,
    noise: DetectorNoise,
    rng: ChaCha8Rng,
}

impl<'d> OracleDetector<'d> {
    pub fn new(sequence: &'d AnnotatedSequence, noise: DetectorNoise, seed: u64) -> Self {
        Self {
            sequence,
            noise,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Detector for OracleDetector<'_> {
    fn detect(&mut self, t: usize, _frame: &RgbImage) -> Result<Vec<Detection>> {
        let mut out = Vec::new();
        for obj in &self.sequence.objects {
            let Some(gt) = obj.masks.get(t) else {
                return Err(Error::InvalidArgument(format!("frame {t} beyond sequence end")));
            };
            // one draw per object keeps the stream aligned regardless of outcomes
            let drop = self.rng.random::<f64>() < self.noise.dropout;
            if gt.is_empty() || drop {
                continue;
            }
            let mask = gt.eroded(self.noise.erosion);
            if !mask.is_empty() {
                out.push(Detection::new(mask, 1.0)?);
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AffinityKind {
    Mask,
    Box,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotConfig {
    /// Smallest confidence for an unmatched detection to start a track.
    pub spawn_threshold: f64,
    /// Consecutive unmatched frames after which a track is dropped.
    pub max_lost: usize,
    /// Smallest affinity accepted as a match.
    pub min_affinity: f64,
    /// Stage-one logit below which the cascade yields an empty mask; `None` never gates.
    pub score_floor: Option<f64>,
    pub affinity: AffinityKind,
    pub track: TrackOptions,
}

impl Default for MotConfig {
    fn default() -> Self {
        Self {
            spawn_threshold: 0.5,
            max_lost: 10,
            min_affinity: 0.1,
            score_floor: None,
            affinity: AffinityKind::Mask,
            track: TrackOptions::default(),
        }
    }
}

impl MotConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.spawn_threshold)
            && (0.0..=1.0).contains(&self.min_affinity)
            && self.score_floor.is_none_or(f64::is_finite)
            && self.max_lost > 0;
        if !ok {
            return Err(Error::Config(format!("invalid mot settings {self:?}")));
        }
        self.track.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CascadeOutput {
    /// Stage-two mask in frame coordinates.
    pub mask: BinaryMask,
    /// Stage-one box from the box branch.
    pub stage1_box: Option<AxisBox>,
    pub score: f64,
    pub low_score: bool,
}

/// Two-stage prediction for one tracker: the box branch's best box locates the
/// object, then a crop centred on that box is segmented at its own best RoW.
pub fn cascade_predict<T: Scalar>(
    state: &TrackerState<'_, T>,
    frame: &RgbImage,
    score_floor: Option<f64>,
) -> Result<CascadeOutput> {
    let net = state.network();
    let anchors = state
        .anchors()
        .ok_or_else(|| Error::Config("the cascade needs the three-branch variant".into()))?;
    let (w, h) = (frame.width(), frame.height());
    let first = state.search_at(frame, state.target())?;
    let score = first.peak.score;
    let decoded = first.decoded_box(net, anchors);
    let stage1_box = decoded.map(|b| b.clamped(w as f64, h as f64));
    let low_score = score_floor.is_some_and(|f| score < f);
    // Clamping can collapse a box that strays past the border; the re-crop keeps its size.
    let (Some(b), false) = (decoded.map(|b| state.fitted(&b)), low_score) else {
        return Ok(CascadeOutput {
            mask: BinaryMask::empty(h, w)?,
            stage1_box,
            score,
            low_score,
        });
    };
    let second = state.search_at(frame, &b)?;
    Ok(CascadeOutput {
        mask: second.segment(net, state.options().refined, w, h)?,
        stage1_box,
        score,
        low_score: false,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackStatus {
    Active,
    Lost,
}

pub struct Track<'n, T: Scalar> {
    pub id: u32,
    pub state: TrackerState<'n, T>,
    pub mask: BinaryMask,
    pub bbox: AxisBox,
    pub status: TrackStatus,
    pub lost_age: usize,
}

/// What one association step did.
#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    /// Rows are detections, columns the tracks alive before the step.
    pub affinity: AffinityMatrix,
    pub assignment: Assignment,
    /// Accepted `(detection, track id)` matches.
    pub matches: Vec<(usize, u32)>,
    pub spawned: Vec<u32>,
    pub removed: Vec<u32>,
    /// Cascade output per pre-step track, in column order.
    pub predictions: Vec<(u32, CascadeOutput)>,
}

/// Per-frame output of one live track.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackOutput {
    pub id: u32,
    pub status: TrackStatus,
    /// The matched detection's mask; empty while lost.
    pub mask: BinaryMask,
}

pub struct MultiTracker<'n, T: Scalar> {
    net: &'n Network<T>,
    cfg: MotConfig,
    tracks: Vec<Track<'n, T>>,
    next_id: u32,
}

impl<'n, T: Scalar> MultiTracker<'n, T> {
    pub fn new(net: &'n Network<T>, cfg: MotConfig) -> Result<Self> {
        cfg.validate()?;
        if net.config().variant != Variant::ThreeBranch {
            return Err(Error::Config(
                "multi-object tracking needs the three-branch variant".into(),
            ));
        }
        Ok(Self {
            net,
            cfg,
            tracks: Vec::new(),
            next_id: 1,
        })
    }

    pub fn tracks(&self) -> &[Track<'n, T>] {
        &self.tracks
    }

    pub fn outputs(&self) -> Vec<TrackOutput> {
        self.tracks
            .iter()
            .map(|t| TrackOutput {
                id: t.id,
                status: t.status,
                mask: match t.status {
                    TrackStatus::Active => t.mask.clone(),
                    TrackStatus::Lost => BinaryMask::empty(t.mask.height(), t.mask.width()).expect("positive dims"),
                },
            })
            .collect()
    }

    fn affinity(&self, det: &Detection, pred: &CascadeOutput) -> Result<f64> {
        match self.cfg.affinity {
            AffinityKind::Mask => iou_mask(&det.mask, &pred.mask),
            AffinityKind::Box => Ok(min_max_box(&pred.mask).map_or(0.0, |b| iou_axis(&det.bbox, &b))),
        }
    }

    pub fn step(&mut self, frame: &RgbImage, detections: &[Detection]) -> Result<StepReport> {
        let mut predictions = Vec::with_capacity(self.tracks.len());
        for t in &self.tracks {
            predictions.push((t.id, cascade_predict(&t.state, frame, self.cfg.score_floor)?));
        }
        let mut values = Vec::with_capacity(detections.len() * predictions.len());
        for d in detections {
            for (_, p) in &predictions {
                values.push(self.affinity(d, p)?);
            }
        }
        let affinity = AffinityMatrix::new(detections.len(), predictions.len(), values)?;
        let assignment = hungarian(&affinity);

        let mut det_used = alloc::vec![false; detections.len()];
        let mut track_hit = alloc::vec![false; self.tracks.len()];
        let mut matches = Vec::new();
        for &(i, j) in &assignment.pairs {
            if affinity.get(i, j) < self.cfg.min_affinity {
                continue;
            }
            det_used[i] = true;
            track_hit[j] = true;
            let d = &detections[i];
            let t = &mut self.tracks[j];
            t.mask = d.mask.clone();
            t.bbox = d.bbox;
            t.status = TrackStatus::Active;
            t.lost_age = 0;
            t.state.set_target(&d.bbox);
            matches.push((i, t.id));
        }

        let mut removed = Vec::new();
        let max_lost = self.cfg.max_lost;
        let mut j = 0;
        self.tracks.retain_mut(|t| {
            let hit = track_hit[j];
            j += 1;
            if hit {
                return true;
            }
            t.status = TrackStatus::Lost;
            t.lost_age += 1;
            if t.lost_age >= max_lost {
                removed.push(t.id);
                false
            } else {
                true
            }
        });

        let mut spawned = Vec::new();
        for (i, d) in detections.iter().enumerate() {
            if det_used[i] || d.confidence < self.cfg.spawn_threshold {
                continue;
            }
            // detections too small to initialise a tracker are ignored
            let Ok(state) = TrackerState::init(self.net, frame, &d.bbox, self.cfg.track.clone()) else {
                continue;
            };
            let id = self.next_id;
            self.next_id += 1;
            self.tracks.push(Track {
                id,
                state,
                mask: d.mask.clone(),
                bbox: d.bbox,
                status: TrackStatus::Active,
                lost_age: 0,
            });
            spawned.push(id);
        }
        Ok(StepReport {
            affinity,
            assignment,
            matches,
            spawned,
            removed,
            predictions,
        })
    }
}
