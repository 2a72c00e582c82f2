//! The work behind each command. Every function writes only under its output
//! directory and is deterministic for a given config and inputs.

use std::fs;
use std::path::Path;

use masktrack_core::data::AnnotatedSequence;
use masktrack_core::eval::{
    accuracy_robustness, evaluate, id_switches, representation_oracles, MetricsReport, OracleReport, ResetReport,
    SequenceResult,
};
use masktrack_core::geom::{min_max_box, AxisBox, BinaryMask};
use masktrack_core::model::Network;
use masktrack_core::mot::{Detector, MultiTracker, OracleDetector, TrackStatus};
use masktrack_core::synth::{generate, SceneSpec};
use masktrack_core::track::{OnlineSiamTracker, OutputBox, TrackerState};
use masktrack_core::train::{train, SequenceSampler, StepRecord};
use serde::{Deserialize, Serialize};

use crate::checkpoint;
use crate::config::{RunConfig, SceneKind};
use crate::dataset::{write_dataset, write_json, Dataset, DatasetManifest};
use crate::error::{Error, Result};
use crate::imageio;
use crate::results::{mot_log_path, mot_mask_path, ObjectStream, ResultKind, ResultSequence, ResultsManifest};

/// Inference and training run in single precision.
pub type Net = Network<f32>;

fn create_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(Error::io(p))
}

/// Scene spec for the `i`-th generated sequence.
pub fn scene_spec(cfg: &RunConfig, i: usize) -> SceneSpec {
    let d = &cfg.data;
    let seed = cfg.seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
    match d.kind {
        SceneKind::Single => SceneSpec::single_object(&format!("single-{i:03}"), seed, d.size, d.frames),
        SceneKind::Rotating => SceneSpec::rotating_object(&format!("rotating-{i:03}"), seed, d.size, d.frames),
        SceneKind::Separated => {
            SceneSpec::separated_objects(&format!("separated-{i:03}"), seed, d.objects, d.size, d.size, d.frames)
        }
    }
}

pub fn gen_data(cfg: &RunConfig, out: &Path) -> Result<DatasetManifest> {
    let mut seqs = Vec::with_capacity(cfg.data.sequences);
    for i in 0..cfg.data.sequences {
        let seq = generate(&scene_spec(cfg, i))?;
        let seen = !seq.objects.iter().any(|o| cfg.data.unseen_tags.contains(&o.class_tag));
        seqs.push((seq, seen));
    }
    write_dataset(out, &seqs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub steps: usize,
    pub epochs: usize,
    pub final_loss: f64,
    pub checkpoint: String,
}

/// Trains from scratch; writes `checkpoints/epoch-NNN.ckpt`, `model.ckpt` and `loss.csv`.
pub fn train_run(cfg: &RunConfig, data: &Dataset, out: &Path) -> Result<TrainSummary> {
    let seqs = data.load_all()?;
    let hash = cfg.hash();
    let ckpts = out.join("checkpoints");
    create_dir(&ckpts)?;
    let mut net = Net::new(cfg.model.clone(), cfg.seed)?;
    let mut sampler = SequenceSampler::new(&seqs)?;
    let mut save_err = None;
    let history = train(&mut net, &mut sampler, &cfg.train, |epoch, net, _| {
        let p = ckpts.join(format!("epoch-{epoch:03}.ckpt"));
        checkpoint::save(&p, net, &hash).map_err(|e| {
            let msg = e.to_string();
            save_err = Some(e);
            masktrack_core::Error::InvalidArgument(msg)
        })
    });
    let history = match (history, save_err) {
        (_, Some(e)) => return Err(e),
        (h, None) => h?,
    };
    let model_path = out.join("model.ckpt");
    checkpoint::save(&model_path, &net, &hash)?;
    write_loss_log(&out.join("loss.csv"), &history)?;
    Ok(TrainSummary {
        steps: history.len(),
        epochs: cfg.train.schedule.epochs(),
        final_loss: history.last().map_or(f64::NAN, |r| r.loss),
        checkpoint: model_path.display().to_string(),
    })
}

fn write_loss_log(path: &Path, history: &[StepRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e))?;
    w.write_record([
        "step",
        "epoch",
        "lr",
        "loss",
        "mask",
        "sim",
        "score",
        "reg",
        "grad_norm",
    ])
    .map_err(|e| Error::format(path, e))?;
    for r in history {
        let p = &r.parts;
        w.write_record([
            r.step.to_string(),
            r.epoch.to_string(),
            r.lr.to_string(),
            r.loss.to_string(),
            p.mask.to_string(),
            p.sim.to_string(),
            p.score.to_string(),
            p.reg.to_string(),
            r.grad_norm.to_string(),
        ])
        .map_err(|e| Error::format(path, e))?;
    }
    w.flush().map_err(Error::io(path))
}

/// First frame on which object `o` is visible, with its box.
fn first_visible(seq: &AnnotatedSequence, o: usize) -> Option<(usize, AxisBox)> {
    (0..seq.len()).find_map(|t| seq.objects[o].axis_box(t).map(|b| (t, b)))
}

/// Tracks one object from its first visible frame. Earlier frames are empty; the
/// initial frame reports the ground truth it was given.
pub fn track_object(net: &Net, cfg: &RunConfig, seq: &AnnotatedSequence, o: usize) -> Result<ObjectStream> {
    let (w, h) = (seq.width(), seq.height());
    let n = seq.len();
    let mut stream = ObjectStream {
        masks: Vec::with_capacity(n),
        boxes: Vec::with_capacity(n),
        scores: Vec::with_capacity(n),
    };
    let Some((t0, init)) = first_visible(seq, o) else {
        stream.masks = vec![BinaryMask::empty(h, w)?; n];
        stream.boxes = vec![None; n];
        stream.scores = vec![0.0; n];
        return Ok(stream);
    };
    for _ in 0..t0 {
        stream.masks.push(BinaryMask::empty(h, w)?);
        stream.boxes.push(None);
        stream.scores.push(0.0);
    }
    let mut state = TrackerState::init(net, &seq.frames[t0], &init, cfg.track.clone())?;
    stream.masks.push(seq.objects[o].masks[t0].clone());
    stream.boxes.push(Some(OutputBox::Axis(init)));
    stream.scores.push(1.0);
    for frame in &seq.frames[t0 + 1..] {
        let r = state.track_frame(frame)?;
        stream.masks.push(r.mask);
        stream.boxes.push(Some(r.output));
        stream.scores.push(r.score);
    }
    Ok(stream)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackSummary {
    pub sequences: usize,
    pub objects: usize,
    pub frames: usize,
}

pub fn track_run(cfg: &RunConfig, data: &Dataset, net: &Net, out: &Path) -> Result<TrackSummary> {
    create_dir(out)?;
    let mut listed = Vec::with_capacity(data.len());
    let mut summary = TrackSummary {
        sequences: 0,
        objects: 0,
        frames: 0,
    };
    for i in 0..data.len() {
        let seq = data.load_sequence(i)?;
        for (o, obj) in seq.objects.iter().enumerate() {
            track_object(net, cfg, &seq, o)?.write(out, &seq.name, obj.id)?;
            summary.objects += 1;
            summary.frames += seq.len();
        }
        summary.sequences += 1;
        listed.push(ResultSequence {
            name: seq.name.clone(),
            frames: seq.len(),
            objects: seq.objects.iter().map(|o| o.id).collect(),
        });
    }
    ResultsManifest {
        version: crate::results::RESULTS_VERSION,
        kind: ResultKind::Track,
        config_hash: cfg.hash(),
        sequences: listed,
    }
    .write(out)?;
    Ok(summary)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotTrackEntry {
    pub id: u32,
    pub status: TrackStatus,
    /// Min-max box of the reported mask; absent while lost.
    pub bbox: Option<AxisBox>,
    /// Stage-one peak score of this frame's prediction; absent for new tracks.
    pub score: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotFrameLog {
    pub frame: usize,
    pub detections: usize,
    /// `(detection index, track id)` pairs.
    pub matches: Vec<(usize, u32)>,
    pub spawned: Vec<u32>,
    pub removed: Vec<u32>,
    pub tracks: Vec<MotTrackEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotLog {
    pub version: u32,
    pub config_hash: String,
    pub sequence: String,
    pub id_switches: usize,
    pub frames: Vec<MotFrameLog>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotSummary {
    pub sequences: usize,
    pub tracks: usize,
    pub id_switches: usize,
}

/// Tracks every sequence with the oracle detector; per-sequence detector seeds
/// derive from the run seed.
pub fn mot_run(cfg: &RunConfig, data: &Dataset, net: &Net, out: &Path) -> Result<MotSummary> {
    create_dir(out)?;
    let hash = cfg.hash();
    let mut listed = Vec::with_capacity(data.len());
    let mut summary = MotSummary {
        sequences: 0,
        tracks: 0,
        id_switches: 0,
    };
    for i in 0..data.len() {
        let seq = data.load_sequence(i)?;
        let (w, h) = (seq.width(), seq.height());
        let mut detector = OracleDetector::new(&seq, cfg.detector, cfg.seed.wrapping_add(i as u64));
        let mut mt = MultiTracker::new(net, cfg.mot.clone())?;
        let mut frames = Vec::with_capacity(seq.len());
        let mut per_frame_tracks = Vec::with_capacity(seq.len());
        let mut ids = Vec::new();
        create_dir(&out.join(&seq.name).join("masks"))?;
        for (t, frame) in seq.frames.iter().enumerate() {
            let dets = detector.detect(t, frame)?;
            let report = mt.step(frame, &dets)?;
            let outputs = mt.outputs();
            let mut labels = vec![0u32; w * h];
            let mut entries = Vec::with_capacity(outputs.len());
            for o in &outputs {
                for (l, &b) in labels.iter_mut().zip(o.mask.bits()) {
                    if b && *l == 0 {
                        *l = o.id;
                    }
                }
                if !ids.contains(&o.id) {
                    ids.push(o.id);
                }
                entries.push(MotTrackEntry {
                    id: o.id,
                    status: o.status,
                    bbox: min_max_box(&o.mask).ok(),
                    score: report
                        .predictions
                        .iter()
                        .find(|(id, _)| *id == o.id)
                        .map(|(_, p)| p.score),
                });
            }
            imageio::write_labels(&mot_mask_path(out, &seq.name, t), w, h, &labels)?;
            per_frame_tracks.push(outputs.into_iter().map(|o| (o.id, o.mask)).collect::<Vec<_>>());
            frames.push(MotFrameLog {
                frame: t,
                detections: dets.len(),
                matches: report.matches,
                spawned: report.spawned,
                removed: report.removed,
                tracks: entries,
            });
        }
        let gt: Vec<Vec<BinaryMask>> = seq.objects.iter().map(|o| o.masks.clone()).collect();
        let switches = id_switches(&gt, &per_frame_tracks)?;
        write_json(
            &mot_log_path(out, &seq.name),
            &MotLog {
                version: crate::results::RESULTS_VERSION,
                config_hash: hash.clone(),
                sequence: seq.name.clone(),
                id_switches: switches,
                frames,
            },
        )?;
        ids.sort_unstable();
        summary.sequences += 1;
        summary.tracks += ids.len();
        summary.id_switches += switches;
        listed.push(ResultSequence {
            name: seq.name.clone(),
            frames: seq.len(),
            objects: ids,
        });
    }
    ResultsManifest {
        version: crate::results::RESULTS_VERSION,
        kind: ResultKind::Mot,
        config_hash: hash,
        sequences: listed,
    }
    .write(out)?;
    Ok(summary)
}

fn gt_boxes(seq: &AnnotatedSequence, o: usize) -> Vec<Option<OutputBox>> {
    let obj = &seq.objects[o];
    (0..seq.len())
        .map(|t| match obj.rotated[t] {
            Some(r) => Some(OutputBox::Rotated(r)),
            None => obj.axis_box(t).map(OutputBox::Axis),
        })
        .collect()
}

/// Pairs predictions with ground truth. Without `results` the ground truth is
/// scored against itself.
pub fn collect_results(data: &Dataset, results: Option<&Path>) -> Result<Vec<SequenceResult>> {
    let manifest = results.map(ResultsManifest::read).transpose()?;
    if let Some(m) = &manifest {
        if m.kind != ResultKind::Track {
            return Err(Error::Usage("eval scores single-object track results".into()));
        }
    }
    let mut out = Vec::new();
    for (i, entry) in data.manifest.sequences.iter().enumerate() {
        let seq = data.load_sequence(i)?;
        for (o, obj) in seq.objects.iter().enumerate() {
            let gt_boxes = gt_boxes(&seq, o);
            let (pred_masks, pred_boxes) = match (results, &manifest) {
                (Some(root), Some(m)) => {
                    let listed = m
                        .sequences
                        .iter()
                        .any(|s| s.name == seq.name && s.objects.contains(&obj.id));
                    if !listed {
                        return Err(Error::Dataset(vec![format!(
                            "{}: object {} has no results in {}",
                            seq.name,
                            obj.id,
                            root.display()
                        )]));
                    }
                    let s = ObjectStream::read(root, &seq.name, obj.id, seq.len())?;
                    (s.masks, s.boxes)
                }
                _ => (obj.masks.clone(), gt_boxes.clone()),
            };
            out.push(SequenceResult {
                name: seq.name.clone(),
                object: obj.id,
                class_tag: obj.class_tag,
                seen: Some(entry.seen),
                pred_masks,
                pred_boxes,
                gt_masks: obj.masks.clone(),
                gt_boxes,
            });
        }
    }
    Ok(out)
}

/// Reset-protocol runs over every object.
pub fn reset_reports(cfg: &RunConfig, data: &Dataset, net: &Net) -> Result<Vec<ResetReport>> {
    let mut reports = Vec::new();
    for i in 0..data.len() {
        let seq = data.load_sequence(i)?;
        for o in 0..seq.objects.len() {
            let mut tracker = OnlineSiamTracker::new(net, cfg.track.clone());
            reports.push(accuracy_robustness(&mut tracker, &seq, o, cfg.eval.reset)?);
        }
    }
    Ok(reports)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportFile<M> {
    pub config_hash: String,
    pub config: RunConfig,
    #[serde(flatten)]
    pub report: M,
}

/// Writes `report.json` and `sequences.csv`.
pub fn eval_run(
    cfg: &RunConfig,
    data: &Dataset,
    results: Option<&Path>,
    net: Option<&Net>,
    out: &Path,
) -> Result<MetricsReport> {
    create_dir(out)?;
    let mut report = evaluate(&collect_results(data, results)?, &cfg.eval.thresholds)?;
    if let Some(net) = net {
        let (a, r) = ResetReport::pooled(&reset_reports(cfg, data, net)?);
        report.accuracy = Some(a);
        report.robustness = Some(r);
    }
    write_json(&out.join("report.json"), &report_file(cfg, report.clone()))?;
    write_sequence_csv(&out.join("sequences.csv"), &report)?;
    Ok(report)
}

fn report_file<M>(cfg: &RunConfig, report: M) -> ReportFile<M> {
    ReportFile {
        config_hash: cfg.hash(),
        config: RunConfig {
            paths: Default::default(),
            ..cfg.clone()
        },
        report,
    }
}

fn write_sequence_csv(path: &Path, report: &MetricsReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e))?;
    w.write_record([
        "sequence",
        "object",
        "class_tag",
        "seen",
        "j_mean",
        "j_recall",
        "j_decay",
        "f_mean",
        "f_recall",
        "f_decay",
        "box_miou",
    ])
    .map_err(|e| Error::format(path, e))?;
    for s in &report.sequences {
        w.write_record([
            s.name.clone(),
            s.object.to_string(),
            s.class_tag.to_string(),
            s.seen.map_or(String::new(), |b| b.to_string()),
            s.j.mean.to_string(),
            s.j.recall.to_string(),
            s.j.decay.to_string(),
            s.f.mean.to_string(),
            s.f.recall.to_string(),
            s.f.decay.to_string(),
            s.miou.to_string(),
        ])
        .map_err(|e| Error::format(path, e))?;
    }
    w.flush().map_err(Error::io(path))
}

/// Box-representation study over the ground truth; writes `oracle.json`.
pub fn oracle_run(cfg: &RunConfig, data: &Dataset, out: &Path) -> Result<OracleReport> {
    create_dir(out)?;
    let report = representation_oracles(&data.load_all()?, &cfg.eval.thresholds)?;
    write_json(&out.join("oracle.json"), &report_file(cfg, report.clone()))?;
    Ok(report)
}
