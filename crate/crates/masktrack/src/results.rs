//! Result streams written by `track` and `mot`.
//!
//! ```text
//! <out>/results.json                        what was produced, config hash
//! track: <out>/<seq>/<object>/masks/00000.png   binary 0/255
//!        <out>/<seq>/<object>/boxes.txt         one box per line: 4 or 8 numbers, or 0
//!        <out>/<seq>/<object>/scores.txt        one peak score per line
//! mot:   <out>/<seq>/masks/00000.png            track ids, 0 = background
//!        <out>/<seq>/tracks.json                per-frame association log
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use masktrack_core::geom::BinaryMask;
use masktrack_core::track::OutputBox;
use serde::{Deserialize, Serialize};

use crate::dataset::{read_json, write_json};
use crate::error::{Error, Result};
use crate::imageio;

pub const RESULTS_FILE: &str = "results.json";
pub const RESULTS_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResultKind {
    Track,
    Mot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultSequence {
    pub name: String,
    pub frames: usize,
    /// Object ids (track) or every track id that ever existed (mot).
    pub objects: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultsManifest {
    pub version: u32,
    pub kind: ResultKind,
    pub config_hash: String,
    pub sequences: Vec<ResultSequence>,
}

impl ResultsManifest {
    pub fn write(&self, root: &Path) -> Result<()> {
        write_json(&root.join(RESULTS_FILE), self)
    }

    pub fn read(root: &Path) -> Result<Self> {
        let m: Self = read_json(&root.join(RESULTS_FILE))?;
        if m.version != RESULTS_VERSION {
            return Err(Error::format(
                root.join(RESULTS_FILE),
                format!("results version {} (expected {RESULTS_VERSION})", m.version),
            ));
        }
        Ok(m)
    }
}

pub fn object_dir(root: &Path, seq: &str, object: u32) -> PathBuf {
    root.join(seq).join(object.to_string())
}

fn object_mask_path(root: &Path, seq: &str, object: u32, t: usize) -> PathBuf {
    object_dir(root, seq, object).join("masks").join(format!("{t:05}.png"))
}

pub fn mot_mask_path(root: &Path, seq: &str, t: usize) -> PathBuf {
    root.join(seq).join("masks").join(format!("{t:05}.png"))
}

pub fn mot_log_path(root: &Path, seq: &str) -> PathBuf {
    root.join(seq).join("tracks.json")
}

/// Shortest round-tripping decimal form, so files are exact and reproducible.
pub fn format_box(b: Option<&OutputBox>) -> String {
    match b {
        None => "0".into(),
        Some(b) => {
            let mut s = String::new();
            for (i, v) in b.to_numbers().iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                write!(s, "{v}").expect("string write");
            }
            s
        }
    }
}

pub fn parse_box(line: &str) -> std::result::Result<Option<OutputBox>, String> {
    let line = line.trim();
    if line == "0" {
        return Ok(None);
    }
    let nums = line
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    OutputBox::from_numbers(&nums).map(Some).map_err(|e| e.to_string())
}

/// One tracked object's per-frame output.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectStream {
    pub masks: Vec<BinaryMask>,
    pub boxes: Vec<Option<OutputBox>>,
    pub scores: Vec<f64>,
}

impl ObjectStream {
    pub fn write(&self, root: &Path, seq: &str, object: u32) -> Result<()> {
        let dir = object_dir(root, seq, object);
        let masks = dir.join("masks");
        fs::create_dir_all(&masks).map_err(Error::io(&masks))?;
        for (t, m) in self.masks.iter().enumerate() {
            imageio::write_mask(&object_mask_path(root, seq, object, t), m)?;
        }
        let boxes: String = self.boxes.iter().map(|b| format_box(b.as_ref()) + "\n").collect();
        let p = dir.join("boxes.txt");
        fs::write(&p, boxes).map_err(Error::io(&p))?;
        let scores: String = self.scores.iter().map(|s| format!("{s}\n")).collect();
        let p = dir.join("scores.txt");
        fs::write(&p, scores).map_err(Error::io(&p))
    }

    /// Reads `frames` frames; all problems are reported together.
    pub fn read(root: &Path, seq: &str, object: u32, frames: usize) -> Result<Self> {
        let dir = object_dir(root, seq, object);
        let mut problems = Vec::new();
        let mut masks = Vec::with_capacity(frames);
        for t in 0..frames {
            match imageio::read_mask(&object_mask_path(root, seq, object, t)) {
                Ok(m) => masks.push(m),
                Err(e) => problems.push(e.to_string()),
            }
        }
        let read_lines = |name: &str, problems: &mut Vec<String>| -> Vec<String> {
            let p = dir.join(name);
            match fs::read_to_string(&p) {
                Ok(s) => {
                    let lines: Vec<String> = s.lines().map(str::to_string).collect();
                    if lines.len() != frames {
                        problems.push(format!("{}: {} lines for {frames} frames", p.display(), lines.len()));
                    }
                    lines
                }
                Err(e) => {
                    problems.push(format!("{}: {e}", p.display()));
                    Vec::new()
                }
            }
        };
        let mut boxes = Vec::with_capacity(frames);
        for (i, l) in read_lines("boxes.txt", &mut problems).iter().enumerate() {
            match parse_box(l) {
                Ok(b) => boxes.push(b),
                Err(e) => problems.push(format!("{}: line {}: {e}", dir.join("boxes.txt").display(), i + 1)),
            }
        }
        let mut scores = Vec::with_capacity(frames);
        for (i, l) in read_lines("scores.txt", &mut problems).iter().enumerate() {
            match l.trim().parse::<f64>() {
                Ok(s) => scores.push(s),
                Err(e) => problems.push(format!("{}: line {}: {e}", dir.join("scores.txt").display(), i + 1)),
            }
        }
        if problems.is_empty() {
            Ok(Self { masks, boxes, scores })
        } else {
            Err(Error::Dataset(problems))
        }
    }
}
