//! On-disk dataset layout:
//!
//! ```text
//! <root>/manifest.json
//! <root>/<sequence>/frames/00000.png    RGB frames
//! <root>/<sequence>/masks/00000.png     instance ids, 0 = background
//! <root>/<sequence>/rotated.json        per object, per frame rotated box or null
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use masktrack_core::data::{AnnotatedSequence, ObjectAnnotation, ObjectInfo};
use masktrack_core::geom::{BinaryMask, RotatedBox};
use masktrack_core::image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imageio;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DATASET_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceEntry {
    pub name: String,
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    /// Membership of the seen-category split.
    pub seen: bool,
    pub objects: Vec<ObjectInfo>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub version: u32,
    pub sequences: Vec<SequenceEntry>,
}

pub fn frame_path(root: &Path, seq: &str, t: usize) -> PathBuf {
    root.join(seq).join("frames").join(format!("{t:05}.png"))
}

pub fn mask_path(root: &Path, seq: &str, t: usize) -> PathBuf {
    root.join(seq).join("masks").join(format!("{t:05}.png"))
}

fn rotated_path(root: &Path, seq: &str) -> PathBuf {
    root.join(seq).join("rotated.json")
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(Error::io(path))
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e))
}

/// Writes sequences and their manifest under `root`.
pub fn write_dataset(root: &Path, sequences: &[(AnnotatedSequence, bool)]) -> Result<DatasetManifest> {
    let mut entries = Vec::with_capacity(sequences.len());
    for (seq, seen) in sequences {
        seq.validate()?;
        if seq.name.is_empty() || seq.name.contains(['/', '\\']) || seq.name.starts_with('.') {
            return Err(Error::Usage(format!(
                "sequence name {:?} is not a plain directory name",
                seq.name
            )));
        }
        for dir in ["frames", "masks"] {
            let d = root.join(&seq.name).join(dir);
            fs::create_dir_all(&d).map_err(Error::io(&d))?;
        }
        for t in 0..seq.len() {
            imageio::write_rgb(&frame_path(root, &seq.name, t), &seq.frames[t])?;
            imageio::write_labels(
                &mask_path(root, &seq.name, t),
                seq.width(),
                seq.height(),
                &seq.label_image(t),
            )?;
        }
        let rotated: Vec<&Vec<Option<RotatedBox>>> = seq.objects.iter().map(|o| &o.rotated).collect();
        write_json(&rotated_path(root, &seq.name), &rotated)?;
        entries.push(SequenceEntry {
            name: seq.name.clone(),
            frames: seq.len(),
            width: seq.width(),
            height: seq.height(),
            seen: *seen,
            objects: seq.object_info(),
        });
    }
    let manifest = DatasetManifest {
        version: DATASET_VERSION,
        sequences: entries,
    };
    fs::create_dir_all(root).map_err(Error::io(root))?;
    write_json(&root.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// A validated dataset; sequences are decoded on demand.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub root: PathBuf,
    pub manifest: DatasetManifest,
}

impl Dataset {
    /// Reads the manifest and checks that every referenced file exists and has the
    /// declared size. All problems are reported together.
    pub fn open(root: &Path) -> Result<Self> {
        let manifest: DatasetManifest = read_json(&root.join(MANIFEST_FILE))?;
        let mut problems = Vec::new();
        if manifest.version != DATASET_VERSION {
            problems.push(format!(
                "manifest version {} (expected {DATASET_VERSION})",
                manifest.version
            ));
        }
        for (i, s) in manifest.sequences.iter().enumerate() {
            if manifest.sequences[..i].iter().any(|p| p.name == s.name) {
                problems.push(format!("{}: listed twice", s.name));
            }
            if s.frames == 0 {
                problems.push(format!("{}: no frames", s.name));
            }
            if s.objects.iter().any(|o| o.id == 0 || o.id > u16::MAX as u32) {
                problems.push(format!("{}: object ids must be in 1..=65535", s.name));
            }
            let rp = rotated_path(root, &s.name);
            if !rp.is_file() {
                problems.push(format!("{}: missing {}", s.name, rp.display()));
            }
            for t in 0..s.frames {
                for p in [frame_path(root, &s.name, t), mask_path(root, &s.name, t)] {
                    match imageio::dimensions(&p) {
                        Err(e) => problems.push(format!("{}: frame {t}: {e}", s.name)),
                        Ok(d) if d != (s.width, s.height) => problems.push(format!(
                            "{}: frame {t}: {} is {}x{}, manifest says {}x{}",
                            s.name,
                            p.display(),
                            d.0,
                            d.1,
                            s.width,
                            s.height
                        )),
                        Ok(_) => {}
                    }
                }
            }
        }
        if problems.is_empty() {
            Ok(Self {
                root: root.to_path_buf(),
                manifest,
            })
        } else {
            Err(Error::Dataset(problems))
        }
    }

    pub fn len(&self) -> usize {
        self.manifest.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.sequences.is_empty()
    }

    /// Decodes one sequence; every unreadable file is reported.
    pub fn load_sequence(&self, index: usize) -> Result<AnnotatedSequence> {
        let entry = self
            .manifest
            .sequences
            .get(index)
            .ok_or_else(|| Error::Usage(format!("sequence index {index} out of range")))?;
        let name = &entry.name;
        let mut problems = Vec::new();
        let mut frames = Vec::with_capacity(entry.frames);
        let mut labels = Vec::with_capacity(entry.frames);
        for t in 0..entry.frames {
            match imageio::read_rgb(&frame_path(&self.root, name, t)) {
                Ok(f) => frames.push(f),
                Err(e) => problems.push(format!("{name}: frame {t}: {e}")),
            }
            match imageio::read_labels(&mask_path(&self.root, name, t)) {
                Ok(l) => labels.push(l),
                Err(e) => problems.push(format!("{name}: mask {t}: {e}")),
            }
        }
        let rotated: Vec<Vec<Option<RotatedBox>>> = match read_json(&rotated_path(&self.root, name)) {
            Ok(r) => r,
            Err(e) => {
                problems.push(e.to_string());
                Vec::new()
            }
        };
        if !problems.is_empty() {
            return Err(Error::Dataset(problems));
        }
        if rotated.len() != entry.objects.len() || rotated.iter().any(|r| r.len() != entry.frames) {
            return Err(Error::Dataset(vec![format!(
                "{name}: rotated boxes do not cover {} objects x {} frames",
                entry.objects.len(),
                entry.frames
            )]));
        }
        let objects = entry
            .objects
            .iter()
            .zip(rotated)
            .map(|(info, rotated)| {
                let masks = labels
                    .iter()
                    .map(|l| {
                        BinaryMask::from_bits(
                            entry.height,
                            entry.width,
                            l.iter().map(|&v| v as u32 == info.id).collect(),
                        )
                    })
                    .collect::<masktrack_core::Result<Vec<_>>>()?;
                Ok(ObjectAnnotation {
                    id: info.id,
                    class_tag: info.class_tag,
                    masks,
                    rotated,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let seq = AnnotatedSequence {
            name: name.clone(),
            frames,
            objects,
        };
        seq.validate()?;
        Ok(seq)
    }

    pub fn load_all(&self) -> Result<Vec<AnnotatedSequence>> {
        (0..self.len()).map(|i| self.load_sequence(i)).collect()
    }
}

/// Converts a core image for the `image` crate.
pub fn to_image(img: &RgbImage) -> image::RgbImage {
    image::RgbImage::from_raw(img.width() as u32, img.height() as u32, img.as_raw().to_vec()).expect("matching buffer")
}
