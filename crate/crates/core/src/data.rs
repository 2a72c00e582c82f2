//! In-memory annotated video sequences, shared by the generator, training, tracking
//! and evaluation code.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{min_max_box, AxisBox, BinaryMask, RotatedBox};
use crate::image::RgbImage;

/// Ground truth for one object across a sequence. Masks may be empty on frames where
/// the object is absent.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectAnnotation {
    /// Instance id as stored in mask images (never 0).
    pub id: u32,
    pub class_tag: u32,
    pub masks: Vec<BinaryMask>,
    pub rotated: Vec<Option<RotatedBox>>,
}

impl ObjectAnnotation {
    /// Min-max box of the mask on frame `t`, if the object is visible there.
    pub fn axis_box(&self, t: usize) -> Option<AxisBox> {
        min_max_box(self.masks.get(t)?).ok()
    }

    pub fn visible(&self, t: usize) -> bool {
        self.masks.get(t).is_some_and(|m| !m.is_empty())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnnotatedSequence {
    pub name: String,
    pub frames: Vec<RgbImage>,
    pub objects: Vec<ObjectAnnotation>,
}

/// Per-object summary used by dataset manifests.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectInfo {
    pub id: u32,
    pub class_tag: u32,
}

impl AnnotatedSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn width(&self) -> usize {
        self.frames.first().map_or(0, RgbImage::width)
    }

    pub fn height(&self) -> usize {
        self.frames.first().map_or(0, RgbImage::height)
    }

    pub fn object_info(&self) -> Vec<ObjectInfo> {
        self.objects
            .iter()
            .map(|o| ObjectInfo {
                id: o.id,
                class_tag: o.class_tag,
            })
            .collect()
    }

    /// Checks that all frames and masks agree in size and count and that ids are
    /// unique and non-zero.
    pub fn validate(&self) -> Result<()> {
        let (w, h) = (self.width(), self.height());
        if self.frames.iter().any(|f| f.width() != w || f.height() != h) {
            return Err(Error::InvalidArgument(alloc::format!(
                "{}: frame sizes differ",
                self.name
            )));
        }
        for (i, o) in self.objects.iter().enumerate() {
            if o.id == 0 || self.objects[..i].iter().any(|p| p.id == o.id) {
                return Err(Error::InvalidArgument(alloc::format!(
                    "{}: bad object id {}",
                    self.name,
                    o.id
                )));
            }
            if o.masks.len() != self.len() || o.rotated.len() != self.len() {
                return Err(Error::InvalidArgument(alloc::format!(
                    "{}: object {} annotates {} of {} frames",
                    self.name,
                    o.id,
                    o.masks.len(),
                    self.len()
                )));
            }
            if o.masks.iter().any(|m| m.dims() != (h, w)) {
                return Err(Error::InvalidArgument(alloc::format!(
                    "{}: object {} mask size",
                    self.name,
                    o.id
                )));
            }
        }
        Ok(())
    }

    /// Instance-id label image for frame `t` (0 = background, later objects on top).
    pub fn label_image(&self, t: usize) -> Vec<u32> {
        let mut out = alloc::vec![0u32; self.width() * self.height()];
        for o in &self.objects {
            for (px, &b) in out.iter_mut().zip(o.masks[t].bits()) {
                if b {
                    *px = o.id;
                }
            }
        }
        out
    }
}
