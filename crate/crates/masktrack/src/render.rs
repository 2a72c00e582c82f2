//! Overlay images: masks alpha-blended over frames, boxes outlined.

use std::path::Path;

use masktrack_core::geom::BinaryMask;
use masktrack_core::image::RgbImage;
use masktrack_core::track::OutputBox;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::imageio;
use crate::results::{mot_mask_path, ObjectStream, ResultKind, ResultsManifest};

const ALPHA: f64 = 0.5;

/// Distinct, stable colour per id.
pub fn color_for(id: u32) -> [u8; 3] {
    const PALETTE: [[u8; 3]; 8] = [
        [230, 25, 75],
        [60, 180, 75],
        [255, 225, 25],
        [0, 130, 200],
        [245, 130, 48],
        [145, 30, 180],
        [70, 240, 240],
        [240, 50, 230],
    ];
    PALETTE[id as usize % PALETTE.len()]
}

pub fn blend_mask(img: &mut RgbImage, mask: &BinaryMask, color: [u8; 3]) {
    for y in 0..img.height().min(mask.height()) {
        for x in 0..img.width().min(mask.width()) {
            if mask.get(y, x) {
                let p = img.pixel(x, y);
                let mix = |a: u8, b: u8| ((1.0 - ALPHA) * a as f64 + ALPHA * b as f64).round() as u8;
                img.put_pixel(x, y, [mix(p[0], color[0]), mix(p[1], color[1]), mix(p[2], color[2])]);
            }
        }
    }
}

/// Draws a one-pixel line, clipped to the image.
pub fn draw_line(img: &mut RgbImage, from: (f64, f64), to: (f64, f64), color: [u8; 3]) {
    let steps = (to.0 - from.0).abs().max((to.1 - from.1).abs()).ceil().max(1.0) as usize;
    for i in 0..=steps {
        let s = i as f64 / steps as f64;
        let x = (from.0 + s * (to.0 - from.0)).floor();
        let y = (from.1 + s * (to.1 - from.1)).floor();
        if x >= 0.0 && y >= 0.0 && (x as usize) < img.width() && (y as usize) < img.height() {
            img.put_pixel(x as usize, y as usize, color);
        }
    }
}

pub fn draw_box(img: &mut RgbImage, b: &OutputBox, color: [u8; 3]) {
    let corners = match b {
        OutputBox::Axis(a) => a.corners(),
        OutputBox::Rotated(r) => r.corners(),
    };
    for i in 0..4 {
        draw_line(img, corners[i], corners[(i + 1) % 4], color);
    }
}

/// Renders every frame of every result sequence to `<out>/<seq>/00000.png`.
pub fn render_run(data: &Dataset, results: &Path, out: &Path, only: Option<&str>) -> Result<usize> {
    let manifest = ResultsManifest::read(results)?;
    let mut written = 0;
    for (i, entry) in data.manifest.sequences.iter().enumerate() {
        if only.is_some_and(|n| n != entry.name) {
            continue;
        }
        let Some(listed) = manifest.sequences.iter().find(|s| s.name == entry.name) else {
            continue;
        };
        let seq = data.load_sequence(i)?;
        let dir = out.join(&seq.name);
        std::fs::create_dir_all(&dir).map_err(Error::io(&dir))?;
        let streams = match manifest.kind {
            ResultKind::Track => listed
                .objects
                .iter()
                .map(|&id| ObjectStream::read(results, &seq.name, id, seq.len()).map(|s| (id, s)))
                .collect::<Result<Vec<_>>>()?,
            ResultKind::Mot => Vec::new(),
        };
        for (t, frame) in seq.frames.iter().enumerate() {
            let mut img = frame.clone();
            match manifest.kind {
                ResultKind::Track => {
                    for (id, s) in &streams {
                        blend_mask(&mut img, &s.masks[t], color_for(*id));
                        if let Some(b) = &s.boxes[t] {
                            draw_box(&mut img, b, color_for(*id));
                        }
                    }
                }
                ResultKind::Mot => {
                    let labels = imageio::read_labels(&mot_mask_path(results, &seq.name, t))?;
                    if labels.len() != seq.width() * seq.height() {
                        return Err(Error::format(
                            mot_mask_path(results, &seq.name, t),
                            "size differs from the frame",
                        ));
                    }
                    for &id in &listed.objects {
                        let mask = BinaryMask::from_bits(
                            seq.height(),
                            seq.width(),
                            labels.iter().map(|&l| l as u32 == id).collect(),
                        )?;
                        blend_mask(&mut img, &mask, color_for(id));
                        if let Ok(b) = masktrack_core::geom::min_max_box(&mask) {
                            draw_box(&mut img, &OutputBox::Axis(b), color_for(id));
                        }
                    }
                }
            }
            imageio::write_rgb(&dir.join(format!("{t:05}.png")), &img)?;
            written += 1;
        }
    }
    Ok(written)
}
