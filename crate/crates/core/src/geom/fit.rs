//! Box generation from binary masks: Min-max, minimum bounding rectangle, and the
//! IoU-optimising rectangle search.

#[allow(unused_imports)]
use num_traits::Float;

use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

use super::boxes::{AxisBox, RotatedBox};
use super::hull::{convex_hull, min_area_rect, Point};
use super::mask::BinaryMask;

/// Tightest axis-aligned box containing every foreground pixel cell.
pub fn min_max_box(mask: &BinaryMask) -> Result<AxisBox> {
    let mut bounds: Option<(usize, usize, usize, usize)> = None;
    for (r, ext) in mask.row_extents().into_iter().enumerate() {
        if let Some((c0, c1)) = ext {
            bounds = Some(match bounds {
                None => (c0, r, c1, r),
                Some((x0, y0, x1, _)) => (x0.min(c0), y0, x1.max(c1), r),
            });
        }
    }
    let (x0, y0, x1, y1) = bounds.ok_or(Error::EmptyMask)?;
    AxisBox::new(x0 as f64, y0 as f64, (x1 + 1) as f64, (y1 + 1) as f64)
}

/// Corner points of the extreme foreground cells of every row; their hull equals the
/// hull of all foreground pixel cells.
fn cell_corner_points(mask: &BinaryMask) -> Vec<Point> {
    let mut pts = Vec::new();
    for (r, ext) in mask.row_extents().into_iter().enumerate() {
        if let Some((c0, c1)) = ext {
            let (y0, y1) = (r as f64, (r + 1) as f64);
            let (x0, x1) = (c0 as f64, (c1 + 1) as f64);
            pts.extend_from_slice(&[(x0, y0), (x0, y1), (x1, y0), (x1, y1)]);
        }
    }
    pts
}

fn mask_hull(mask: &BinaryMask) -> Result<Vec<Point>> {
    let pts = cell_corner_points(mask);
    if pts.is_empty() {
        return Err(Error::EmptyMask);
    }
    Ok(convex_hull(&pts))
}

/// Minimum-area rotated rectangle enclosing all foreground pixel cells.
pub fn mbr(mask: &BinaryMask) -> Result<RotatedBox> {
    let hull = mask_hull(mask)?;
    let (c, angle, w, h) = min_area_rect(&hull).ok_or(Error::EmptyMask)?;
    RotatedBox::new(c.0, c.1, w, h, angle)
}

/// Bounding rectangle of `hull` whose sides are aligned with `angle`.
fn bounding_rect_at(hull: &[Point], angle: f64) -> Option<RotatedBox> {
    let (s, c) = angle.sin_cos();
    let (mut u0, mut u1, mut v0, mut v1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in hull {
        let u = x * c + y * s;
        let v = -x * s + y * c;
        u0 = u0.min(u);
        u1 = u1.max(u);
        v0 = v0.min(v);
        v1 = v1.max(v);
    }
    let (um, vm) = ((u0 + u1) / 2.0, (v0 + v1) / 2.0);
    RotatedBox::new(um * c - vm * s, um * s + vm * c, u1 - u0, v1 - v0, angle).ok()
}

/// Column span `[first, last]` of pixel centres on row `r` that fall inside `b`.
fn row_span(b: &RotatedBox, r: usize, width: usize) -> Option<(usize, usize)> {
    let y = r as f64 + 0.5;
    let ((ux, uy), (vx, vy)) = b.axes();
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    // |(x - cx) * ax + (y - cy) * ay| <= half for both axes
    for &(ax, ay, half) in &[(ux, uy, b.w / 2.0 + 1e-9), (vx, vy, b.h / 2.0 + 1e-9)] {
        let off = (y - b.cy) * ay;
        if ax.abs() < 1e-15 {
            if off.abs() > half {
                return None;
            }
            continue;
        }
        let a = (-half - off) / ax + b.cx;
        let z = (half - off) / ax + b.cx;
        let (a, z) = if a <= z { (a, z) } else { (z, a) };
        lo = lo.max(a);
        hi = hi.min(z);
    }
    if lo > hi {
        return None;
    }
    let first = (lo - 0.5).ceil().max(0.0);
    let last = (hi - 0.5).floor().min(width as f64 - 1.0);
    if first > last || last < 0.0 {
        return None;
    }
    Some((first as usize, last as usize))
}

/// Pixels whose centres lie inside the rotated rectangle.
pub fn rasterize_rotated(b: &RotatedBox, height: usize, width: usize) -> Result<BinaryMask> {
    let mut bits = alloc::vec![false; height * width];
    for r in 0..height {
        if let Some((c0, c1)) = row_span(b, r, width) {
            for bit in &mut bits[r * width + c0..=r * width + c1] {
                *bit = true;
            }
        }
    }
    BinaryMask::from_bits(height, width, bits)
}

/// Pixels whose centres lie inside the axis-aligned box.
pub fn rasterize_axis(b: &AxisBox, height: usize, width: usize) -> Result<BinaryMask> {
    BinaryMask::from_fn(height, width, |r, c| {
        let (x, y) = (c as f64 + 0.5, r as f64 + 0.5);
        x >= b.x_min && x <= b.x_max && y >= b.y_min && y <= b.y_max
    })
}

/// Row-wise prefix sums for fast foreground counts over column spans.
struct RowPrefix {
    width: usize,
    sums: Vec<u32>,
    total: usize,
}

impl RowPrefix {
    fn new(mask: &BinaryMask) -> Self {
        let w = mask.width();
        let mut sums = Vec::with_capacity(mask.height() * (w + 1));
        for r in 0..mask.height() {
            let mut acc = 0u32;
            sums.push(0);
            for c in 0..w {
                acc += mask.get(r, c) as u32;
                sums.push(acc);
            }
        }
        Self {
            width: w,
            sums,
            total: mask.count(),
        }
    }

    fn count(&self, r: usize, c0: usize, c1: usize) -> usize {
        let base = r * (self.width + 1);
        (self.sums[base + c1 + 1] - self.sums[base + c0]) as usize
    }
}

fn objective(prefix: &RowPrefix, b: &RotatedBox, height: usize) -> (f64, usize) {
    let env = b.enclosing_axis();
    let r0 = (env.y_min - 0.5).floor().max(0.0) as usize;
    let r1 = ((env.y_max - 0.5).ceil().max(0.0) as usize).min(height.saturating_sub(1));
    let (mut inter, mut area) = (0usize, 0usize);
    if env.y_max > 0.0 {
        for r in r0..=r1 {
            if let Some((c0, c1)) = row_span(b, r, prefix.width) {
                area += c1 - c0 + 1;
                inter += prefix.count(r, c0, c1);
            }
        }
    }
    let union = prefix.total + area - inter;
    let j = if union == 0 { 0.0 } else { inter as f64 / union as f64 };
    (j, area)
}

/// Mask IoU between `mask` and the rasterisation of `b` on the same grid.
pub fn rotated_mask_iou(mask: &BinaryMask, b: &RotatedBox) -> f64 {
    objective(&RowPrefix::new(mask), b, mask.height()).0
}

const OPT_ANGLE_STEPS: usize = 90;
const OPT_SCALE_MIN: f64 = 0.80;
const OPT_SCALE_STEPS: usize = 21;
const OPT_SCALE_STEP: f64 = 0.02;

/// Rotated rectangle maximising mask IoU with its own rasterisation.
///
/// Candidates: for each of 90 orientations at 1 degree spacing starting from the MBR
/// angle, the bounding rectangle in that orientation scaled uniformly by
/// 0.80, 0.82, ..., 1.20. Ties go to the smaller rectangle. The MBR itself is the
/// first candidate at scale 1, so the result never scores below it.
pub fn opt_box(mask: &BinaryMask) -> Result<RotatedBox> {
    let hull = mask_hull(mask)?;
    let seed = mbr(mask)?;
    let prefix = RowPrefix::new(mask);
    let height = mask.height();
    let step = FRAC_PI_2 / OPT_ANGLE_STEPS as f64;

    let (j0, a0) = objective(&prefix, &seed, height);
    let mut best = (j0, a0, seed);
    for ai in 0..OPT_ANGLE_STEPS {
        let base = if ai == 0 {
            seed
        } else {
            match bounding_rect_at(&hull, seed.angle + ai as f64 * step) {
                Some(b) => b,
                None => continue,
            }
        };
        for si in 0..OPT_SCALE_STEPS {
            let s = OPT_SCALE_MIN + si as f64 * OPT_SCALE_STEP;
            let cand = base.scaled(s);
            let (j, area) = objective(&prefix, &cand, height);
            if j > best.0 || (j == best.0 && area < best.1) {
                best = (j, area, cand);
            }
        }
    }
    Ok(best.2)
}
