use crate::error::Result;

use super::boxes::{AxisBox, RotatedBox};
use super::mask::BinaryMask;
use super::polygon::{clip_convex, polygon_area};

/// Intersection over union of two axis-aligned boxes; 0 when the union is empty.
pub fn iou_axis(a: &AxisBox, b: &AxisBox) -> f64 {
    let iw = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let ih = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// `|a and b| / |a or b|`, defined as 0 when both masks are empty.
pub fn iou_mask(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let (inter, union) = a.overlap_counts(b)?;
    Ok(if union == 0 { 0.0 } else { inter as f64 / union as f64 })
}

/// Exact IoU of two rotated rectangles via convex polygon clipping.
pub fn iou_rotated(a: &RotatedBox, b: &RotatedBox) -> f64 {
    // clipping round-off would otherwise leave identical boxes a few ulps short of 1
    if a == b {
        return 1.0;
    }
    let pa = a.corners();
    let pb = b.corners();
    let inter = polygon_area(&clip_convex(&pa, &pb));
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}
