//! Geometry and combinatorial kernels: masks, boxes, overlap measures, box generation
//! from masks and optimal bipartite assignment.
//!
//! Pixel convention used throughout: pixel `(row, col)` is the unit cell
//! `[col, col + 1] x [row, row + 1]`; its centre is `(col + 0.5, row + 0.5)`.

mod assign;
mod boxes;
mod fit;
mod hull;
mod iou;
mod mask;
mod polygon;

pub use assign::{hungarian, AffinityMatrix, Assignment};
pub use boxes::{AxisBox, RotatedBox};
pub use fit::{mbr, min_max_box, opt_box, rasterize_axis, rasterize_rotated, rotated_mask_iou};
pub use hull::{convex_hull, min_area_rect, Point};
pub use iou::{iou_axis, iou_mask, iou_rotated};
pub use mask::BinaryMask;
pub use polygon::{clip_convex, polygon_area};
