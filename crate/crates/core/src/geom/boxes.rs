#[allow(unused_imports)]
use num_traits::Float;

use core::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned rectangle in continuous pixel coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl AxisBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        if !(x_min <= x_max && y_min <= y_max) {
            return Err(Error::DegenerateBox(alloc::format!(
                "({x_min}, {y_min}, {x_max}, {y_max}) is not ordered"
            )));
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn from_center_size(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        Self::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            x_min: self.x_min + dx,
            y_min: self.y_min + dy,
            x_max: self.x_max + dx,
            y_max: self.y_max + dy,
        }
    }

    /// Intersection with `[0, width] x [0, height]`.
    pub fn clamped(&self, width: f64, height: f64) -> Self {
        let cl = |v: f64, hi: f64| v.max(0.0).min(hi);
        Self {
            x_min: cl(self.x_min, width),
            y_min: cl(self.y_min, height),
            x_max: cl(self.x_max, width),
            y_max: cl(self.y_max, height),
        }
    }

    pub fn corners(&self) -> [(f64, f64); 4] {
        [
            (self.x_min, self.y_min),
            (self.x_max, self.y_min),
            (self.x_max, self.y_max),
            (self.x_min, self.y_max),
        ]
    }

    /// The same rectangle as a zero-angle [`RotatedBox`]; `None` when degenerate.
    pub fn to_rotated(&self) -> Option<RotatedBox> {
        let (cx, cy) = self.center();
        RotatedBox::new(cx, cy, self.width(), self.height(), 0.0).ok()
    }
}

/// Rectangle of size `w x h` centred on `(cx, cy)`, its `w` side rotated by `angle`
/// from the +x axis. The angle is canonicalised into `[0, pi/2)` by swapping sides.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotatedBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub angle: f64,
}

const ANGLE_EPS: f64 = 1e-12;

impl RotatedBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64, angle: f64) -> Result<Self> {
        if !(w > 0.0 && h > 0.0) || !angle.is_finite() || !cx.is_finite() || !cy.is_finite() {
            return Err(Error::DegenerateBox(alloc::format!(
                "rotated box needs positive finite size, got {w} x {h} at angle {angle}"
            )));
        }
        let (mut w, mut h) = (w, h);
        let mut a = angle - PI * (angle / PI).floor();
        if a >= FRAC_PI_2 - ANGLE_EPS {
            a -= FRAC_PI_2;
            core::mem::swap(&mut w, &mut h);
        }
        if a.abs() < ANGLE_EPS || a < 0.0 {
            a = 0.0;
        }
        Ok(Self { cx, cy, w, h, angle: a })
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Unit vectors along the `w` side and the `h` side.
    pub fn axes(&self) -> ((f64, f64), (f64, f64)) {
        let (s, c) = self.angle.sin_cos();
        ((c, s), (-s, c))
    }

    /// Corners in counter-clockwise order (in a y-up frame).
    pub fn corners(&self) -> [(f64, f64); 4] {
        let ((ux, uy), (vx, vy)) = self.axes();
        let (hw, hh) = (self.w / 2.0, self.h / 2.0);
        let p = |a: f64, b: f64| (self.cx + a * hw * ux + b * hh * vx, self.cy + a * hw * uy + b * hh * vy);
        [p(-1.0, -1.0), p(1.0, -1.0), p(1.0, 1.0), p(-1.0, 1.0)]
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let ((ux, uy), (vx, vy)) = self.axes();
        let (dx, dy) = (x - self.cx, y - self.cy);
        (dx * ux + dy * uy).abs() <= self.w / 2.0 + 1e-9 && (dx * vx + dy * vy).abs() <= self.h / 2.0 + 1e-9
    }

    /// Tightest axis-aligned box containing this rectangle.
    pub fn enclosing_axis(&self) -> AxisBox {
        let cs = self.corners();
        let fold = |f: fn(f64, f64) -> f64, init: f64, sel: fn(&(f64, f64)) -> f64| cs.iter().map(sel).fold(init, f);
        AxisBox {
            x_min: fold(f64::min, f64::INFINITY, |p| p.0),
            y_min: fold(f64::min, f64::INFINITY, |p| p.1),
            x_max: fold(f64::max, f64::NEG_INFINITY, |p| p.0),
            y_max: fold(f64::max, f64::NEG_INFINITY, |p| p.1),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            w: self.w * s,
            h: self.h * s,
            ..*self
        }
    }
}
