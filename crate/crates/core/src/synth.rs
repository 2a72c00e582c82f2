//! Deterministic synthetic scenes: textured convex shapes moving and rotating over a
//! noisy background, with exact per-frame masks and rotated boxes.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{AnnotatedSequence, ObjectAnnotation};
use crate::error::{Error, Result};
use crate::geom::{convex_hull, min_area_rect, BinaryMask, RotatedBox};
use crate::image::RgbImage;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Rectangle,
    Ellipse,
    Diamond,
    /// Convex polygon; vertices in units of the half-extents, counter-clockwise.
    Blob {
        vertices: Vec<(f64, f64)>,
    },
}

impl Shape {
    pub fn class_tag(&self) -> u32 {
        match self {
            Shape::Rectangle => 0,
            Shape::Ellipse => 1,
            Shape::Diamond => 2,
            Shape::Blob { .. } => 3,
        }
    }

    /// A random convex blob: points at sorted random angles on the unit circle.
    pub fn random_blob<R: Rng>(rng: &mut R) -> Self {
        let n = rng.random_range(8..=16);
        let mut angles: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..TAU)).collect();
        angles.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        angles.dedup();
        Shape::Blob {
            vertices: angles.iter().map(|a| (a.cos(), a.sin())).collect(),
        }
    }

    /// Whether a point in the shape's local frame (scaled to half-extents 1) is inside.
    fn contains_unit(&self, x: f64, y: f64) -> bool {
        match self {
            Shape::Rectangle => x.abs() < 1.0 && y.abs() < 1.0,
            Shape::Ellipse => x * x + y * y < 1.0,
            Shape::Diamond => x.abs() + y.abs() < 1.0,
            Shape::Blob { vertices } => {
                let n = vertices.len();
                (0..n).all(|i| {
                    let (ax, ay) = vertices[i];
                    let (bx, by) = vertices[(i + 1) % n];
                    (bx - ax) * (y - ay) - (by - ay) * (x - ax) > 0.0
                })
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub shape: Shape,
    /// Full extents along the shape's own axes, pixels.
    pub size: (f64, f64),
    pub start: (f64, f64),
    /// Pixels per frame.
    pub velocity: (f64, f64),
    pub angle: f64,
    /// Radians per frame.
    pub rotation_rate: f64,
    pub color: [u8; 3],
    /// Stripe contrast in `[0, 1)`.
    pub texture: f64,
    /// Region `[x0, y0, x1, y1]` the object bounces inside; the canvas when absent.
    pub bounds: Option<[f64; 4]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub name: String,
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub background: [u8; 3],
    /// Amplitude of per-pixel background noise.
    pub noise: f64,
    pub objects: Vec<ObjectSpec>,
    pub seed: u64,
}

/// Position on a segment `[lo, hi]` after travelling `dist` from `start`, bouncing
/// off both ends.
fn reflect(start: f64, dist: f64, lo: f64, hi: f64) -> f64 {
    let len = hi - lo;
    if len <= 0.0 {
        return lo;
    }
    let period = 2.0 * len;
    let u = start - lo + dist;
    let u = u - period * (u / period).floor();
    lo + if u <= len { u } else { period - u }
}

impl ObjectSpec {
    fn radius(&self) -> f64 {
        0.5 * self.size.0.hypot(self.size.1)
    }

    fn region(&self, width: usize, height: usize) -> [f64; 4] {
        self.bounds.unwrap_or([0.0, 0.0, width as f64, height as f64])
    }

    /// Centre and angle at frame `t`.
    pub fn pose(&self, t: usize, width: usize, height: usize) -> (f64, f64, f64) {
        let [x0, y0, x1, y1] = self.region(width, height);
        let r = self.radius();
        let t = t as f64;
        (
            reflect(self.start.0, self.velocity.0 * t, x0 + r, x1 - r),
            reflect(self.start.1, self.velocity.1 * t, y0 + r, y1 - r),
            self.angle + self.rotation_rate * t,
        )
    }

    /// Ground-truth rotated box at a pose.
    fn rotated_box(&self, cx: f64, cy: f64, angle: f64) -> Result<RotatedBox> {
        let (hw, hh) = (self.size.0 / 2.0, self.size.1 / 2.0);
        match &self.shape {
            Shape::Rectangle | Shape::Ellipse => RotatedBox::new(cx, cy, self.size.0, self.size.1, angle),
            Shape::Diamond => self.polygon_box(
                &[(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)],
                cx,
                cy,
                angle,
                hw,
                hh,
            ),
            Shape::Blob { vertices } => self.polygon_box(vertices, cx, cy, angle, hw, hh),
        }
    }

    fn polygon_box(&self, unit: &[(f64, f64)], cx: f64, cy: f64, angle: f64, hw: f64, hh: f64) -> Result<RotatedBox> {
        let (s, c) = angle.sin_cos();
        let pts: Vec<(f64, f64)> = unit
            .iter()
            .map(|&(x, y)| {
                let (lx, ly) = (x * hw, y * hh);
                (cx + c * lx - s * ly, cy + s * lx + c * ly)
            })
            .collect();
        let hull = convex_hull(&pts);
        let (ctr, a, w, h) = min_area_rect(&hull).ok_or_else(|| Error::InfeasibleScene("degenerate polygon".into()))?;
        RotatedBox::new(ctr.0, ctr.1, w, h, a)
    }

    /// Pixels whose centres fall inside the shape at a pose, plus per-pixel local
    /// coordinates for texturing.
    fn raster(&self, cx: f64, cy: f64, angle: f64, width: usize, height: usize) -> Vec<(usize, usize, f64)> {
        let r = self.radius().ceil() + 1.0;
        let (s, c) = angle.sin_cos();
        let (hw, hh) = (self.size.0 / 2.0, self.size.1 / 2.0);
        let r0 = ((cy - r).floor().max(0.0)) as usize;
        let r1 = ((cy + r).ceil().min(height as f64)) as usize;
        let c0 = ((cx - r).floor().max(0.0)) as usize;
        let c1 = ((cx + r).ceil().min(width as f64)) as usize;
        let mut out = Vec::new();
        for row in r0..r1 {
            for col in c0..c1 {
                let (dx, dy) = (col as f64 + 0.5 - cx, row as f64 + 0.5 - cy);
                let (lx, ly) = (c * dx + s * dy, -s * dx + c * dy);
                if self.shape.contains_unit(lx / hw, ly / hh) {
                    out.push((row, col, lx));
                }
            }
        }
        out
    }
}

fn hash2(seed: u64, a: u64, b: u64) -> f64 {
    // splitmix-style mixing, mapped to [-1, 1)
    let mut z = seed ^ a.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ b.wrapping_mul(0xc2b2_ae3d_27d4_eb4f);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 52) as f64 - 1.0
}

fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.frames == 0 {
            return Err(Error::InfeasibleScene(format!(
                "{}: empty canvas or no frames",
                self.name
            )));
        }
        for (i, o) in self.objects.iter().enumerate() {
            if !(o.size.0 > 0.0 && o.size.1 > 0.0) {
                return Err(Error::InfeasibleScene(format!("{}: object {i} has no area", self.name)));
            }
            let [x0, y0, x1, y1] = o.region(self.width, self.height);
            let d = 2.0 * o.radius();
            if d > x1 - x0 || d > y1 - y0 {
                return Err(Error::InfeasibleScene(format!(
                    "{}: object {i} ({:.1} px across) does not fit its {:.1}x{:.1} region",
                    self.name,
                    d,
                    x1 - x0,
                    y1 - y0
                )));
            }
            if let Shape::Blob { vertices } = &o.shape {
                if vertices.len() < 3 {
                    return Err(Error::InfeasibleScene(format!(
                        "{}: blob {i} has too few vertices",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Renders a scene. Later objects occlude earlier ones; masks hold visible pixels.
pub fn generate(spec: &SceneSpec) -> Result<AnnotatedSequence> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mut frames = Vec::with_capacity(spec.frames);
    let mut objects: Vec<ObjectAnnotation> = spec
        .objects
        .iter()
        .enumerate()
        .map(|(i, o)| ObjectAnnotation {
            id: i as u32 + 1,
            class_tag: o.shape.class_tag(),
            masks: Vec::with_capacity(spec.frames),
            rotated: Vec::with_capacity(spec.frames),
        })
        .collect();
    for t in 0..spec.frames {
        let mut img = RgbImage::new(w, h, spec.background)?;
        let mut frame_rng = ChaCha8Rng::seed_from_u64(spec.seed ^ (t as u64).wrapping_mul(0x2545_f491_4f6c_dd1d));
        for y in 0..h {
            for x in 0..w {
                // a fixed texture plus a little per-frame sensor noise
                let fixed = hash2(spec.seed, x as u64, y as u64);
                let shade = 12.0 * ((x as f64 / 23.0).sin() + (y as f64 / 31.0).cos());
                let n = spec.noise * (0.75 * fixed + 0.25 * frame_rng.random_range(-1.0..1.0)) + shade;
                let b = spec.background;
                img.put_pixel(
                    x,
                    y,
                    [to_u8(b[0] as f64 + n), to_u8(b[1] as f64 + n), to_u8(b[2] as f64 + n)],
                );
            }
        }
        let mut labels = vec![0u32; w * h];
        for (i, o) in spec.objects.iter().enumerate() {
            let (cx, cy, angle) = o.pose(t, w, h);
            let period = (o.size.0.min(o.size.1) / 3.0).max(3.0);
            for (row, col, lx) in o.raster(cx, cy, angle, w, h) {
                let f = 1.0 + o.texture * (TAU * lx / period).sin();
                let n = 4.0 * frame_rng.random_range(-1.0..1.0);
                img.put_pixel(col, row, o.color.map(|c| to_u8(c as f64 * f + n)));
                labels[row * w + col] = i as u32 + 1;
            }
            objects[i].rotated.push(Some(o.rotated_box(cx, cy, angle)?));
        }
        for (i, obj) in objects.iter_mut().enumerate() {
            let id = i as u32 + 1;
            obj.masks
                .push(BinaryMask::from_bits(h, w, labels.iter().map(|&l| l == id).collect())?);
        }
        frames.push(img);
    }
    Ok(AnnotatedSequence {
        name: spec.name.clone(),
        frames,
        objects,
    })
}

fn random_color<R: Rng>(rng: &mut R) -> [u8; 3] {
    // saturated hues, away from the grey background
    let hue = rng.random_range(0.0..6.0);
    let x = 1.0 - (hue % 2.0 - 1.0f64).abs();
    let (r, g, b) = match hue as u32 {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    let lo = 40.0;
    [r, g, b].map(|v: f64| to_u8(lo + v * (235.0 - lo)))
}

fn random_shape<R: Rng>(rng: &mut R) -> Shape {
    match rng.random_range(0..4) {
        0 => Shape::Rectangle,
        1 => Shape::Ellipse,
        2 => Shape::Diamond,
        _ => Shape::random_blob(rng),
    }
}

/// Scene families used for training, tests and studies.
impl SceneSpec {
    /// One textured object drifting (and possibly turning) across a `size x size` canvas.
    pub fn single_object(name: &str, seed: u64, size: usize, frames: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = size as f64;
        let a = rng.random_range(0.16..0.26) * s;
        let b = a * rng.random_range(0.6..1.0);
        let (ow, oh) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
        let speed = rng.random_range(0.5..2.0);
        let dir = rng.random_range(0.0..TAU);
        let object = ObjectSpec {
            shape: random_shape(&mut rng),
            size: (ow, oh),
            start: (rng.random_range(0.3..0.7) * s, rng.random_range(0.3..0.7) * s),
            velocity: (speed * dir.cos(), speed * dir.sin()),
            angle: rng.random_range(0.0..PI),
            rotation_rate: rng.random_range(-0.03..0.03),
            color: random_color(&mut rng),
            texture: rng.random_range(0.1..0.3),
            bounds: None,
        };
        Self {
            name: String::from(name),
            width: size,
            height: size,
            frames,
            background: [110, 110, 110],
            noise: 10.0,
            objects: vec![object],
            seed,
        }
    }

    /// One elongated object (aspect at least 2.5) spinning steadily.
    pub fn rotating_object(name: &str, seed: u64, size: usize, frames: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = size as f64;
        let long = rng.random_range(0.35..0.5) * s;
        let aspect = rng.random_range(2.5..4.0);
        let shape = if rng.random_bool(0.5) {
            Shape::Rectangle
        } else {
            Shape::Ellipse
        };
        let rate = rng.random_range(0.04..0.08) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let object = ObjectSpec {
            shape,
            size: (long, long / aspect),
            start: (s / 2.0, s / 2.0),
            velocity: (rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)),
            angle: rng.random_range(0.0..PI),
            rotation_rate: rate,
            color: random_color(&mut rng),
            texture: 0.2,
            bounds: None,
        };
        Self {
            name: String::from(name),
            width: size,
            height: size,
            frames,
            background: [110, 110, 110],
            noise: 10.0,
            objects: vec![object],
            seed,
        }
    }

    /// `n` objects, each confined to its own vertical band so they never touch.
    pub fn separated_objects(name: &str, seed: u64, n: usize, band: usize, height: usize, frames: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let objects = (0..n)
            .map(|i| {
                let x0 = (i * band) as f64;
                let d = band as f64 * rng.random_range(0.35..0.5);
                let (ow, oh) = (d * rng.random_range(0.6..0.7), d * rng.random_range(0.6..0.7));
                ObjectSpec {
                    shape: random_shape(&mut rng),
                    size: (ow, oh),
                    start: (x0 + band as f64 / 2.0, height as f64 * rng.random_range(0.3..0.7)),
                    velocity: (rng.random_range(-0.5..0.5), rng.random_range(-1.5..1.5)),
                    angle: rng.random_range(0.0..PI),
                    rotation_rate: rng.random_range(-0.02..0.02),
                    color: random_color(&mut rng),
                    texture: 0.2,
                    bounds: Some([x0 + 2.0, 0.0, x0 + band as f64 - 2.0, height as f64]),
                }
            })
            .collect();
        Self {
            name: String::from(name),
            width: n * band,
            height,
            frames,
            background: [110, 110, 110],
            noise: 10.0,
            objects,
            seed,
        }
    }
}
