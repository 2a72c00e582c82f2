//! 8-bit RGB frames and the square crops fed to the network.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::geom::BinaryMask;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Interleaved RGB image, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl core::fmt::Debug for RgbImage {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "RgbImage({}x{})", self.width, self.height)
    }
}

impl RgbImage {
    pub fn new(width: usize, height: usize, fill: [u8; 3]) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("image dimensions must be positive".into()));
        }
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&fill);
        }
        Ok(Self { width, height, data })
    }

    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height * 3 {
            return Err(Error::InvalidArgument(alloc::format!(
                "{} bytes do not form a {width}x{height} RGB image",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn put_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn mean_color(&self) -> [f64; 3] {
        let mut s = [0u64; 3];
        for px in self.data.chunks_exact(3) {
            for c in 0..3 {
                s[c] += px[c] as u64;
            }
        }
        let n = (self.width * self.height) as f64;
        [s[0] as f64 / n, s[1] as f64 / n, s[2] as f64 / n]
    }
}

/// A square window of a frame resampled to `out x out` pixels.
///
/// Patch pixel `p` has its centre at `p + 0.5`; it maps to frame position
/// `center + (p + 0.5 - out / 2) * side / out` along each axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CropWindow {
    pub cx: f64,
    pub cy: f64,
    pub side: f64,
    pub out: usize,
}

impl CropWindow {
    pub fn new(cx: f64, cy: f64, side: f64, out: usize) -> Result<Self> {
        if !(side.is_finite() && side > 0.0 && cx.is_finite() && cy.is_finite()) || out == 0 {
            return Err(Error::InvalidArgument(alloc::format!(
                "crop window side {side} at ({cx}, {cy})"
            )));
        }
        Ok(Self { cx, cy, side, out })
    }

    /// Frame pixels per patch pixel.
    pub fn scale(&self) -> f64 {
        self.side / self.out as f64
    }

    /// Continuous patch coordinates to frame coordinates.
    pub fn to_frame(&self, px: f64, py: f64) -> (f64, f64) {
        let half = self.out as f64 / 2.0;
        (
            self.cx + (px - half) * self.scale(),
            self.cy + (py - half) * self.scale(),
        )
    }

    /// Continuous frame coordinates to patch coordinates.
    pub fn to_patch(&self, fx: f64, fy: f64) -> (f64, f64) {
        let half = self.out as f64 / 2.0;
        (
            (fx - self.cx) / self.scale() + half,
            (fy - self.cy) / self.scale() + half,
        )
    }

    /// Bilinear crop of `img`, normalised per channel as `(v - mean) / scale` and laid
    /// out as a `[3, out, out]` tensor. Samples falling outside the frame read the
    /// frame's mean colour.
    pub fn crop<T: Scalar>(&self, img: &RgbImage, mean: [f64; 3], scale: [f64; 3]) -> Tensor<T> {
        let n = self.out;
        let fill = img.mean_color();
        let (w, h) = (img.width as isize, img.height as isize);
        let fetch = |x: isize, y: isize, c: usize| -> f64 {
            if x < 0 || y < 0 || x >= w || y >= h {
                fill[c]
            } else {
                img.data[((y * w + x) * 3) as usize + c] as f64
            }
        };
        let mut out = vec![T::zero(); 3 * n * n];
        let s = self.scale();
        for py in 0..n {
            let fy = self.cy + (py as f64 + 0.5 - n as f64 / 2.0) * s - 0.5;
            let y0 = fy.floor();
            let ty = fy - y0;
            let y0 = y0 as isize;
            for px in 0..n {
                let fx = self.cx + (px as f64 + 0.5 - n as f64 / 2.0) * s - 0.5;
                let x0 = fx.floor();
                let tx = fx - x0;
                let x0 = x0 as isize;
                for c in 0..3 {
                    let v = (1.0 - ty) * ((1.0 - tx) * fetch(x0, y0, c) + tx * fetch(x0 + 1, y0, c))
                        + ty * ((1.0 - tx) * fetch(x0, y0 + 1, c) + tx * fetch(x0 + 1, y0 + 1, c));
                    out[(c * n + py) * n + px] = T::of((v - mean[c]) / scale[c]);
                }
            }
        }
        Tensor::from_vec(&[3, n, n], out).expect("crop shape")
    }

    /// Nearest-neighbour crop of a frame mask; outside the frame is background.
    pub fn crop_mask(&self, mask: &BinaryMask) -> BinaryMask {
        let s = self.scale();
        let half = self.out as f64 / 2.0;
        BinaryMask::from_fn(self.out, self.out, |r, c| {
            let fx = (self.cx + (c as f64 + 0.5 - half) * s).floor() as isize;
            let fy = (self.cy + (r as f64 + 0.5 - half) * s).floor() as isize;
            mask.get_signed(fy, fx)
        })
        .expect("positive crop side")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient_image() -> RgbImage {
        let mut img = RgbImage::new(20, 10, [0, 0, 0]).unwrap();
        for y in 0..10 {
            for x in 0..20 {
                img.put_pixel(x, y, [x as u8 * 10, y as u8 * 10, 7]);
            }
        }
        img
    }

    #[test]
    fn identity_crop_reproduces_pixels() {
        let img = gradient_image();
        let win = CropWindow::new(10.0, 5.0, 10.0, 10).unwrap();
        let t: Tensor<f64> = win.crop(&img, [0.0; 3], [1.0; 3]);
        for py in 0..10 {
            for px in 0..10 {
                assert_eq!(t.at3(0, py, px), ((px + 5) * 10) as f64);
                assert_eq!(t.at3(1, py, px), (py * 10) as f64);
            }
        }
    }

    #[test]
    fn outside_reads_mean_and_normalises() {
        let img = RgbImage::new(4, 4, [100, 50, 10]).unwrap();
        let win = CropWindow::new(-50.0, -50.0, 8.0, 4).unwrap();
        let t: Tensor<f64> = win.crop(&img, [100.0, 0.0, 0.0], [1.0, 50.0, 1.0]);
        assert!(t.data()[..16].iter().all(|&v| v == 0.0));
        assert!(t.data()[16..32].iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn coordinate_maps_invert() {
        let win = CropWindow::new(33.3, 12.0, 71.0, 127).unwrap();
        let (fx, fy) = win.to_frame(3.25, 100.0);
        let (px, py) = win.to_patch(fx, fy);
        assert!((px - 3.25).abs() < 1e-9 && (py - 100.0).abs() < 1e-9);
        assert_eq!(win.to_frame(63.5, 63.5), (33.3, 12.0));
    }

    #[test]
    fn mask_crop_scales_area() {
        let m = BinaryMask::from_fn(100, 100, |r, c| (40..60).contains(&r) && (40..60).contains(&c)).unwrap();
        let up = CropWindow::new(50.0, 50.0, 50.0, 100).unwrap().crop_mask(&m);
        assert_eq!(up.count(), 1600);
        let same = CropWindow::new(50.0, 50.0, 100.0, 100).unwrap().crop_mask(&m);
        assert_eq!(same, m);
    }
}
