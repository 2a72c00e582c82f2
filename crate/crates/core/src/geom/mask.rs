use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A per-pixel foreground flag image. Immutable once built.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl core::fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("BinaryMask")
            .field("height", &self.height)
            .field("width", &self.width)
            .field("foreground", &self.count())
            .finish()
    }
}

impl BinaryMask {
    pub fn empty(height: usize, width: usize) -> Result<Self> {
        Self::from_bits(height, width, vec![false; height * width])
    }

    pub fn from_bits(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidArgument(alloc::format!(
                "mask dimensions must be positive, got {}x{}",
                height,
                width
            )));
        }
        if bits.len() != height * width {
            return Err(Error::InvalidArgument(alloc::format!(
                "mask of {}x{} needs {} flags, got {}",
                height,
                width,
                height * width,
                bits.len()
            )));
        }
        Ok(Self { height, width, bits })
    }

    /// Builds a mask by evaluating `f(row, col)` for every pixel.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        let mut bits = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                bits.push(f(r, c));
            }
        }
        Self::from_bits(height, width, bits)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    /// Like [`get`](Self::get) but `false` outside the image.
    #[inline]
    pub fn get_signed(&self, row: isize, col: isize) -> bool {
        row >= 0
            && col >= 0
            && (row as usize) < self.height
            && (col as usize) < self.width
            && self.get(row as usize, col as usize)
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub(crate) fn check_same_dims(&self, other: &Self) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                actual: other.dims(),
            });
        }
        Ok(())
    }

    /// `(|a and b|, |a or b|)`.
    pub fn overlap_counts(&self, other: &Self) -> Result<(usize, usize)> {
        self.check_same_dims(other)?;
        let mut inter = 0;
        let mut union = 0;
        for (&a, &b) in self.bits.iter().zip(&other.bits) {
            inter += (a && b) as usize;
            union += (a || b) as usize;
        }
        Ok((inter, union))
    }

    pub fn is_subset_of(&self, other: &Self) -> Result<bool> {
        self.check_same_dims(other)?;
        Ok(self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b))
    }

    /// Per-row `(first, last)` foreground columns; `None` for empty rows.
    pub fn row_extents(&self) -> Vec<Option<(usize, usize)>> {
        (0..self.height)
            .map(|r| {
                let row = &self.bits[r * self.width..(r + 1) * self.width];
                let first = row.iter().position(|&b| b)?;
                let last = row.iter().rposition(|&b| b)?;
                Some((first, last))
            })
            .collect()
    }

    /// Foreground centroid in continuous coordinates (pixel centres).
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let mut sx = 0.0;
        let mut sy = 0.0;
        let mut n = 0usize;
        for r in 0..self.height {
            for c in 0..self.width {
                if self.get(r, c) {
                    sx += c as f64 + 0.5;
                    sy += r as f64 + 0.5;
                    n += 1;
                }
            }
        }
        (n > 0).then(|| (sx / n as f64, sy / n as f64))
    }

    /// Morphological erosion with a `(2 * radius + 1)` square structuring element.
    /// Pixels outside the image count as background.
    pub fn eroded(&self, radius: usize) -> Self {
        if radius == 0 {
            return self.clone();
        }
        let r = radius as isize;
        let bits = (0..self.height * self.width)
            .map(|i| {
                let (y, x) = ((i / self.width) as isize, (i % self.width) as isize);
                self.bits[i] && (-r..=r).all(|dy| (-r..=r).all(|dx| self.get_signed(y + dy, x + dx)))
            })
            .collect();
        Self {
            height: self.height,
            width: self.width,
            bits,
        }
    }

    /// Inner boundary: foreground pixels with a 4-neighbour that is background or
    /// outside the image.
    pub fn boundary(&self) -> Self {
        let bits = (0..self.height * self.width)
            .map(|i| {
                let (y, x) = ((i / self.width) as isize, (i % self.width) as isize);
                self.bits[i]
                    && !(self.get_signed(y - 1, x)
                        && self.get_signed(y + 1, x)
                        && self.get_signed(y, x - 1)
                        && self.get_signed(y, x + 1))
            })
            .collect();
        Self {
            height: self.height,
            width: self.width,
            bits,
        }
    }

    /// Dilation with a Euclidean disk of the given radius (pixel-centre distance).
    pub fn dilated_disk(&self, radius: usize) -> Self {
        if radius == 0 {
            return self.clone();
        }
        let r = radius as isize;
        let offsets: Vec<(isize, isize)> = (-r..=r)
            .flat_map(|dy| (-r..=r).map(move |dx| (dy, dx)))
            .filter(|&(dy, dx)| dy * dy + dx * dx <= r * r)
            .collect();
        let mut bits = vec![false; self.height * self.width];
        for y in 0..self.height as isize {
            for x in 0..self.width as isize {
                if !self.get(y as usize, x as usize) {
                    continue;
                }
                for &(dy, dx) in &offsets {
                    let (yy, xx) = (y + dy, x + dx);
                    if yy >= 0 && xx >= 0 && (yy as usize) < self.height && (xx as usize) < self.width {
                        bits[yy as usize * self.width + xx as usize] = true;
                    }
                }
            }
        }
        Self {
            height: self.height,
            width: self.width,
            bits,
        }
    }
}
