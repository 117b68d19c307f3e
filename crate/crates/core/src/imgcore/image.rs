use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Bits per sample of a grayscale frame. 10-bit data lives unscaled in
/// 16-bit containers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum BitDepth {
    Eight,
    Ten,
    Sixteen,
}

impl BitDepth {
    pub fn bits(self) -> u32 {
        match self {
            BitDepth::Eight => 8,
            BitDepth::Ten => 10,
            BitDepth::Sixteen => 16,
        }
    }

    /// Largest representable value, `2^bits − 1`.
    pub fn max_value(self) -> u16 {
        ((1u32 << self.bits()) - 1) as u16
    }

    pub fn levels(self) -> usize {
        1usize << self.bits()
    }
}

impl TryFrom<u8> for BitDepth {
    type Error = Error;
    fn try_from(b: u8) -> Result<Self> {
        match b {
            8 => Ok(BitDepth::Eight),
            10 => Ok(BitDepth::Ten),
            16 => Ok(BitDepth::Sixteen),
            _ => Err(Error::UnsupportedFormat(format!("bit depth {b}"))),
        }
    }
}

impl From<BitDepth> for u8 {
    fn from(b: BitDepth) -> u8 {
        b.bits() as u8
    }
}

/// Row-major grayscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageGray {
    width: usize,
    height: usize,
    bit_depth: BitDepth,
    data: Vec<u16>,
}

impl ImageGray {
    pub fn new(width: usize, height: usize, bit_depth: BitDepth) -> Self {
        Self { width, height, bit_depth, data: vec![0; width * height] }
    }

    pub fn filled(width: usize, height: usize, bit_depth: BitDepth, value: u16) -> Self {
        Self { width, height, bit_depth, data: vec![value.min(bit_depth.max_value()); width * height] }
    }

    /// Wraps existing samples, checking length and range.
    pub fn from_vec(width: usize, height: usize, bit_depth: BitDepth, data: Vec<u16>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "{} samples for {width}x{height}",
                data.len()
            )));
        }
        let max = bit_depth.max_value();
        if let Some(v) = data.iter().find(|&&v| v > max) {
            return Err(Error::InvalidImage(format!("sample {v} exceeds {}-bit range", bit_depth.bits())));
        }
        Ok(Self { width, height, bit_depth, data })
    }

    /// Builds an image by evaluating `f(x, y)` per pixel.
    pub fn from_fn(width: usize, height: usize, bit_depth: BitDepth, mut f: impl FnMut(usize, usize) -> u16) -> Self {
        let max = bit_depth.max_value();
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y).min(max));
            }
        }
        Self { width, height, bit_depth, data }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }
    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }
    #[inline]
    pub fn bit_depth(&self) -> BitDepth {
        self.bit_depth
    }
    #[inline]
    pub fn data(&self) -> &[u16] {
        &self.data
    }
    pub fn into_data(self) -> Vec<u16> {
        self.data
    }
    pub fn len(&self) -> usize {
        self.data.len()
    }
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
    pub fn full_scale(&self) -> u16 {
        self.bit_depth.max_value()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u16) {
        self.data[y * self.width + x] = v.min(self.bit_depth.max_value());
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }

    pub fn to_plane<T: Real>(&self) -> Plane<T> {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| T::lit(v as f64)).collect(),
        }
    }

    /// Rounds and clamps a float plane into a grayscale image.
    pub fn from_plane<T: Real>(plane: &Plane<T>, bit_depth: BitDepth) -> Self {
        let max = bit_depth.max_value() as f64;
        let data = plane
            .data
            .iter()
            .map(|v| {
                let f = v.as_f64();
                if f.is_finite() {
                    f.round().clamp(0.0, max) as u16
                } else {
                    0
                }
            })
            .collect();
        Self { width: plane.width, height: plane.height, bit_depth, data }
    }

    /// Rotates by 90° clockwise.
    pub fn rotate90(&self) -> Self {
        let (w, h) = (self.width, self.height);
        Self::from_fn(h, w, self.bit_depth, |x, y| self.get(y, h - 1 - x))
    }
}

/// RGB image, interleaved samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRgb {
    pub width: usize,
    pub height: usize,
    pub bit_depth: BitDepth,
    pub data: Vec<[u16; 3]>,
}

impl ImageRgb {
    pub fn new(width: usize, height: usize, bit_depth: BitDepth) -> Self {
        Self { width, height, bit_depth, data: vec![[0; 3]; width * height] }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [u16; 3] {
        self.data[y * self.width + x]
    }
}

/// Row-major boolean mask.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![false; width * height] }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![true; width * height] }
    }

    pub fn from_vec(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::DimensionMismatch(format!("{} bits for {width}x{height}", bits.len())));
        }
        Ok(Self { width, height, bits })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self { width, height, bits }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }
    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }
    #[inline]
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }
    #[inline]
    pub fn bits_mut(&mut self) -> &mut [bool] {
        &mut self.bits
    }
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }
    /// Out-of-bounds reads return `false`.
    #[inline]
    pub fn get_signed(&self, x: isize, y: isize) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height && self.get(x as usize, y as usize)
    }
    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn same_shape(&self, other: &BinaryMask) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.same_shape(other) && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    pub fn and(&self, other: &BinaryMask) -> BinaryMask {
        debug_assert!(self.same_shape(other));
        Self {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().zip(&other.bits).map(|(&a, &b)| a && b).collect(),
        }
    }

    pub fn or(&self, other: &BinaryMask) -> BinaryMask {
        debug_assert!(self.same_shape(other));
        Self {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().zip(&other.bits).map(|(&a, &b)| a || b).collect(),
        }
    }

    /// Intersection over union; 1.0 for two empty masks.
    pub fn iou(&self, other: &BinaryMask) -> f64 {
        let (mut inter, mut union) = (0usize, 0usize);
        for (&a, &b) in self.bits.iter().zip(&other.bits) {
            inter += (a && b) as usize;
            union += (a || b) as usize;
        }
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }

    /// Bounding box `(x0, y0, x1, y1)`, exclusive upper bounds.
    pub fn bbox(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bb: Option<(usize, usize, usize, usize)> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    bb = Some(match bb {
                        None => (x, y, x + 1, y + 1),
                        Some((a, b, c, d)) => (a.min(x), b.min(y), c.max(x + 1), d.max(y + 1)),
                    });
                }
            }
        }
        bb
    }

    pub fn centroid(&self) -> Option<(f64, f64)> {
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    sx += x as f64;
                    sy += y as f64;
                    n += 1;
                }
            }
        }
        (n > 0).then(|| (sx / n as f64, sy / n as f64))
    }

    /// 8-connected component labels (0 = background) and component count.
    pub fn components(&self) -> (Vec<u32>, u32) {
        let mut labels = vec![0u32; self.bits.len()];
        let mut next = 0u32;
        let mut stack = Vec::new();
        for start in 0..self.bits.len() {
            if !self.bits[start] || labels[start] != 0 {
                continue;
            }
            next += 1;
            labels[start] = next;
            stack.push(start);
            while let Some(i) = stack.pop() {
                let (x, y) = ((i % self.width) as isize, (i / self.width) as isize);
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (nx, ny) = (x + dx, y + dy);
                        if self.get_signed(nx, ny) {
                            let j = ny as usize * self.width + nx as usize;
                            if labels[j] == 0 {
                                labels[j] = next;
                                stack.push(j);
                            }
                        }
                    }
                }
            }
        }
        (labels, next)
    }

    pub fn rotate90(&self) -> Self {
        let (w, h) = (self.width, self.height);
        Self::from_fn(h, w, |x, y| self.get(y, h - 1 - x))
    }

    /// Translated copy; pixels shifted outside the frame are dropped.
    pub fn translated(&self, dx: isize, dy: isize) -> Self {
        Self::from_fn(self.width, self.height, |x, y| self.get_signed(x as isize - dx, y as isize - dy))
    }
}

/// Row-major plane of real values (score planes, depth, normals components).
#[derive(Debug, Clone, PartialEq)]
pub struct Plane<T> {
    pub width: usize,
    pub height: usize,
    pub data: Vec<T>,
}

impl<T: Copy> Plane<T> {
    pub fn filled(width: usize, height: usize, v: T) -> Self {
        Self { width, height, data: vec![v; width * height] }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: T) {
        self.data[y * self.width + x] = v;
    }
}

impl<T: Real> Plane<T> {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, T::zero())
    }

    /// Bilinear sample at continuous coordinates; `None` outside the
    /// interpolation support.
    pub fn sample_bilinear(&self, x: T, y: T) -> Option<T> {
        bilinear(self.width, self.height, x, y, |xi, yi| self.data[yi * self.width + xi])
    }
}

/// Bilinear interpolation over a `width × height` grid read through `at`.
/// Coordinates are pixel centers; samples within half a pixel beyond the last
/// center are rejected.
pub fn bilinear<T: Real>(width: usize, height: usize, x: T, y: T, at: impl Fn(usize, usize) -> T) -> Option<T> {
    if !(x.is_finite() && y.is_finite()) || width == 0 || height == 0 {
        return None;
    }
    let eps = T::lit(1e-9);
    let maxx = T::from_usize_lossy(width - 1);
    let maxy = T::from_usize_lossy(height - 1);
    if x < -eps || y < -eps || x > maxx + eps || y > maxy + eps {
        return None;
    }
    let x = x.max(T::zero()).min(maxx);
    let y = y.max(T::zero()).min(maxy);
    let x0 = x.floor().to_usize().unwrap_or(0);
    let y0 = y.floor().to_usize().unwrap_or(0);
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let fx = x - T::from_usize_lossy(x0);
    let fy = y - T::from_usize_lossy(y0);
    let one = T::one();
    let top = at(x0, y0) * (one - fx) + at(x1, y0) * fx;
    let bot = at(x0, y1) * (one - fx) + at(x1, y1) * fx;
    Some(top * (one - fy) + bot * fy)
}

impl ImageGray {
    /// Bilinear sample in intensity units.
    pub fn sample_bilinear<T: Real>(&self, x: T, y: T) -> Option<T> {
        bilinear(self.width, self.height, x, y, |xi, yi| T::lit(self.get(xi, yi) as f64))
    }
}
