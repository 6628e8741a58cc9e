//! RGB float image buffer.

use std::path::Path;

use crate::error::{Error, Result};
use crate::real::{fl, Real};

/// Row-major interleaved RGB image, `data.len() == width * height * 3`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer<T: Real> {
    pub width: usize,
    pub height: usize,
    pub data: Vec<T>,
}

impl<T: Real> ImageBuffer<T> {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![T::zero(); width * height * 3] }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> [T; 3]) -> Self {
        let mut img = Self::zeros(width, height);
        for y in 0..height {
            for x in 0..width {
                img.set(x, y, f(x, y));
            }
        }
        img
    }

    pub fn constant(width: usize, height: usize, rgb: [T; 3]) -> Self {
        Self::from_fn(width, height, |_, _| rgb)
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize) -> usize {
        (y * self.width + x) * 3
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [T; 3] {
        let i = self.idx(x, y);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, rgb: [T; 3]) {
        let i = self.idx(x, y);
        self.data[i] = rgb[0];
        self.data[i + 1] = rgb[1];
        self.data[i + 2] = rgb[2];
    }

    pub fn n_values(&self) -> usize {
        self.data.len()
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn mean(&self) -> T {
        let sum = crate::parallel::sum_indexed(self.data.len(), T::zero(), |i| self.data[i]);
        sum / <T as Real>::from_usize(self.data.len())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Clamp every value into [0, 1] (loss-facing buffers live in that range).
    pub fn clamped01(&self) -> Self {
        let data = self.data.iter().map(|&v| v.max(T::zero()).min(T::one())).collect();
        Self { width: self.width, height: self.height, data }
    }

    pub fn mean_abs_diff(&self, other: &Self) -> Result<T> {
        if !self.same_shape(other) {
            return Err(Error::Contract(format!(
                "image shape mismatch: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        let n = self.data.len();
        let sum = crate::parallel::sum_indexed(n, T::zero(), |i| (self.data[i] - other.data[i]).abs());
        Ok(sum / <T as Real>::from_usize(n))
    }

    pub fn convert<U: Real>(&self) -> ImageBuffer<U> {
        ImageBuffer {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| <U as Real>::from_f64(v.to_f64())).collect(),
        }
    }

    /// Load an 8-bit PNG; values map to [0, 1] by /255, no gamma transform.
    pub fn load_png(path: &Path) -> Result<Self> {
        let img = image::open(path)?.to_rgb8();
        let (w, h) = (img.width() as usize, img.height() as usize);
        let data = img.as_raw().iter().map(|&b| fl::<T>(b as f64 / 255.0)).collect();
        Ok(Self { width: w, height: h, data })
    }

    /// Save as 8-bit PNG; values clamped to [0, 1] then scaled by 255.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let mut out = image::RgbImage::new(self.width as u32, self.height as u32);
        for y in 0..self.height {
            for x in 0..self.width {
                let [r, g, b] = self.get(x, y);
                let q = |v: T| (v.to_f64().clamp(0.0, 1.0) * 255.0).round() as u8;
                out.put_pixel(x as u32, y as u32, image::Rgb([q(r), q(g), q(b)]));
            }
        }
        out.save(path)?;
        Ok(())
    }
}
