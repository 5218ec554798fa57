use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};

/// Multi-channel complex image stored channel-major: `data[(c * height + y) * width + x]`.
///
/// `Complex64` is `repr(C)` so the backing buffer is the interleaved
/// real/imaginary layout used by the tensor file format.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexTensor {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<Complex64>,
}

/// A stack of per-coil images `u = (u_1, ..., u_Nc)`.
pub type ComplexImageStack = ComplexTensor;

impl ComplexTensor {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![Complex64::new(0.0, 0.0); height * width * channels],
        }
    }

    pub fn from_vec(
        height: usize,
        width: usize,
        channels: usize,
        data: Vec<Complex64>,
    ) -> Result<Self> {
        if data.len() != height * width * channels {
            return Err(Error::shape(format!(
                "{} elements for shape ({height}, {width}, {channels})",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    /// Builds a tensor from per-channel real and imaginary planes.
    pub fn from_parts(
        height: usize,
        width: usize,
        channels: usize,
        real: &[f64],
        imag: &[f64],
    ) -> Result<Self> {
        let len = height * width * channels;
        if real.len() != len || imag.len() != len {
            return Err(Error::shape(format!(
                "real/imag planes of length {}/{} for {len} elements",
                real.len(),
                imag.len()
            )));
        }
        let data = real
            .iter()
            .zip(imag)
            .map(|(&re, &im)| Complex64::new(re, im))
            .collect();
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    /// Stacks single-channel images of identical size into one tensor.
    pub fn stack(images: &[ComplexTensor]) -> Result<Self> {
        let first = images
            .first()
            .ok_or_else(|| Error::shape("cannot stack zero images"))?;
        let (h, w) = (first.height, first.width);
        let mut data = Vec::with_capacity(h * w * images.len());
        for img in images {
            if img.height != h || img.width != w || img.channels != 1 {
                return Err(Error::shape(format!(
                    "stack expects ({h}, {w}, 1) images, got {:?}",
                    img.shape()
                )));
            }
            data.extend_from_slice(&img.data);
        }
        Self::from_vec(h, w, images.len(), data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `(height, width, channels)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    pub fn channel(&self, c: usize) -> &[Complex64] {
        let n = self.pixels();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [Complex64] {
        let n = self.pixels();
        &mut self.data[c * n..(c + 1) * n]
    }

    /// Copies channel `c` out as a single-channel tensor.
    pub fn channel_image(&self, c: usize) -> ComplexTensor {
        ComplexTensor {
            height: self.height,
            width: self.width,
            channels: 1,
            data: self.channel(c).to_vec(),
        }
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> Complex64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn set(&mut self, y: usize, x: usize, c: usize, value: Complex64) {
        self.data[(c * self.height + y) * self.width + x] = value;
    }

    pub fn real_part(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.re).collect()
    }

    pub fn imag_part(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.im).collect()
    }

    pub fn same_shape(&self, other: &ComplexTensor) -> bool {
        self.shape() == other.shape()
    }

    pub(crate) fn check_same_shape(&self, other: &ComplexTensor, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::shape(format!(
                "{what}: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )))
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn scale(&mut self, factor: f64) {
        for z in &mut self.data {
            *z *= factor;
        }
    }

    pub fn scaled(&self, factor: f64) -> ComplexTensor {
        let mut out = self.clone();
        out.scale(factor);
        out
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: Complex64, other: &ComplexTensor) -> Result<()> {
        self.check_same_shape(other, "axpy")?;
        for (s, o) in self.data.iter_mut().zip(&other.data) {
            *s += a * o;
        }
        Ok(())
    }

    pub fn add(&self, other: &ComplexTensor) -> Result<ComplexTensor> {
        let mut out = self.clone();
        out.axpy(Complex64::new(1.0, 0.0), other)?;
        Ok(out)
    }

    pub fn sub(&self, other: &ComplexTensor) -> Result<ComplexTensor> {
        let mut out = self.clone();
        out.axpy(Complex64::new(-1.0, 0.0), other)?;
        Ok(out)
    }

    pub fn map(&self, mut f: impl FnMut(Complex64) -> Complex64) -> ComplexTensor {
        ComplexTensor {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }
}

/// `Σ conj(x_i) y_i`, conjugate-linear in the first argument.
pub fn inner_product(x: &ComplexTensor, y: &ComplexTensor) -> Result<Complex64> {
    x.check_same_shape(y, "inner_product")?;
    Ok(x
        .data
        .iter()
        .zip(&y.data)
        .map(|(a, b)| a.conj() * b)
        .sum())
}

/// Real-valued image, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct RealImage {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl RealImage {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![0.0; height * width],
        }
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::shape(format!(
                "{} values for a {height}x{width} image",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn same_shape(&self, other: &RealImage) -> bool {
        self.height == other.height && self.width == other.width
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> RealImage {
        RealImage {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Pointwise modulus of a single-channel complex image.
pub fn magnitude(x: &ComplexTensor) -> Result<RealImage> {
    if x.channels() != 1 {
        return Err(Error::shape(format!(
            "magnitude expects one channel, got {}",
            x.channels()
        )));
    }
    RealImage::from_vec(
        x.height(),
        x.width(),
        x.data().iter().map(|z| z.norm()).collect(),
    )
}
