//! Centered, unitary 2-D DFT.
//!
//! `X[k, l] = (mn)^{-1/2} Σ x[p, q] exp(-2πi ((k-cy)(p-cy)/m + (l-cx)(q-cx)/n))`
//! with `cy = m / 2`, `cx = n / 2`, so the DC sample sits at the grid center
//! and the inverse is also the adjoint.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::tensor::ComplexTensor;
use crate::error::{Error, Result};

/// Row and column plans for one grid size.
#[derive(Clone)]
pub struct Fourier2 {
    height: usize,
    width: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fourier2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fourier2")
            .field("height", &self.height)
            .field("width", &self.width)
            .finish()
    }
}

impl Fourier2 {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::shape(format!(
                "FFT grid must be non-empty, got {height}x{width}"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            height,
            width,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn forward(&self, x: &ComplexTensor) -> Result<ComplexTensor> {
        self.transform(x, false)
    }

    pub fn inverse(&self, x: &ComplexTensor) -> Result<ComplexTensor> {
        self.transform(x, true)
    }

    /// Transforms every channel of `x` independently.
    fn transform(&self, x: &ComplexTensor, inverse: bool) -> Result<ComplexTensor> {
        if x.height() != self.height || x.width() != self.width {
            return Err(Error::shape(format!(
                "FFT planned for {}x{}, got {}x{}",
                self.height,
                self.width,
                x.height(),
                x.width()
            )));
        }
        let (h, w) = (self.height, self.width);
        let (cy, cx) = (h / 2, w / 2);
        let (rows, cols) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        let scale = 1.0 / ((h * w) as f64).sqrt();
        let mut out = ComplexTensor::zeros(h, w, x.channels());
        let mut buf = vec![Complex64::new(0.0, 0.0); h * w];
        let mut column = vec![Complex64::new(0.0, 0.0); h];
        for c in 0..x.channels() {
            let src = x.channel(c);
            // ifftshift
            for y in 0..h {
                let sy = (y + cy) % h;
                for xx in 0..w {
                    buf[y * w + xx] = src[sy * w + (xx + cx) % w];
                }
            }
            rows.process(&mut buf);
            for xx in 0..w {
                for y in 0..h {
                    column[y] = buf[y * w + xx];
                }
                cols.process(&mut column);
                for y in 0..h {
                    buf[y * w + xx] = column[y];
                }
            }
            // fftshift
            let dst = out.channel_mut(c);
            for y in 0..h {
                let sy = (y + h - cy) % h;
                for xx in 0..w {
                    dst[y * w + xx] = buf[sy * w + (xx + w - cx) % w] * scale;
                }
            }
        }
        Ok(out)
    }
}

/// Centered unitary forward DFT of each channel.
pub fn fft2(x: &ComplexTensor) -> Result<ComplexTensor> {
    Fourier2::new(x.height(), x.width())?.forward(x)
}

/// Inverse (and adjoint) of [`fft2`].
pub fn ifft2(x: &ComplexTensor) -> Result<ComplexTensor> {
    Fourier2::new(x.height(), x.width())?.inverse(x)
}
