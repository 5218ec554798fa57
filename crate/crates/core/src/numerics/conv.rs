//! "Same"-padded, stride-1 2-D cross-correlation on channel-major planes.
//!
//! A complex tensor is treated as two real tensors: the real part goes
//! through the real bank and the imaginary part through the imaginary bank,
//! with no mixing between the two paths. The resulting map is R-linear, so
//! `conv2d_transpose` is its adjoint under the real inner product
//! `Re <x, y>`; the complex identity also holds when both banks are equal.

use matrixmultiply::dgemm;
use rustfft::num_complex::Complex64;

use super::tensor::ComplexTensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct KernelShape {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
}

impl KernelShape {
    pub fn new(out_channels: usize, in_channels: usize, kernel_h: usize, kernel_w: usize) -> Self {
        Self {
            out_channels,
            in_channels,
            kernel_h,
            kernel_w,
        }
    }

    pub fn square(out_channels: usize, in_channels: usize, kernel: usize) -> Self {
        Self::new(out_channels, in_channels, kernel, kernel)
    }

    pub fn len(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel_h * self.kernel_w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Inputs feeding one output sample.
    pub fn fan_in(&self) -> usize {
        self.in_channels * self.kernel_h * self.kernel_w
    }

    /// Outputs one input sample contributes to.
    pub fn fan_out(&self) -> usize {
        self.out_channels * self.kernel_h * self.kernel_w
    }

    fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::shape(format!("empty kernel shape {self:?}")));
        }
        if self.kernel_h % 2 == 0 || self.kernel_w % 2 == 0 {
            return Err(Error::shape(format!(
                "same padding needs odd kernel sizes, got {}x{}",
                self.kernel_h, self.kernel_w
            )));
        }
        Ok(())
    }

    /// Flat index of `w[o, c, i, j]`.
    pub fn index(&self, o: usize, c: usize, i: usize, j: usize) -> usize {
        ((o * self.in_channels + c) * self.kernel_h + i) * self.kernel_w + j
    }
}

/// Kernels `(out_channels, in_channels, kh, kw)` for the real and imaginary paths.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvKernelBank {
    shape: KernelShape,
    real: Vec<f64>,
    imag: Vec<f64>,
}

impl ConvKernelBank {
    pub fn zeros(shape: KernelShape) -> Self {
        Self {
            shape,
            real: vec![0.0; shape.len()],
            imag: vec![0.0; shape.len()],
        }
    }

    pub fn new(shape: KernelShape, real: Vec<f64>, imag: Vec<f64>) -> Result<Self> {
        shape.validate()?;
        if real.len() != shape.len() || imag.len() != shape.len() {
            return Err(Error::shape(format!(
                "kernel bank {shape:?} needs {} weights per path, got {}/{}",
                shape.len(),
                real.len(),
                imag.len()
            )));
        }
        Ok(Self { shape, real, imag })
    }

    /// Delta kernel at the center of each `(o, o)` slice, zero elsewhere.
    pub fn identity(channels: usize, kernel: usize) -> Result<Self> {
        let shape = KernelShape::square(channels, channels, kernel);
        shape.validate()?;
        let mut w = vec![0.0; shape.len()];
        for o in 0..channels {
            w[shape.index(o, o, kernel / 2, kernel / 2)] = 1.0;
        }
        Self::new(shape, w.clone(), w)
    }

    pub fn shape(&self) -> KernelShape {
        self.shape
    }

    pub fn real(&self) -> &[f64] {
        &self.real
    }

    pub fn imag(&self) -> &[f64] {
        &self.imag
    }

    pub fn real_mut(&mut self) -> &mut [f64] {
        &mut self.real
    }

    pub fn imag_mut(&mut self) -> &mut [f64] {
        &mut self.imag
    }

    pub fn banks_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.real, &mut self.imag)
    }
}

/// Spatial geometry of a single real-path correlation.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Geometry {
    pub height: usize,
    pub width: usize,
    pub shape: KernelShape,
}

impl Geometry {
    fn pixels(&self) -> usize {
        self.height * self.width
    }

    /// Row length of the zero-padded planes.
    fn wide(&self) -> usize {
        self.width + 2 * (self.shape.kernel_w / 2)
    }

    /// Length of one padded plane, with slack so every tap offset of a
    /// `height × wide` window stays in bounds.
    fn plane_stride(&self) -> usize {
        let (py, px) = (self.shape.kernel_h / 2, self.shape.kernel_w / 2);
        (self.height + 2 * py) * self.wide() + 2 * px
    }

    /// Copies `(c, h, w)` planes into zero-padded planes.
    fn pad(&self, input: &[f64], channels: usize) -> Vec<f64> {
        let (h, w, ww, ps) = (self.height, self.width, self.wide(), self.plane_stride());
        let (py, px) = (self.shape.kernel_h / 2, self.shape.kernel_w / 2);
        let mut out = vec![0.0; channels * ps];
        for c in 0..channels {
            for y in 0..h {
                let dst = c * ps + (y + py) * ww + px;
                out[dst..dst + w].copy_from_slice(&input[(c * h + y) * w..][..w]);
            }
        }
        out
    }

    /// Copies `(c, h, w)` planes into `(c, h, wide)` rows with zero tails.
    fn widen(&self, input: &[f64], channels: usize) -> Vec<f64> {
        let (h, w, ww) = (self.height, self.width, self.wide());
        let mut out = vec![0.0; channels * h * ww];
        for (dst, src) in out.chunks_exact_mut(ww).zip(input.chunks_exact(w)) {
            dst[..w].copy_from_slice(src);
        }
        out
    }

    /// Offset of tap `(i, j)` inside a padded plane.
    fn tap(&self, i: usize, j: usize) -> usize {
        i * self.wide() + j
    }

    /// `out = w ⋆ input + bias`.
    ///
    /// Each tap is one GEMM between the `(out, in)` weight slice and a
    /// shifted view of the padded input, accumulated in wide rows.
    pub fn correlate(&self, input: &[f64], weights: &[f64], bias: Option<&[f64]>, out: &mut [f64]) {
        let (h, w, ww) = (self.height, self.width, self.wide());
        let s = self.shape;
        let (m, c, taps) = (s.out_channels, s.in_channels, s.kernel_h * s.kernel_w);
        debug_assert_eq!(input.len(), c * self.pixels());
        debug_assert_eq!(out.len(), m * self.pixels());
        let padded = self.pad(input, c);
        let n = h * ww;
        let mut acc = vec![0.0; m * n];
        for i in 0..s.kernel_h {
            for j in 0..s.kernel_w {
                // SAFETY: the weight view is m x c with strides (fan_in, taps)
                // starting at tap (i, j); the input view is c x n inside the
                // padded planes (bounded by plane_stride); acc is m x n.
                unsafe {
                    dgemm(
                        m,
                        c,
                        n,
                        1.0,
                        weights.as_ptr().add(i * s.kernel_w + j),
                        s.fan_in() as isize,
                        taps as isize,
                        padded.as_ptr().add(self.tap(i, j)),
                        self.plane_stride() as isize,
                        1,
                        1.0,
                        acc.as_mut_ptr(),
                        n as isize,
                        1,
                    );
                }
            }
        }
        for (o, (dst, src)) in out.chunks_exact_mut(h * w).zip(acc.chunks_exact(n)).enumerate() {
            let b = bias.map_or(0.0, |b| b[o]);
            for (drow, srow) in dst.chunks_exact_mut(w).zip(src.chunks_exact(ww)) {
                for (d, &v) in drow.iter_mut().zip(srow) {
                    *d = v + b;
                }
            }
        }
    }

    /// `grad_in += wᵀ ⋆ grad_out` (adjoint of [`Geometry::correlate`] without bias).
    pub fn correlate_transpose(&self, grad_out: &[f64], weights: &[f64], grad_in: &mut [f64]) {
        let (h, w, ww) = (self.height, self.width, self.wide());
        let s = self.shape;
        let (m, c, taps) = (s.out_channels, s.in_channels, s.kernel_h * s.kernel_w);
        let (py, px) = (s.kernel_h / 2, s.kernel_w / 2);
        debug_assert_eq!(grad_out.len(), m * self.pixels());
        debug_assert_eq!(grad_in.len(), c * self.pixels());
        let g = self.widen(grad_out, m);
        let n = h * ww;
        let ps = self.plane_stride();
        let mut acc = vec![0.0; c * ps];
        for i in 0..s.kernel_h {
            for j in 0..s.kernel_w {
                // SAFETY: transposed weight view c x m; g is m x n; the
                // output view is c x n inside the padded planes.
                unsafe {
                    dgemm(
                        c,
                        m,
                        n,
                        1.0,
                        weights.as_ptr().add(i * s.kernel_w + j),
                        taps as isize,
                        s.fan_in() as isize,
                        g.as_ptr(),
                        n as isize,
                        1,
                        1.0,
                        acc.as_mut_ptr().add(self.tap(i, j)),
                        ps as isize,
                        1,
                    );
                }
            }
        }
        for ch in 0..c {
            for y in 0..h {
                let src = &acc[ch * ps + (y + py) * ww + px..][..w];
                let dst = &mut grad_in[(ch * h + y) * w..][..w];
                for (d, &v) in dst.iter_mut().zip(src) {
                    *d += v;
                }
            }
        }
    }

    /// Accumulates `∂L/∂w` and `∂L/∂bias` given the layer input and `∂L/∂out`.
    pub fn weight_grad(
        &self,
        input: &[f64],
        grad_out: &[f64],
        grad_w: &mut [f64],
        grad_bias: Option<&mut [f64]>,
    ) {
        let s = self.shape;
        let (m, c, taps) = (s.out_channels, s.in_channels, s.kernel_h * s.kernel_w);
        let padded = self.pad(input, c);
        let g = self.widen(grad_out, m);
        let n = self.height * self.wide();
        debug_assert_eq!(grad_w.len(), s.len());
        for i in 0..s.kernel_h {
            for j in 0..s.kernel_w {
                // SAFETY: g is m x n; the padded input viewed transposed is
                // n x c; the gradient view is m x c with strides (fan_in, taps).
                unsafe {
                    dgemm(
                        m,
                        n,
                        c,
                        1.0,
                        g.as_ptr(),
                        n as isize,
                        1,
                        padded.as_ptr().add(self.tap(i, j)),
                        1,
                        self.plane_stride() as isize,
                        1.0,
                        grad_w.as_mut_ptr().add(i * s.kernel_w + j),
                        s.fan_in() as isize,
                        taps as isize,
                    );
                }
            }
        }
        if let Some(gb) = grad_bias {
            for (o, plane) in grad_out.chunks_exact(self.pixels()).enumerate() {
                gb[o] += plane.iter().sum::<f64>();
            }
        }
    }
}

fn geometry(x: &ComplexTensor, k: &ConvKernelBank, channels: usize) -> Result<Geometry> {
    k.shape.validate()?;
    if x.channels() != channels {
        return Err(Error::shape(format!(
            "kernel bank {:?} applied to {} channels",
            k.shape,
            x.channels()
        )));
    }
    if x.height() == 0 || x.width() == 0 {
        return Err(Error::shape("convolution input is empty"));
    }
    Ok(Geometry {
        height: x.height(),
        width: x.width(),
        shape: k.shape,
    })
}

fn join(h: usize, w: usize, c: usize, re: &[f64], im: &[f64]) -> ComplexTensor {
    let data = re
        .iter()
        .zip(im)
        .map(|(&a, &b)| Complex64::new(a, b))
        .collect();
    ComplexTensor::from_vec(h, w, c, data).expect("sizes derived from geometry")
}

/// Applies the real bank to `Re x` and the imaginary bank to `Im x`.
pub fn conv2d(x: &ComplexTensor, k: &ConvKernelBank) -> Result<ComplexTensor> {
    let geo = geometry(x, k, k.shape.in_channels)?;
    let n = geo.pixels() * k.shape.out_channels;
    let mut re = vec![0.0; n];
    let mut im = vec![0.0; n];
    geo.correlate(&x.real_part(), &k.real, None, &mut re);
    geo.correlate(&x.imag_part(), &k.imag, None, &mut im);
    Ok(join(x.height(), x.width(), k.shape.out_channels, &re, &im))
}

/// Adjoint of [`conv2d`] with the same bank and padding.
pub fn conv2d_transpose(y: &ComplexTensor, k: &ConvKernelBank) -> Result<ComplexTensor> {
    let geo = geometry(y, k, k.shape.out_channels)?;
    let n = geo.pixels() * k.shape.in_channels;
    let mut re = vec![0.0; n];
    let mut im = vec![0.0; n];
    geo.correlate_transpose(&y.real_part(), &k.real, &mut re);
    geo.correlate_transpose(&y.imag_part(), &k.imag, &mut im);
    Ok(join(y.height(), y.width(), k.shape.in_channels, &re, &im))
}
