//! Complex tensors, the centered unitary FFT pair and real/imaginary-split convolutions.

pub mod conv;
pub mod fft;
pub mod tensor;

pub use conv::{conv2d, conv2d_transpose, ConvKernelBank, KernelShape};
pub use fft::{fft2, ifft2, Fourier2};
pub use tensor::{inner_product, magnitude, ComplexImageStack, ComplexTensor, RealImage};
pub use rustfft::num_complex::{Complex32, Complex64};
