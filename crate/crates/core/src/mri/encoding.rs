use super::mask::SamplingMask;
use crate::error::{Error, Result};
use crate::numerics::{ComplexImageStack, ComplexTensor, Fourier2};

/// Partial multi-coil k-space `f = (f_1, ..., f_Nc)`, zero off the mask.
#[derive(Clone, Debug, PartialEq)]
pub struct KSpaceData {
    coils: ComplexTensor,
    mask: SamplingMask,
    noise_sigma: f64,
}

impl KSpaceData {
    /// Zeroes every unsampled entry of `coils` so the invariant holds by construction.
    pub fn new(mut coils: ComplexTensor, mask: SamplingMask, noise_sigma: f64) -> Result<Self> {
        mask.apply_in_place(&mut coils)?;
        if !(noise_sigma >= 0.0) {
            return Err(Error::param(format!("noise sigma {noise_sigma} must be >= 0")));
        }
        Ok(Self {
            coils,
            mask,
            noise_sigma,
        })
    }

    pub fn coils(&self) -> &ComplexTensor {
        &self.coils
    }

    pub fn mask(&self) -> &SamplingMask {
        &self.mask
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    pub fn num_coils(&self) -> usize {
        self.coils.channels()
    }

    pub fn scale(&mut self, factor: f64) {
        self.coils.scale(factor);
    }
}

/// Ground-truth pair `(f, û)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSample {
    pub kspace: KSpaceData,
    pub truth: ComplexImageStack,
}

impl TrainingSample {
    pub fn new(kspace: KSpaceData, truth: ComplexImageStack) -> Result<Self> {
        kspace.coils.check_same_shape(&truth, "training sample")?;
        Ok(Self { kspace, truth })
    }
}

/// `P F` and its adjoint for one grid, with the FFT plans kept around.
#[derive(Clone, Debug)]
pub struct Encoder {
    fourier: Fourier2,
    mask: SamplingMask,
}

impl Encoder {
    pub fn new(mask: SamplingMask) -> Result<Self> {
        Ok(Self {
            fourier: Fourier2::new(mask.height(), mask.width())?,
            mask,
        })
    }

    pub fn mask(&self) -> &SamplingMask {
        &self.mask
    }

    pub fn fourier(&self) -> &Fourier2 {
        &self.fourier
    }

    /// `P F u` per channel.
    pub fn forward(&self, u: &ComplexTensor) -> Result<ComplexTensor> {
        let mut k = self.fourier.forward(u)?;
        self.mask.apply_in_place(&mut k)?;
        Ok(k)
    }

    /// `F⁻¹ Pᵀ f` per channel.
    pub fn adjoint(&self, f: &ComplexTensor) -> Result<ComplexTensor> {
        self.fourier.inverse(&self.mask.apply(f)?)
    }

    /// `F⁻¹ P F x`: Hessian of the data term, self-adjoint.
    pub fn normal(&self, x: &ComplexTensor) -> Result<ComplexTensor> {
        self.adjoint(&self.forward(x)?)
    }

    /// `∇ ½Σ‖PFu_i − f_i‖² = F⁻¹Pᵀ(PFu − f)`.
    pub fn fidelity_gradient(&self, u: &ComplexTensor, f: &ComplexTensor) -> Result<ComplexTensor> {
        u.check_same_shape(f, "fidelity gradient")?;
        let residual = self.forward(u)?.sub(f)?;
        self.adjoint(&residual)
    }

    /// `b_i = u_i − ρ F⁻¹Pᵀ(PFu_i − f_i)`.
    pub fn gradient_step(&self, u: &ComplexTensor, f: &ComplexTensor, rho: f64) -> Result<ComplexTensor> {
        if !rho.is_finite() {
            return Err(Error::param(format!("step size {rho} is not finite")));
        }
        let mut b = u.clone();
        b.axpy((-rho).into(), &self.fidelity_gradient(u, f)?)?;
        Ok(b)
    }

    /// `½ Σ ‖PFu_i − f_i‖²`.
    pub fn fidelity(&self, u: &ComplexTensor, f: &ComplexTensor) -> Result<f64> {
        Ok(0.5 * self.forward(u)?.sub(f)?.norm_sqr())
    }
}

fn check_mask(x: &ComplexTensor, mask: &SamplingMask) -> Result<()> {
    if x.height() != mask.height() || x.width() != mask.width() {
        return Err(Error::shape(format!(
            "image {}x{} with mask {}x{}",
            x.height(),
            x.width(),
            mask.height(),
            mask.width()
        )));
    }
    Ok(())
}

/// `mask ⊙ fft2(u_i)`.
pub fn forward_op(u: &ComplexTensor, mask: &SamplingMask) -> Result<ComplexTensor> {
    check_mask(u, mask)?;
    Encoder::new(mask.clone())?.forward(u)
}

/// `ifft2(mask ⊙ f_i)`, the adjoint of [`forward_op`].
pub fn adjoint_op(f: &ComplexTensor, mask: &SamplingMask) -> Result<ComplexTensor> {
    check_mask(f, mask)?;
    Encoder::new(mask.clone())?.adjoint(f)
}

/// One gradient-descent step on the data term for every coil.
pub fn gradient_step(u: &ComplexImageStack, f: &KSpaceData, rho: f64) -> Result<ComplexImageStack> {
    check_mask(u, f.mask())?;
    Encoder::new(f.mask().clone())?.gradient_step(u, f.coils(), rho)
}

/// Per-coil inverse FFT of the zero-filled k-space.
pub fn zero_filled_recon(f: &KSpaceData) -> Result<ComplexImageStack> {
    crate::numerics::ifft2(f.coils())
}
