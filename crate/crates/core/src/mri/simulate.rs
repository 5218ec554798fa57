use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::encoding::{zero_filled_recon, Encoder, KSpaceData, TrainingSample};
use super::mask::SamplingMask;
use super::phantom::{PhantomSpec, SensitivityMaps, SensitivitySpec};
use crate::error::{Error, Result};
use crate::numerics::{Complex64, ComplexTensor};

/// A simulated sample together with the simulator-side ground truth.
#[derive(Clone, Debug)]
pub struct SimulatedSample {
    pub sample: TrainingSample,
    /// Full field-of-view image `v`, normalized with the same factor as the sample.
    pub image: ComplexTensor,
    pub sensitivities: SensitivityMaps,
    /// Factor the raw data were multiplied by (`1 / max |F⁻¹f|`).
    pub scale: f64,
}

/// Simulates `f_i = P F (s_i v) + P n_i` for a random ellipse phantom `v`.
///
/// Noise is circular complex Gaussian with standard deviation `noise_sigma`
/// on each of the real and imaginary parts, added only where sampled. The
/// sample is then divided by the maximum magnitude of its zero-filled
/// reconstruction.
pub fn simulate_sample(
    phantom: &PhantomSpec,
    sens: &SensitivitySpec,
    mask: &SamplingMask,
    noise_sigma: f64,
    seed: u64,
) -> Result<SimulatedSample> {
    let maps = sens.maps(phantom.height, phantom.width)?;
    simulate_with_maps(phantom, &maps, mask, noise_sigma, seed)
}

pub fn simulate_with_maps(
    phantom: &PhantomSpec,
    maps: &SensitivityMaps,
    mask: &SamplingMask,
    noise_sigma: f64,
    seed: u64,
) -> Result<SimulatedSample> {
    phantom.validate()?;
    if mask.height() != phantom.height || mask.width() != phantom.width {
        return Err(Error::param(format!(
            "mask {}x{} does not match phantom {}x{}",
            mask.height(),
            mask.width(),
            phantom.height,
            phantom.width
        )));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::param(format!("noise sigma {noise_sigma} must be >= 0")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut image = phantom.generate(&mut rng)?;
    let mut truth = maps.apply(&image)?;

    let encoder = Encoder::new(mask.clone())?;
    let mut kspace = encoder.forward(&truth)?;
    if noise_sigma > 0.0 {
        let normal = rand_distr::StandardNormal;
        for z in kspace.data_mut() {
            let n = Complex64::new(rng.sample::<f64, _>(normal), rng.sample::<f64, _>(normal));
            *z += n * noise_sigma;
        }
    }
    let mut kspace = KSpaceData::new(kspace, mask.clone(), noise_sigma)?;

    let peak = zero_filled_recon(&kspace)?.max_abs();
    if !(peak > 0.0) {
        return Err(Error::param("simulated sample has an all-zero zero-filled image"));
    }
    let scale = 1.0 / peak;
    kspace.scale(scale);
    truth.scale(scale);
    image.scale(scale);
    Ok(SimulatedSample {
        sample: TrainingSample::new(kspace, truth)?,
        image,
        sensitivities: maps.clone(),
        scale,
    })
}
