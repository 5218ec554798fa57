//! Browser bindings: simulate a multi-coil scan, compare zero-filled and
//! CG-SENSE reconstructions, and plot the shrinkage operator.
//!
//! Images cross the boundary as row-major `Float64Array`s of side `size()`.

use pmri_core::metrics::{psnr, ssim, Peak};
use pmri_core::mri::{
    cg_sense_baseline, make_cartesian_mask, simulate_sample, zero_filled_recon, PhantomSpec, SensitivitySpec,
    SimulatedSample,
};
use pmri_core::network::{shrink_l21, ShrinkMode};
use pmri_core::numerics::{magnitude, ComplexTensor, RealImage};
use pmri_core::training::sos;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

fn js(e: pmri_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// One simulated acquisition.
#[wasm_bindgen]
pub struct Scan {
    sim: SimulatedSample,
    truth: RealImage,
}

impl Scan {
    pub fn simulate(size: usize, coils: usize, ratio: f64, acs_lines: usize, seed: u64) -> pmri_core::Result<Scan> {
        let phantom = PhantomSpec {
            jitter: 0.5,
            max_extra_ellipses: 3,
            phase_amplitude: 0.5,
            ..PhantomSpec::new(size, size)
        };
        let mask = make_cartesian_mask(size, size, ratio, acs_lines.min((ratio * size as f64) as usize))?;
        let sim = simulate_sample(&phantom, &SensitivitySpec::new(coils), &mask, 0.005, seed)?;
        let truth = sos(&sim.sample.truth);
        Ok(Scan { sim, truth })
    }

    pub fn cg_image(&self, map_error: f64, iters: usize, seed: u64) -> pmri_core::Result<RealImage> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let maps = self.sim.sensitivities.perturbed(map_error, &mut rng);
        let res = cg_sense_baseline(&self.sim.sample.kspace, &maps, iters, 0.0)?;
        magnitude(&res.image)
    }

    fn as_image(&self, pixels: &[f64]) -> pmri_core::Result<RealImage> {
        RealImage::from_vec(self.truth.height(), self.truth.width(), pixels.to_vec())
    }
}

#[wasm_bindgen]
impl Scan {
    #[wasm_bindgen(constructor)]
    pub fn new(size: usize, coils: usize, ratio: f64, acs_lines: usize, seed: u64) -> Result<Scan, JsError> {
        Scan::simulate(size, coils, ratio, acs_lines, seed).map_err(js)
    }

    pub fn size(&self) -> usize {
        self.truth.width()
    }

    pub fn coils(&self) -> usize {
        self.sim.sample.kspace.num_coils()
    }

    pub fn measured_ratio(&self) -> f64 {
        self.sim.sample.kspace.mask().ratio()
    }

    /// Root-sum-of-squares of the fully sampled coil images.
    pub fn truth(&self) -> Vec<f64> {
        self.truth.data().to_vec()
    }

    /// 1 on sampled k-space locations.
    pub fn mask(&self) -> Vec<f64> {
        self.sim.sample.kspace.mask().to_values()
    }

    /// Magnitude of one coil's fully sampled image.
    pub fn coil_image(&self, coil: usize) -> Vec<f64> {
        let c = coil.min(self.coils() - 1);
        let one = self.sim.sample.truth.channel_image(c);
        magnitude(&one).map(|m| m.into_vec()).unwrap_or_default()
    }

    /// Log-magnitude of the measured k-space of one coil.
    pub fn kspace(&self, coil: usize) -> Vec<f64> {
        let k: &ComplexTensor = self.sim.sample.kspace.coils();
        let c = coil.min(self.coils() - 1);
        k.channel(c).iter().map(|z| (1.0 + 1e3 * z.norm()).ln()).collect()
    }

    pub fn zero_filled(&self) -> Result<Vec<f64>, JsError> {
        let zf = zero_filled_recon(&self.sim.sample.kspace).map_err(js)?;
        Ok(sos(&zf).into_vec())
    }

    /// CG-SENSE with maps perturbed by `map_error` (0.1 = 10 %).
    pub fn cg_sense(&self, map_error: f64, iters: usize, seed: u64) -> Result<Vec<f64>, JsError> {
        self.cg_image(map_error, iters, seed).map(RealImage::into_vec).map_err(js)
    }

    /// PSNR (dB, peak = max of the truth) of `pixels` against the truth.
    pub fn psnr(&self, pixels: &[f64]) -> Result<f64, JsError> {
        let img = self.as_image(pixels).map_err(js)?;
        psnr(&img, &self.truth, Peak::MaxOfReference).map_err(js)
    }

    pub fn ssim(&self, pixels: &[f64]) -> Result<f64, JsError> {
        let img = self.as_image(pixels).map_err(js)?;
        ssim(&img, &self.truth).map_err(js)
    }
}

/// Output of the shrinkage on `points` inputs spread over `[-extent, extent]`.
///
/// In group mode the input is a two-channel vector `(x, companion)` and the
/// first output channel is returned, so the curve shows how a large
/// companion channel keeps small entries alive.
#[wasm_bindgen]
pub fn shrink_curve(alpha: f64, points: usize, extent: f64, group: bool, companion: f64) -> Result<Vec<f64>, JsError> {
    let n = points.max(2);
    let xs: Vec<f64> = (0..n).map(|i| -extent + 2.0 * extent * i as f64 / (n - 1) as f64).collect();
    let (mode, channels) = if group { (ShrinkMode::Group, 2) } else { (ShrinkMode::Component, 1) };
    let mut re = xs.clone();
    if group {
        re.extend(std::iter::repeat(companion).take(n));
    }
    let x = ComplexTensor::from_parts(1, n, channels, &re, &vec![0.0; n * channels]).map_err(js)?;
    let y = shrink_l21(&x, alpha, mode).map_err(js)?;
    Ok(y.channel(0).iter().map(|z| z.re).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scan_images_have_the_right_size() {
        let s = Scan::simulate(32, 4, 0.3156, 8, 1).unwrap();
        assert_eq!(s.size(), 32);
        assert_eq!(s.truth().len(), 32 * 32);
        assert_eq!(s.mask().len(), 32 * 32);
        assert_eq!(s.kspace(9).len(), 32 * 32);
        assert_eq!(s.coil_image(0).len(), 32 * 32);
    }

    #[test]
    fn exact_maps_beat_zero_filled() {
        let s = Scan::simulate(48, 4, 0.3156, 8, 2).unwrap();
        let zf = RealImage::from_vec(48, 48, s.zero_filled().unwrap()).unwrap();
        let cg = s.cg_image(0.0, 10, 3).unwrap();
        let p_zf = psnr(&zf, &s.truth, Peak::MaxOfReference).unwrap();
        let p_cg = psnr(&cg, &s.truth, Peak::MaxOfReference).unwrap();
        assert!(p_cg > p_zf, "{p_cg} <= {p_zf}");
    }

    #[test]
    fn shrink_curve_is_soft_threshold() {
        let y = shrink_curve(1.0, 5, 2.0, false, 0.0).unwrap();
        assert_eq!(y, vec![-1.0, 0.0, 0.0, 0.0, 1.0]);
        // a large companion entry rescues small values in group mode
        let g = shrink_curve(1.0, 5, 2.0, true, 10.0).unwrap();
        assert!(g[3] > 0.0);
    }
}
