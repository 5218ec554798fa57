//! Ellipse phantoms and smooth synthetic coil profiles.

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{Complex64, ComplexTensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ellipse {
    pub intensity: f64,
    pub semi_x: f64,
    pub semi_y: f64,
    pub center_x: f64,
    pub center_y: f64,
    /// Rotation in degrees.
    pub angle: f64,
}

impl Ellipse {
    const fn new(intensity: f64, semi_x: f64, semi_y: f64, cx: f64, cy: f64, angle: f64) -> Self {
        Self {
            intensity,
            semi_x,
            semi_y,
            center_x: cx,
            center_y: cy,
            angle,
        }
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.angle.to_radians().sin_cos();
        let dx = x - self.center_x;
        let dy = y - self.center_y;
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / self.semi_x).powi(2) + (v / self.semi_y).powi(2) <= 1.0
    }
}

/// Modified Shepp-Logan ellipses (higher-contrast intensities) on `[-1, 1]²`.
pub const SHEPP_LOGAN: [Ellipse; 10] = [
    Ellipse::new(1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    Ellipse::new(-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    Ellipse::new(-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    Ellipse::new(-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    Ellipse::new(0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    Ellipse::new(0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    Ellipse::new(0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    Ellipse::new(0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    Ellipse::new(0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    Ellipse::new(0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
];

/// Ellipse phantom generator.
#[derive(Clone, Debug, PartialEq)]
pub struct PhantomSpec {
    pub height: usize,
    pub width: usize,
    /// 0 reproduces the reference ellipses; 1 gives strong random variation.
    pub jitter: f64,
    /// Extra random small ellipses ("lesions") per phantom, upper bound.
    pub max_extra_ellipses: usize,
    /// Peak magnitude (radians) of the smooth background phase; 0 gives a real image.
    pub phase_amplitude: f64,
}

impl PhantomSpec {
    pub fn new(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            jitter: 0.0,
            max_extra_ellipses: 0,
            phase_amplitude: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::param("phantom grid must be non-empty"));
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(Error::param(format!("phantom jitter {} must be >= 0", self.jitter)));
        }
        if !self.phase_amplitude.is_finite() {
            return Err(Error::param("phase amplitude must be finite"));
        }
        Ok(())
    }

    /// Draws the randomized ellipse list for one phantom.
    pub fn ellipses(&self, rng: &mut impl Rng) -> Vec<Ellipse> {
        let j = self.jitter;
        let global_scale = 1.0 - 0.15 * j * rng.random::<f64>();
        let global_rot = 15.0 * j * (2.0 * rng.random::<f64>() - 1.0);
        let (gs, gc) = global_rot.to_radians().sin_cos();
        let mut out = Vec::with_capacity(SHEPP_LOGAN.len() + self.max_extra_ellipses);
        for (idx, e) in SHEPP_LOGAN.iter().enumerate() {
            let mut e = *e;
            if idx >= 2 {
                // Inner structures move and change contrast; the skull stays put.
                e.semi_x *= 1.0 + 0.25 * j * (2.0 * rng.random::<f64>() - 1.0);
                e.semi_y *= 1.0 + 0.25 * j * (2.0 * rng.random::<f64>() - 1.0);
                e.center_x += 0.05 * j * (2.0 * rng.random::<f64>() - 1.0);
                e.center_y += 0.05 * j * (2.0 * rng.random::<f64>() - 1.0);
                e.angle += 15.0 * j * (2.0 * rng.random::<f64>() - 1.0);
                e.intensity *= 1.0 + 0.5 * j * (2.0 * rng.random::<f64>() - 1.0);
            }
            out.push(e);
        }
        if self.max_extra_ellipses > 0 {
            let extra = rng.random_range(0..=self.max_extra_ellipses);
            for _ in 0..extra {
                let r = 0.45 * rng.random::<f64>().sqrt();
                let t = std::f64::consts::TAU * rng.random::<f64>();
                out.push(Ellipse::new(
                    0.1 + 0.2 * rng.random::<f64>(),
                    0.02 + 0.08 * rng.random::<f64>(),
                    0.02 + 0.08 * rng.random::<f64>(),
                    r * t.cos(),
                    r * t.sin(),
                    180.0 * rng.random::<f64>(),
                ));
            }
        }
        for e in &mut out {
            let (x, y) = (e.center_x, e.center_y);
            e.center_x = global_scale * (gc * x - gs * y);
            e.center_y = global_scale * (gs * x + gc * y);
            e.semi_x *= global_scale;
            e.semi_y *= global_scale;
            e.angle += global_rot;
        }
        out
    }

    /// Renders one complex phantom `v`.
    pub fn generate(&self, rng: &mut impl Rng) -> Result<ComplexTensor> {
        self.validate()?;
        let ellipses = self.ellipses(rng);
        let phase = [
            2.0 * rng.random::<f64>() - 1.0,
            2.0 * rng.random::<f64>() - 1.0,
            2.0 * rng.random::<f64>() - 1.0,
        ];
        let mut v = ComplexTensor::zeros(self.height, self.width, 1);
        for yi in 0..self.height {
            for xi in 0..self.width {
                let (x, y) = grid_coord(xi, yi, self.width, self.height);
                // Image rows grow downward; flip so +y points up.
                let y = -y;
                let amp: f64 = ellipses
                    .iter()
                    .filter(|e| e.contains(x, y))
                    .map(|e| e.intensity)
                    .sum();
                let amp = amp.max(0.0);
                let phi = self.phase_amplitude
                    * (phase[0] * x + phase[1] * y + phase[2] * x * y)
                    / 3.0;
                v.set(yi, xi, 0, Complex64::from_polar(amp, phi));
            }
        }
        Ok(v)
    }
}

/// Pixel center in `[-1, 1]` coordinates.
pub(crate) fn grid_coord(xi: usize, yi: usize, width: usize, height: usize) -> (f64, f64) {
    let x = (2.0 * xi as f64 + 1.0) / width as f64 - 1.0;
    let y = (2.0 * yi as f64 + 1.0) / height as f64 - 1.0;
    (x, y)
}

/// Per-coil complex sensitivities `s_i` (simulator ground truth only).
#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityMaps {
    maps: ComplexTensor,
    normalized: bool,
}

impl SensitivityMaps {
    pub fn new(maps: ComplexTensor, normalized: bool) -> Self {
        Self { maps, normalized }
    }

    pub fn maps(&self) -> &ComplexTensor {
        &self.maps
    }

    pub fn num_coils(&self) -> usize {
        self.maps.channels()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// `u_i = s_i ⊙ v`.
    pub fn apply(&self, v: &ComplexTensor) -> Result<ComplexTensor> {
        if v.channels() != 1 || v.height() != self.maps.height() || v.width() != self.maps.width() {
            return Err(Error::shape(format!(
                "sensitivities {:?} applied to image {:?}",
                self.maps.shape(),
                v.shape()
            )));
        }
        let mut out = self.maps.clone();
        for c in 0..out.channels() {
            for (s, z) in out.channel_mut(c).iter_mut().zip(v.data()) {
                *s *= z;
            }
        }
        Ok(out)
    }

    /// `Σ_i conj(s_i) ⊙ u_i`.
    pub fn combine(&self, u: &ComplexTensor) -> Result<ComplexTensor> {
        self.maps.check_same_shape(u, "sensitivity combine")?;
        let mut out = ComplexTensor::zeros(u.height(), u.width(), 1);
        for c in 0..u.channels() {
            for ((o, s), z) in out
                .data_mut()
                .iter_mut()
                .zip(self.maps.channel(c))
                .zip(u.channel(c))
            {
                *o += s.conj() * z;
            }
        }
        Ok(out)
    }

    /// Multiplies every entry by `1 + level·e` with `e` i.i.d. circular complex
    /// Gaussian of unit variance, mimicking map-estimation error.
    pub fn perturbed(&self, level: f64, rng: &mut impl Rng) -> SensitivityMaps {
        let normal = rand_distr::StandardNormal;
        let scale = level / std::f64::consts::SQRT_2;
        let maps = self.maps.map(|s| {
            let e = Complex64::new(rng.sample::<f64, _>(normal), rng.sample::<f64, _>(normal));
            s * (Complex64::new(1.0, 0.0) + e * scale)
        });
        SensitivityMaps {
            maps,
            normalized: false,
        }
    }
}

/// Gaussian-lobe receive coils arranged on a ring around the field of view.
#[derive(Clone, Debug, PartialEq)]
pub struct SensitivitySpec {
    pub coils: usize,
    /// Ring radius in `[-1, 1]` units.
    pub radius: f64,
    /// Lobe width (standard deviation) in `[-1, 1]` units.
    pub width: f64,
    /// Linear phase slope across the field of view, radians per unit.
    pub phase_slope: f64,
    /// Scale so that `Σ_i |s_i|² = 1` at every pixel.
    pub normalize: bool,
}

impl SensitivitySpec {
    pub fn new(coils: usize) -> Self {
        Self {
            coils,
            radius: 1.3,
            width: 0.9,
            phase_slope: 0.6,
            normalize: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.coils == 0 {
            return Err(Error::param("at least one coil is required"));
        }
        if !(self.width > 0.0 && self.width.is_finite()) || !self.radius.is_finite() {
            return Err(Error::param("coil radius and width must be finite, width > 0"));
        }
        Ok(())
    }

    pub fn maps(&self, height: usize, width: usize) -> Result<SensitivityMaps> {
        self.validate()?;
        if height == 0 || width == 0 {
            return Err(Error::param("sensitivity grid must be non-empty"));
        }
        let mut maps = ComplexTensor::zeros(height, width, self.coils);
        for c in 0..self.coils {
            let theta = std::f64::consts::TAU * c as f64 / self.coils as f64;
            let (cx, cy) = (self.radius * theta.cos(), self.radius * theta.sin());
            let offset = 0.7 * c as f64;
            for yi in 0..height {
                for xi in 0..width {
                    let (x, y) = grid_coord(xi, yi, width, height);
                    let d2 = (x - cx).powi(2) + (y - cy).powi(2);
                    let amp = (-d2 / (2.0 * self.width * self.width)).exp();
                    let phi = offset + self.phase_slope * (x * theta.sin() - y * theta.cos());
                    maps.set(yi, xi, c, Complex64::from_polar(amp, phi));
                }
            }
        }
        if self.normalize {
            let n = height * width;
            for p in 0..n {
                let sos: f64 = (0..self.coils)
                    .map(|c| maps.channel(c)[p].norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                for c in 0..self.coils {
                    maps.channel_mut(c)[p] /= sos;
                }
            }
        }
        Ok(SensitivityMaps::new(maps, self.normalize))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reference_phantom_has_unit_peak_inside_skull() {
        let spec = PhantomSpec::new(64, 64);
        let v = spec.generate(&mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!((v.max_abs() - 1.0).abs() < 1e-12);
        assert_eq!(v.get(0, 0, 0).norm(), 0.0);
        // Center pixel sits in the brain region (1.0 - 0.8).
        assert!((v.get(32, 32, 0).norm() - 0.2).abs() < 1e-12);
        assert!(v.data().iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn normalized_maps_have_unit_sos() {
        let maps = SensitivitySpec::new(4).maps(16, 12).unwrap();
        for p in 0..16 * 12 {
            let sos: f64 = (0..4).map(|c| maps.maps().channel(c)[p].norm_sqr()).sum();
            assert!((sos - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unnormalized_coils_differ_in_contrast() {
        let mut spec = SensitivitySpec::new(2);
        spec.normalize = false;
        let maps = spec.maps(32, 32).unwrap();
        // Coil 0 sits on the +x side of the ring.
        let right = maps.maps().get(16, 31, 0).norm();
        let left = maps.maps().get(16, 0, 0).norm();
        assert!(right > 2.0 * left);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(SensitivitySpec::new(0).maps(8, 8).is_err());
        let mut p = PhantomSpec::new(8, 8);
        p.jitter = -1.0;
        assert!(p.generate(&mut ChaCha8Rng::seed_from_u64(1)).is_err());
    }
}
