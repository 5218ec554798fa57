use crate::error::{Error, Result};
use crate::numerics::{Complex64, ComplexTensor};

/// Binary k-space sampling pattern `P`.
///
/// Cartesian masks sample whole phase-encode lines, which here are the
/// columns of the `height × width` grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingMask {
    height: usize,
    width: usize,
    data: Vec<bool>,
    ratio: f64,
}

impl SamplingMask {
    pub fn full(height: usize, width: usize) -> Self {
        Self::from_bools(height, width, vec![true; height * width]).expect("sizes match")
    }

    pub fn from_bools(height: usize, width: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != height * width || data.is_empty() {
            return Err(Error::shape(format!(
                "{} mask entries for a {height}x{width} grid",
                data.len()
            )));
        }
        let ones = data.iter().filter(|&&b| b).count();
        let ratio = ones as f64 / data.len() as f64;
        Ok(Self {
            height,
            width,
            data,
            ratio,
        })
    }

    /// Accepts exactly 0.0 or 1.0 per entry.
    pub fn from_values(height: usize, width: usize, values: &[f64]) -> Result<Self> {
        let data = values
            .iter()
            .map(|&v| match v {
                v if v == 1.0 => Ok(true),
                v if v == 0.0 => Ok(false),
                v => Err(Error::param(format!("mask entry {v} is not 0 or 1"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_bools(height, width, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Fraction of sampled k-space points.
    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn is_sampled(&self, y: usize, x: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn as_bools(&self) -> &[bool] {
        &self.data
    }

    pub fn to_values(&self) -> Vec<f64> {
        self.data.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }

    pub fn count_sampled(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Indices of fully sampled columns.
    pub fn sampled_lines(&self) -> Vec<usize> {
        (0..self.width)
            .filter(|&x| (0..self.height).all(|y| self.is_sampled(y, x)))
            .collect()
    }

    /// `P ⊙ x`, channel by channel.
    pub fn apply(&self, x: &ComplexTensor) -> Result<ComplexTensor> {
        let mut out = x.clone();
        self.apply_in_place(&mut out)?;
        Ok(out)
    }

    pub fn apply_in_place(&self, x: &mut ComplexTensor) -> Result<()> {
        if x.height() != self.height || x.width() != self.width {
            return Err(Error::shape(format!(
                "mask {}x{} applied to {}x{}",
                self.height,
                self.width,
                x.height(),
                x.width()
            )));
        }
        let zero = Complex64::new(0.0, 0.0);
        for c in 0..x.channels() {
            for (z, &keep) in x.channel_mut(c).iter_mut().zip(&self.data) {
                if !keep {
                    *z = zero;
                }
            }
        }
        Ok(())
    }
}

/// Cartesian mask: a fully sampled central band of `acs_lines` columns plus
/// evenly spread outer columns, `round(ratio · width)` lines in total.
pub fn make_cartesian_mask(
    height: usize,
    width: usize,
    ratio: f64,
    acs_lines: usize,
) -> Result<SamplingMask> {
    if height == 0 || width == 0 {
        return Err(Error::param("mask grid must be non-empty"));
    }
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::param(format!("sampling ratio {ratio} outside (0, 1]")));
    }
    if acs_lines as f64 > width as f64 * ratio {
        return Err(Error::param(format!(
            "{acs_lines} ACS lines exceed ratio {ratio} of {width} lines"
        )));
    }
    let total = ((ratio * width as f64).round() as usize).clamp(1, width);
    let total = total.max(acs_lines);

    let center = width / 2;
    let acs_start = center - acs_lines / 2;
    let acs = acs_start..acs_start + acs_lines;
    let outer: Vec<usize> = (0..width).filter(|x| !acs.contains(x)).collect();
    let wanted = total - acs_lines;

    let mut lines = vec![false; width];
    for x in acs {
        lines[x] = true;
    }
    // Midpoint rule places `wanted` picks at even spacing over the outer lines.
    for k in 0..wanted {
        let pos = ((2 * k + 1) * outer.len()) / (2 * wanted);
        lines[outer[pos]] = true;
    }
    let mut data = Vec::with_capacity(height * width);
    for _ in 0..height {
        data.extend_from_slice(&lines);
    }
    SamplingMask::from_bools(height, width, data)
}
