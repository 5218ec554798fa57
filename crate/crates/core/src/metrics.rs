//! Image-quality metrics on magnitude images and the evaluation report.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::network::Reconstruction;
use crate::numerics::{magnitude, ComplexImageStack, RealImage};
use crate::training::sos;

/// PSNR value returned for identical images.
pub const PSNR_CAP: f64 = 300.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// Peak value used by [`psnr`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum Peak {
    /// `max|x*|` of the reference image.
    #[default]
    MaxOfReference,
    /// Fixed peak of 1, for data normalized to unit maximum.
    Unit,
}

impl Peak {
    pub fn name(self) -> &'static str {
        match self {
            Peak::MaxOfReference => "max_ref",
            Peak::Unit => "unit",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "max_ref" | "max" => Ok(Peak::MaxOfReference),
            "unit" | "1" => Ok(Peak::Unit),
            other => Err(Error::param(format!("unknown PSNR peak '{other}' (max_ref|unit)"))),
        }
    }
}

fn check_pair(x_hat: &RealImage, x_star: &RealImage, what: &str) -> Result<()> {
    if !x_hat.same_shape(x_star) {
        return Err(Error::shape(format!(
            "{what}: {}x{} vs {}x{}",
            x_hat.height(),
            x_hat.width(),
            x_star.height(),
            x_star.width()
        )));
    }
    if x_star.data().is_empty() {
        return Err(Error::shape(format!("{what}: empty image")));
    }
    Ok(())
}

fn diff_norm(a: &RealImage, b: &RealImage) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Relative error `‖x̂ − x*‖ / ‖x*‖`.
pub fn rmse(x_hat: &RealImage, x_star: &RealImage) -> Result<f64> {
    check_pair(x_hat, x_star, "rmse")?;
    let denom = x_star.norm();
    if denom == 0.0 {
        return Err(Error::param("rmse: reference image has zero norm"));
    }
    Ok(diff_norm(x_hat, x_star) / denom)
}

/// `20 log10(peak / rms error)`, capped at [`PSNR_CAP`].
pub fn psnr(x_hat: &RealImage, x_star: &RealImage, peak: Peak) -> Result<f64> {
    check_pair(x_hat, x_star, "psnr")?;
    let peak = match peak {
        Peak::MaxOfReference => x_star.max_abs(),
        Peak::Unit => 1.0,
    };
    let rms = diff_norm(x_hat, x_star) / (x_star.data().len() as f64).sqrt();
    if rms == 0.0 {
        return Ok(PSNR_CAP);
    }
    if peak == 0.0 {
        return Err(Error::param("psnr: peak is zero"));
    }
    Ok((20.0 * (peak / rms).log10()).min(PSNR_CAP))
}

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
fn gaussian_taps(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size / 2) as f64;
    let taps: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - c;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / s).collect()
}

/// Window side used for an `h × w` image: 11, or the largest odd size that fits.
pub fn ssim_window(height: usize, width: usize) -> usize {
    let m = SSIM_WINDOW.min(height).min(width);
    if m % 2 == 0 {
        m - 1
    } else {
        m
    }
}

/// Mean local SSIM over all fully contained Gaussian windows.
///
/// Dynamic range is `max|x*|` (1 if the reference is identically zero).
pub fn ssim(x_hat: &RealImage, x_star: &RealImage) -> Result<f64> {
    check_pair(x_hat, x_star, "ssim")?;
    let (h, w) = (x_star.height(), x_star.width());
    let size = ssim_window(h, w);
    let taps = gaussian_taps(size, SSIM_SIGMA);
    let range = match x_star.max_abs() {
        r if r > 0.0 => r,
        _ => 1.0,
    };
    let c1 = (SSIM_K1 * range).powi(2);
    let c2 = (SSIM_K2 * range).powi(2);
    let (a, b) = (x_hat.data(), x_star.data());
    let mut total = 0.0;
    let mut count = 0usize;
    for y0 in 0..=h - size {
        for x0 in 0..=w - size {
            let (mut mu_a, mut mu_b) = (0.0, 0.0);
            for i in 0..size {
                for j in 0..size {
                    let wt = taps[i] * taps[j];
                    let k = (y0 + i) * w + x0 + j;
                    mu_a += wt * a[k];
                    mu_b += wt * b[k];
                }
            }
            let (mut var_a, mut var_b, mut cov) = (0.0, 0.0, 0.0);
            for i in 0..size {
                for j in 0..size {
                    let wt = taps[i] * taps[j];
                    let k = (y0 + i) * w + x0 + j;
                    let (da, db) = (a[k] - mu_a, b[k] - mu_b);
                    var_a += wt * da * da;
                    var_b += wt * db * db;
                    cov += wt * da * db;
                }
            }
            let num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
            let den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
            total += num / den;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImageMetrics {
    pub psnr: f64,
    pub ssim: f64,
    pub rmse: f64,
}

pub fn image_metrics(x_hat: &RealImage, x_star: &RealImage, peak: Peak) -> Result<ImageMetrics> {
    Ok(ImageMetrics {
        psnr: psnr(x_hat, x_star, peak)?,
        ssim: ssim(x_hat, x_star)?,
        rmse: rmse(x_hat, x_star)?,
    })
}

/// Mean and population standard deviation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Stat {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return Stat { mean: f64::NAN, std: f64::NAN };
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        Stat { mean, std: var.max(0.0).sqrt() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub psnr: Stat,
    pub ssim: Stat,
    pub rmse: Stat,
}

pub fn summarize(rows: &[ImageMetrics]) -> Summary {
    Summary {
        psnr: Stat::of(rows.iter().map(|r| r.psnr)),
        ssim: Stat::of(rows.iter().map(|r| r.ssim)),
        rmse: Stat::of(rows.iter().map(|r| r.rmse)),
    }
}

/// Per-image metrics of the SOS output and, when available, of `|J(u)|`,
/// both against the SOS of the ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub peak: Peak,
    pub names: Vec<String>,
    pub sos: Vec<ImageMetrics>,
    pub single: Option<Vec<ImageMetrics>>,
}

impl MetricReport {
    pub fn len(&self) -> usize {
        self.sos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sos.is_empty()
    }

    pub fn sos_summary(&self) -> Summary {
        summarize(&self.sos)
    }

    pub fn single_summary(&self) -> Option<Summary> {
        self.single.as_deref().map(summarize)
    }

    pub fn conventions(&self) -> String {
        format!(
            "psnr_peak={} psnr_cap={PSNR_CAP} ssim_window={SSIM_WINDOW} ssim_sigma={SSIM_SIGMA} \
             ssim_k1={SSIM_K1} ssim_k2={SSIM_K2} ssim_range=max_ref rmse=relative std=population",
            self.peak.name()
        )
    }

    /// Tab-separated rows, one per image plus `mean` and `std` rows.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("# {}\n", self.conventions());
        out.push_str("name\tpsnr_sos\tssim_sos\trmse_sos");
        if self.single.is_some() {
            out.push_str("\tpsnr_single\tssim_single\trmse_single");
        }
        out.push('\n');
        let cells = |m: &ImageMetrics| format!("\t{:.6}\t{:.6}\t{:.6}", m.psnr, m.ssim, m.rmse);
        for (i, name) in self.names.iter().enumerate() {
            out.push_str(name);
            out.push_str(&cells(&self.sos[i]));
            if let Some(single) = &self.single {
                out.push_str(&cells(&single[i]));
            }
            out.push('\n');
        }
        let s = self.sos_summary();
        let q = self.single_summary();
        for (label, pick) in [("mean", true), ("std", false)] {
            let get = |st: Stat| if pick { st.mean } else { st.std };
            let _ = write!(out, "{label}\t{:.6}\t{:.6}\t{:.6}", get(s.psnr), get(s.ssim), get(s.rmse));
            if let Some(q) = q {
                let _ = write!(out, "\t{:.6}\t{:.6}\t{:.6}", get(q.psnr), get(q.ssim), get(q.rmse));
            }
            out.push('\n');
        }
        out
    }

    /// Fixed-width table of mean ± std.
    pub fn to_table(&self) -> String {
        let mut out = format!("{} images; {}\n", self.len(), self.conventions());
        let _ = writeln!(out, "{:<10} {:>20} {:>18} {:>18}", "output", "PSNR (dB)", "SSIM", "RMSE");
        let mut row = |label: &str, s: Summary| {
            let _ = writeln!(
                out,
                "{:<10} {:>20} {:>18} {:>18}",
                label,
                format!("{:.4}±{:.4}", s.psnr.mean, s.psnr.std),
                format!("{:.4}±{:.4}", s.ssim.mean, s.ssim.std),
                format!("{:.4}±{:.4}", s.rmse.mean, s.rmse.std),
            );
        };
        row("sos", self.sos_summary());
        if let Some(q) = self.single_summary() {
            row("single", q);
        }
        out
    }
}

/// Report from magnitude images already computed by the caller.
pub fn evaluate_magnitudes(
    names: Vec<String>,
    sos_images: &[RealImage],
    single: Option<&[RealImage]>,
    truths: &[RealImage],
    peak: Peak,
) -> Result<MetricReport> {
    if sos_images.len() != truths.len() || names.len() != truths.len() {
        return Err(Error::shape(format!(
            "evaluate: {} reconstructions, {} ground truths, {} names",
            sos_images.len(),
            truths.len(),
            names.len()
        )));
    }
    if let Some(s) = single {
        if s.len() != truths.len() {
            return Err(Error::shape(format!(
                "evaluate: {} single images for {} ground truths",
                s.len(),
                truths.len()
            )));
        }
    }
    let sos_rows = sos_images
        .iter()
        .zip(truths)
        .map(|(x, t)| image_metrics(x, t, peak))
        .collect::<Result<Vec<_>>>()?;
    let single_rows = single
        .map(|s| s.iter().zip(truths).map(|(x, t)| image_metrics(x, t, peak)).collect())
        .transpose()?;
    Ok(MetricReport {
        peak,
        names,
        sos: sos_rows,
        single: single_rows,
    })
}

/// Metrics of network outputs against multi-coil ground truths.
pub fn evaluate(recons: &[Reconstruction], truths: &[ComplexImageStack], peak: Peak) -> Result<MetricReport> {
    if recons.len() != truths.len() {
        return Err(Error::shape(format!(
            "evaluate: {} reconstructions for {} ground truths",
            recons.len(),
            truths.len()
        )));
    }
    let sos_images: Vec<RealImage> = recons.iter().map(|r| sos(&r.coils)).collect();
    let single = recons
        .iter()
        .map(|r| magnitude(&r.single))
        .collect::<Result<Vec<_>>>()?;
    let truth_sos: Vec<RealImage> = truths.iter().map(sos).collect();
    let names = (0..recons.len()).map(|i| format!("{i:04}")).collect();
    evaluate_magnitudes(names, &sos_images, Some(&single), &truth_sos, peak)
}
