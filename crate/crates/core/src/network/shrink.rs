//! Soft shrinkage on sparse feature maps.
//!
//! `Group` is the proximal map of `α Σ_p ‖g_p‖₂` where `g_p` gathers every
//! channel (real and imaginary parts) at pixel `p`. `Component` applies
//! `sign(x) max(|x| − α, 0)` to each complex entry on its own, with `sign`
//! the unit phase; the two coincide for single-channel features.

use crate::error::{Error, Result};
use crate::numerics::{Complex64, ComplexTensor};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ShrinkMode {
    #[default]
    Group,
    Component,
}

impl ShrinkMode {
    pub fn name(self) -> &'static str {
        match self {
            ShrinkMode::Group => "group",
            ShrinkMode::Component => "component",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "group" => Ok(ShrinkMode::Group),
            "component" => Ok(ShrinkMode::Component),
            other => Err(Error::param(format!("unknown shrink mode {other:?}"))),
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha >= 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("threshold {alpha} must be finite and >= 0")))
    }
}

/// Factor `max(‖g‖ − α, 0) / ‖g‖`, zero for a zero group.
fn gain(norm: f64, alpha: f64) -> f64 {
    if norm > alpha {
        1.0 - alpha / norm
    } else {
        0.0
    }
}

pub fn shrink_l21(x: &ComplexTensor, alpha: f64, mode: ShrinkMode) -> Result<ComplexTensor> {
    check_alpha(alpha)?;
    if alpha == 0.0 {
        return Ok(x.clone());
    }
    let mut out = x.clone();
    match mode {
        ShrinkMode::Component => {
            for z in out.data_mut() {
                *z *= gain(z.norm(), alpha);
            }
        }
        ShrinkMode::Group => {
            let n = x.pixels();
            for p in 0..n {
                let norm = (0..x.channels())
                    .map(|c| x.channel(c)[p].norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                let g = gain(norm, alpha);
                for c in 0..x.channels() {
                    out.channel_mut(c)[p] *= g;
                }
            }
        }
    }
    Ok(out)
}

/// Vector-Jacobian product of [`shrink_l21`]: returns `(∂L/∂x, ∂L/∂α)`.
///
/// Inside the dead zone (`‖g‖ ≤ α`, kink included) the derivative is zero.
pub fn shrink_l21_backward(
    x: &ComplexTensor,
    alpha: f64,
    mode: ShrinkMode,
    grad_out: &ComplexTensor,
) -> Result<(ComplexTensor, f64)> {
    check_alpha(alpha)?;
    x.check_same_shape(grad_out, "shrink backward")?;
    let mut grad_in = ComplexTensor::zeros(x.height(), x.width(), x.channels());
    let mut grad_alpha = 0.0;
    // For y = g (1 − α/n): ∂y/∂g = (1 − α/n) I + α g gᵀ / n³, ∂y/∂α = −g / n.
    let group = |gs: &[Complex64], go: &[Complex64], out: &mut [Complex64], ga: &mut f64| {
        let norm = gs.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm <= alpha || norm == 0.0 {
            out.iter_mut().for_each(|o| *o = Complex64::new(0.0, 0.0));
            return;
        }
        let dot: f64 = gs.iter().zip(go).map(|(g, o)| g.re * o.re + g.im * o.im).sum();
        let a = 1.0 - alpha / norm;
        let b = alpha * dot / (norm * norm * norm);
        for ((o, g), d) in out.iter_mut().zip(gs).zip(go) {
            *o = d * a + g * b;
        }
        *ga -= dot / norm;
    };
    match mode {
        ShrinkMode::Component => {
            for ((o, g), d) in grad_in.data_mut().iter_mut().zip(x.data()).zip(grad_out.data()) {
                let mut slot = [Complex64::new(0.0, 0.0)];
                group(std::slice::from_ref(g), std::slice::from_ref(d), &mut slot, &mut grad_alpha);
                *o = slot[0];
            }
        }
        ShrinkMode::Group => {
            let c = x.channels();
            let mut gs = vec![Complex64::new(0.0, 0.0); c];
            let mut go = gs.clone();
            let mut out = gs.clone();
            for p in 0..x.pixels() {
                for ch in 0..c {
                    gs[ch] = x.channel(ch)[p];
                    go[ch] = grad_out.channel(ch)[p];
                }
                group(&gs, &go, &mut out, &mut grad_alpha);
                for ch in 0..c {
                    grad_in.channel_mut(ch)[p] = out[ch];
                }
            }
        }
    }
    Ok((grad_in, grad_alpha))
}
