//! Reverse-mode gradients of the loss through the unrolled network.
//!
//! The forward pass records every conv-stack activation; the backward pass
//! walks the phases in reverse, using that the data step
//! `b = u − ρ F⁻¹Pᵀ(PFu − f)` has Jacobian `I − ρ F⁻¹PF` (self-adjoint).

use super::loss::{loss_backward, LossConfig};
use crate::error::{Error, Result};
use crate::mri::{Encoder, KSpaceData};
use crate::network::model::check_coils;
use crate::network::{shrink_l21, shrink_l21_backward, NetworkParams, Reconstruction, StackTape};
use crate::numerics::{ComplexImageStack, ComplexTensor};

struct PhaseTape {
    /// `F⁻¹Pᵀ(PFu − f)` at the phase input.
    fidelity_grad: ComplexTensor,
    combiner: StackTape,
    encoder: StackTape,
    /// Sparse features before shrinkage.
    features: ComplexTensor,
    decoder: StackTape,
    expander: StackTape,
}

/// Loss, reconstruction and parameter gradients for one sample.
#[derive(Clone, Debug)]
pub struct SampleGradient {
    pub loss: f64,
    pub grads: NetworkParams,
    pub reconstruction: Reconstruction,
}

fn finite(x: &ComplexTensor, phase: usize, site: &str) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite {
            phase,
            site: site.to_string(),
        })
    }
}

fn real_dot(a: &ComplexTensor, b: &ComplexTensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

/// Exact gradient of `ℓ(forward_pass(f, θ), û)` with respect to every entry of `θ`.
///
/// Non-finite intermediates are reported with the phase (1-based, `T + 1`
/// for the final combiner) and the operator where they appeared.
pub fn backward(
    f: &KSpaceData,
    theta: &NetworkParams,
    u_hat: &ComplexImageStack,
    cfg: &LossConfig,
) -> Result<SampleGradient> {
    cfg.validate()?;
    check_coils(&theta.arch, u_hat)?;
    let encoder = Encoder::new(f.mask().clone())?;
    let mode = theta.shrink;

    let mut u = theta.initial_guess(f)?;
    let mut tapes = Vec::with_capacity(theta.num_phases());
    for (t, phase) in theta.phases.iter().enumerate() {
        let t1 = t + 1;
        let fidelity_grad = encoder.fidelity_gradient(&u, f.coils())?;
        let mut b = u;
        b.axpy((-phase.rho).into(), &fidelity_grad)?;
        finite(&b, t1, "gradient step")?;
        let combiner = phase.combiner.forward_taped(&b)?;
        let v = combiner.output();
        finite(&v, t1, "combiner J")?;
        let enc = phase.encoder.forward_taped(&v)?;
        let features = enc.output();
        finite(&features, t1, "encoder G")?;
        let shrunk = shrink_l21(&features, phase.alpha, mode)?;
        let decoder = phase.decoder.forward_taped(&shrunk)?;
        finite(&decoder.output(), t1, "decoder G~")?;
        let expander = phase.expander.forward_taped(&decoder.output())?;
        let residual = expander.output();
        finite(&residual, t1, "expander J~")?;
        u = b.add(&residual)?;
        tapes.push(PhaseTape {
            fidelity_grad,
            combiner,
            encoder: enc,
            features,
            decoder,
            expander,
        });
    }
    let last = theta.phases.last().expect("at least one phase");
    let final_tape = last.combiner.forward_taped(&u)?;
    let single = final_tape.output();
    finite(&single, theta.num_phases() + 1, "final combiner J")?;

    let (loss, mut grad_u, grad_v) = loss_backward(&u, &single, u_hat, cfg)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite {
            phase: theta.num_phases() + 1,
            site: "loss".into(),
        });
    }

    let mut grads = theta.zeros_like();
    let t_last = theta.num_phases() - 1;
    let from_single = last
        .combiner
        .backward(&final_tape, &grad_v, &mut grads.phases[t_last].combiner)?;
    grad_u.axpy(1.0.into(), &from_single)?;

    for (t, (phase, tape)) in theta.phases.iter().zip(&tapes).enumerate().rev() {
        let g = &mut grads.phases[t];
        // u = b + r(b)
        let mut grad_b = grad_u.clone();
        let g_w = phase.expander.backward(&tape.expander, &grad_u, &mut g.expander)?;
        let g_s = phase.decoder.backward(&tape.decoder, &g_w, &mut g.decoder)?;
        let (g_z, g_alpha) = shrink_l21_backward(&tape.features, phase.alpha, mode, &g_s)?;
        g.alpha += g_alpha;
        let g_v = phase.encoder.backward(&tape.encoder, &g_z, &mut g.encoder)?;
        let g_b_res = phase.combiner.backward(&tape.combiner, &g_v, &mut g.combiner)?;
        grad_b.axpy(1.0.into(), &g_b_res)?;
        // b = u − ρ d(u)
        g.rho -= real_dot(&tape.fidelity_grad, &grad_b);
        let mut next = grad_b.clone();
        next.axpy((-phase.rho).into(), &encoder.normal(&grad_b)?)?;
        grad_u = next;
    }
    for t in grads.tensors() {
        if t.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                phase: t.name[5..].split('.').next().and_then(|s| s.parse::<usize>().ok()).map_or(0, |p| p + 1),
                site: format!("gradient of {}", t.name),
            });
        }
    }
    Ok(SampleGradient {
        loss,
        grads,
        reconstruction: Reconstruction { coils: u, single },
    })
}

/// Loss of one sample without gradients.
pub fn sample_loss(
    f: &KSpaceData,
    theta: &NetworkParams,
    u_hat: &ComplexImageStack,
    cfg: &LossConfig,
) -> Result<f64> {
    let rec = crate::network::forward_pass(f, theta)?;
    super::loss::loss(&rec.coils, &rec.single, u_hat, cfg)
}
