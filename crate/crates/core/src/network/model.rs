use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::arch::Architecture;
use super::shrink::{shrink_l21, ShrinkMode};
use super::stack::{ActivationMode, ConvStack};
use crate::error::{Error, Result};
use crate::mri::{Encoder, KSpaceData};
use crate::numerics::{ComplexImageStack, ComplexTensor};

/// Which operator of a phase a conv stack implements.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Operator {
    /// J: combines coil images into one image.
    Combiner,
    /// G: sparse feature encoder.
    Encoder,
    /// G̃: maps shrunk features back to an image.
    Decoder,
    /// J̃: spreads the image residual back over the coils.
    Expander,
}

impl Operator {
    pub const ALL: [Operator; 4] = [
        Operator::Combiner,
        Operator::Encoder,
        Operator::Decoder,
        Operator::Expander,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Operator::Combiner => "combiner",
            Operator::Encoder => "encoder",
            Operator::Decoder => "decoder",
            Operator::Expander => "expander",
        }
    }
}

/// Parameters of one phase: step size, threshold and the four conv operators.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseParams {
    pub rho: f64,
    pub alpha: f64,
    pub combiner: ConvStack,
    pub encoder: ConvStack,
    pub decoder: ConvStack,
    pub expander: ConvStack,
}

impl PhaseParams {
    pub fn zeros(arch: &Architecture) -> Result<Self> {
        Ok(Self {
            rho: 0.0,
            alpha: 0.0,
            combiner: ConvStack::zeros(&arch.combiner()?),
            encoder: ConvStack::zeros(&arch.encoder()?),
            decoder: ConvStack::zeros(&arch.decoder()?),
            expander: ConvStack::zeros(&arch.expander()?),
        })
    }

    pub fn operator(&self, op: Operator) -> &ConvStack {
        match op {
            Operator::Combiner => &self.combiner,
            Operator::Encoder => &self.encoder,
            Operator::Decoder => &self.decoder,
            Operator::Expander => &self.expander,
        }
    }

    pub fn operator_mut(&mut self, op: Operator) -> &mut ConvStack {
        match op {
            Operator::Combiner => &mut self.combiner,
            Operator::Encoder => &mut self.encoder,
            Operator::Decoder => &mut self.decoder,
            Operator::Expander => &mut self.expander,
        }
    }

    /// Zeroes the last layer of G̃ and J̃ so the residual branch vanishes.
    pub fn zero_residual(&mut self) {
        for op in [Operator::Decoder, Operator::Expander] {
            let stack = self.operator_mut(op);
            let last = stack.layers_mut().last_mut().expect("non-empty stack");
            last.kernels.real_mut().fill(0.0);
            last.kernels.imag_mut().fill(0.0);
            last.bias_real.fill(0.0);
            last.bias_imag.fill(0.0);
        }
    }
}

/// Network input `u⁽⁰⁾`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InitialGuess {
    /// `F⁻¹ f`.
    #[default]
    ZeroFilled,
    Zero,
}

impl InitialGuess {
    pub fn name(self) -> &'static str {
        match self {
            InitialGuess::ZeroFilled => "zero_filled",
            InitialGuess::Zero => "zero",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "zero_filled" => Ok(InitialGuess::ZeroFilled),
            "zero" => Ok(InitialGuess::Zero),
            other => Err(Error::param(format!("unknown initial guess {other:?}"))),
        }
    }
}

/// Everything that defines the forward pass of the unrolled network.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    pub arch: Architecture,
    pub shrink: ShrinkMode,
    pub init: InitialGuess,
    pub phases: Vec<PhaseParams>,
}

/// Flat view of one parameter tensor.
pub struct ParamTensor<'a> {
    pub name: String,
    pub values: &'a [f64],
}

pub struct ParamTensorMut<'a> {
    pub name: String,
    pub values: &'a mut [f64],
}

impl NetworkParams {
    pub fn zeros(arch: Architecture, phases: usize) -> Result<Self> {
        if phases == 0 {
            return Err(Error::param("the network needs at least one phase"));
        }
        arch.validate()?;
        let phase = PhaseParams::zeros(&arch)?;
        Ok(Self {
            arch,
            shrink: ShrinkMode::default(),
            init: InitialGuess::default(),
            phases: vec![phase; phases],
        })
    }

    /// Xavier-uniform kernels, zero biases, `ρ_t = rho0`, `α_t = alpha0`.
    pub fn xavier(arch: Architecture, phases: usize, rho0: f64, alpha0: f64, seed: u64) -> Result<Self> {
        let mut params = Self::zeros(arch, phases)?;
        if !(alpha0 >= 0.0) || !rho0.is_finite() {
            return Err(Error::param("rho0 must be finite and alpha0 >= 0"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for phase in &mut params.phases {
            phase.rho = rho0;
            phase.alpha = alpha0;
            for op in Operator::ALL {
                let spec = phase.operator(op).spec();
                *phase.operator_mut(op) = ConvStack::xavier(&spec, &mut rng);
            }
        }
        Ok(params)
    }

    pub fn num_phases(&self) -> usize {
        self.phases.len()
    }

    /// Same structure with every value zero; used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        for t in out.tensors_mut() {
            t.values.fill(0.0);
        }
        out
    }

    /// All parameter tensors in a fixed order with stable names.
    pub fn tensors(&self) -> Vec<ParamTensor<'_>> {
        let mut out = Vec::new();
        for (t, phase) in self.phases.iter().enumerate() {
            out.push(ParamTensor {
                name: format!("phase{t}.rho"),
                values: std::slice::from_ref(&phase.rho),
            });
            out.push(ParamTensor {
                name: format!("phase{t}.alpha"),
                values: std::slice::from_ref(&phase.alpha),
            });
            for op in Operator::ALL {
                for (l, layer) in phase.operator(op).layers().iter().enumerate() {
                    let prefix = format!("phase{t}.{}.layer{l}", op.name());
                    out.push(ParamTensor {
                        name: format!("{prefix}.weight_real"),
                        values: layer.kernels.real(),
                    });
                    out.push(ParamTensor {
                        name: format!("{prefix}.weight_imag"),
                        values: layer.kernels.imag(),
                    });
                    out.push(ParamTensor {
                        name: format!("{prefix}.bias_real"),
                        values: &layer.bias_real,
                    });
                    out.push(ParamTensor {
                        name: format!("{prefix}.bias_imag"),
                        values: &layer.bias_imag,
                    });
                }
            }
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<ParamTensorMut<'_>> {
        let mut out = Vec::new();
        for (t, phase) in self.phases.iter_mut().enumerate() {
            out.push(ParamTensorMut {
                name: format!("phase{t}.rho"),
                values: std::slice::from_mut(&mut phase.rho),
            });
            out.push(ParamTensorMut {
                name: format!("phase{t}.alpha"),
                values: std::slice::from_mut(&mut phase.alpha),
            });
            let PhaseParams {
                combiner,
                encoder,
                decoder,
                expander,
                ..
            } = phase;
            for (op, stack) in Operator::ALL.into_iter().zip([combiner, encoder, decoder, expander]) {
                for (l, layer) in stack.layers_mut().iter_mut().enumerate() {
                    let prefix = format!("phase{t}.{}.layer{l}", op.name());
                    let (wr, wi) = layer.kernels.banks_mut();
                    out.push(ParamTensorMut {
                        name: format!("{prefix}.weight_real"),
                        values: wr,
                    });
                    out.push(ParamTensorMut {
                        name: format!("{prefix}.weight_imag"),
                        values: wi,
                    });
                    out.push(ParamTensorMut {
                        name: format!("{prefix}.bias_real"),
                        values: &mut layer.bias_real,
                    });
                    out.push(ParamTensorMut {
                        name: format!("{prefix}.bias_imag"),
                        values: &mut layer.bias_imag,
                    });
                }
            }
        }
        out
    }

    pub fn num_values(&self) -> usize {
        self.tensors().iter().map(|t| t.values.len()).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_values());
        for t in self.tensors() {
            out.extend_from_slice(t.values);
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_values() {
            return Err(Error::shape(format!(
                "{} values for {} parameters",
                flat.len(),
                self.num_values()
            )));
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            let n = t.values.len();
            t.values.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    /// Flat indices of the `α_t` entries.
    pub fn alpha_indices(&self) -> Vec<usize> {
        let mut offset = 0;
        let mut out = Vec::new();
        for t in self.tensors() {
            if t.name.ends_with(".alpha") {
                out.push(offset);
            }
            offset += t.values.len();
        }
        out
    }

    /// Zeroes every phase's residual branch (see [`PhaseParams::zero_residual`]).
    pub fn zero_residuals(&mut self) {
        for phase in &mut self.phases {
            phase.zero_residual();
        }
    }

    pub fn initial_guess(&self, f: &KSpaceData) -> Result<ComplexImageStack> {
        check_coils(&self.arch, f.coils())?;
        match self.init {
            InitialGuess::ZeroFilled => crate::mri::zero_filled_recon(f),
            InitialGuess::Zero => {
                let (h, w, c) = f.coils().shape();
                Ok(ComplexTensor::zeros(h, w, c))
            }
        }
    }
}

pub(crate) fn check_coils(arch: &Architecture, x: &ComplexTensor) -> Result<()> {
    if x.channels() != arch.coils {
        return Err(Error::shape(format!(
            "network built for {} coils, data has {}",
            arch.coils,
            x.channels()
        )));
    }
    Ok(())
}

/// `v = J(u)`: one complex image from the coil stack.
pub fn apply_j(u: &ComplexImageStack, phase: &PhaseParams) -> Result<ComplexTensor> {
    phase.combiner.forward(u)
}

/// `G(v)`: sparse features of a single image.
pub fn apply_g(v: &ComplexTensor, phase: &PhaseParams) -> Result<ComplexTensor> {
    phase.encoder.forward(v)
}

/// `G(v)` with every ReLU replaced by the identity.
pub fn apply_g_linear(v: &ComplexTensor, phase: &PhaseParams) -> Result<ComplexTensor> {
    phase.encoder.forward_with(v, ActivationMode::Linear)
}

/// `u = b + J̃(G̃(S_α(G(J(b)))))`.
///
/// This is the explicit form of the proximal step: the prox of `‖G∘J(·)‖₂,₁`
/// is replaced by a learned residual in which the only nonlinearity tied to
/// the regularizer is the shrinkage on the sparse features.
pub fn phase_update(b: &ComplexImageStack, phase: &PhaseParams, mode: ShrinkMode) -> Result<ComplexImageStack> {
    let v = apply_j(b, phase)?;
    let z = apply_g(&v, phase)?;
    let s = shrink_l21(&z, phase.alpha, mode)?;
    let w = phase.decoder.forward(&s)?;
    let r = phase.expander.forward(&w)?;
    b.add(&r)
}

/// Output of the unrolled network.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    /// `u⁽ᵀ⁾`, one image per coil.
    pub coils: ComplexImageStack,
    /// `J⁽ᵀ⁾(u⁽ᵀ⁾)`, the combined single image.
    pub single: ComplexTensor,
}

/// Runs `T` phases of gradient step followed by residual update.
pub fn forward_pass(f: &KSpaceData, theta: &NetworkParams) -> Result<Reconstruction> {
    let encoder = Encoder::new(f.mask().clone())?;
    let mut u = theta.initial_guess(f)?;
    for phase in &theta.phases {
        let b = encoder.gradient_step(&u, f.coils(), phase.rho)?;
        u = phase_update(&b, phase, theta.shrink)?;
    }
    let last = theta.phases.last().expect("at least one phase");
    let single = apply_j(&u, last)?;
    Ok(Reconstruction { coils: u, single })
}
