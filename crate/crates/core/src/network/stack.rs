use rand::Rng;

use super::arch::{Activation, ConvStackSpec, LayerSpec};
use crate::error::{Error, Result};
use crate::numerics::conv::Geometry;
use crate::numerics::{ComplexTensor, ConvKernelBank, KernelShape};

/// One convolution with separate real/imaginary banks and biases.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer {
    pub spec: LayerSpec,
    pub kernels: ConvKernelBank,
    pub bias_real: Vec<f64>,
    pub bias_imag: Vec<f64>,
}

impl ConvLayer {
    pub fn zeros(spec: LayerSpec) -> Self {
        Self {
            spec,
            kernels: ConvKernelBank::zeros(kernel_shape(&spec)),
            bias_real: vec![0.0; spec.out_channels],
            bias_imag: vec![0.0; spec.out_channels],
        }
    }

    pub fn shape(&self) -> KernelShape {
        self.kernels.shape()
    }

    fn geometry(&self, height: usize, width: usize) -> Geometry {
        Geometry {
            height,
            width,
            shape: self.shape(),
        }
    }
}

pub(crate) fn kernel_shape(spec: &LayerSpec) -> KernelShape {
    KernelShape::square(spec.out_channels, spec.in_channels, spec.kernel_size)
}

/// Activations seen during a forward pass, kept for the backward pass.
#[derive(Clone, Debug)]
pub struct StackTape {
    height: usize,
    width: usize,
    /// Input planes of every layer followed by the stack output.
    real: Vec<Vec<f64>>,
    imag: Vec<Vec<f64>>,
}

/// A feed-forward stack of [`ConvLayer`]s.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvStack {
    layers: Vec<ConvLayer>,
}

/// How activations are evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActivationMode {
    AsSpecified,
    /// Every activation replaced by the identity; makes the stack linear.
    Linear,
}

impl ConvStack {
    pub fn zeros(spec: &ConvStackSpec) -> Self {
        Self {
            layers: spec.layers().iter().map(|l| ConvLayer::zeros(*l)).collect(),
        }
    }

    /// Xavier-uniform kernels, independent for the real and imaginary banks; zero biases.
    pub fn xavier(spec: &ConvStackSpec, rng: &mut impl Rng) -> Self {
        let mut stack = Self::zeros(spec);
        for layer in &mut stack.layers {
            let shape = layer.shape();
            let bound = xavier_bound(shape);
            for w in layer.kernels.real_mut() {
                *w = rng.random_range(-bound..=bound);
            }
            for w in layer.kernels.imag_mut() {
                *w = rng.random_range(-bound..=bound);
            }
        }
        stack
    }

    pub fn from_layers(layers: Vec<ConvLayer>) -> Result<Self> {
        let specs = layers.iter().map(|l| l.spec).collect();
        ConvStackSpec::new(specs)?;
        for l in &layers {
            if l.kernels.shape() != kernel_shape(&l.spec)
                || l.bias_real.len() != l.spec.out_channels
                || l.bias_imag.len() != l.spec.out_channels
            {
                return Err(Error::shape(format!("layer tensors do not match {:?}", l.spec)));
            }
        }
        Ok(Self { layers })
    }

    pub fn spec(&self) -> ConvStackSpec {
        ConvStackSpec::new(self.layers.iter().map(|l| l.spec).collect()).expect("validated")
    }

    pub fn layers(&self) -> &[ConvLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [ConvLayer] {
        &mut self.layers
    }

    pub fn in_channels(&self) -> usize {
        self.layers[0].spec.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.layers[self.layers.len() - 1].spec.out_channels
    }

    pub fn forward(&self, x: &ComplexTensor) -> Result<ComplexTensor> {
        self.forward_with(x, ActivationMode::AsSpecified)
    }

    pub fn forward_with(&self, x: &ComplexTensor, mode: ActivationMode) -> Result<ComplexTensor> {
        let tape = self.run(x, mode, false)?;
        Ok(tape.output())
    }

    /// Forward pass that records what [`ConvStack::backward`] needs.
    pub fn forward_taped(&self, x: &ComplexTensor) -> Result<StackTape> {
        self.run(x, ActivationMode::AsSpecified, true)
    }

    fn run(&self, x: &ComplexTensor, mode: ActivationMode, keep: bool) -> Result<StackTape> {
        if x.channels() != self.in_channels() {
            return Err(Error::shape(format!(
                "stack expects {} channels, got {}",
                self.in_channels(),
                x.channels()
            )));
        }
        let (h, w) = (x.height(), x.width());
        let n = h * w;
        let mut tape = StackTape {
            height: h,
            width: w,
            real: vec![x.real_part()],
            imag: vec![x.imag_part()],
        };
        for layer in &self.layers {
            let geo = layer.geometry(h, w);
            let out_len = layer.spec.out_channels * n;
            let mut re = vec![0.0; out_len];
            let mut im = vec![0.0; out_len];
            {
                let (ri, ii) = (tape.real.last().unwrap(), tape.imag.last().unwrap());
                geo.correlate(ri, layer.kernels.real(), Some(&layer.bias_real), &mut re);
                geo.correlate(ii, layer.kernels.imag(), Some(&layer.bias_imag), &mut im);
            }
            if mode == ActivationMode::AsSpecified && layer.spec.activation == Activation::Relu {
                re.iter_mut().chain(im.iter_mut()).for_each(|v| *v = v.max(0.0));
            }
            if !keep {
                tape.real.clear();
                tape.imag.clear();
            }
            tape.real.push(re);
            tape.imag.push(im);
        }
        Ok(tape)
    }

    /// Backpropagates `grad_out` (as `∂L/∂Re + i ∂L/∂Im`), accumulating
    /// parameter gradients into `grads` and returning the input gradient.
    pub fn backward(
        &self,
        tape: &StackTape,
        grad_out: &ComplexTensor,
        grads: &mut ConvStack,
    ) -> Result<ComplexTensor> {
        let (h, w) = (tape.height, tape.width);
        if grad_out.height() != h || grad_out.width() != w || grad_out.channels() != self.out_channels() {
            return Err(Error::shape("output gradient does not match the taped forward pass"));
        }
        if tape.real.len() != self.layers.len() + 1 {
            return Err(Error::shape("tape was not recorded by this stack"));
        }
        let mut g_re = grad_out.real_part();
        let mut g_im = grad_out.imag_part();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            if layer.spec.activation == Activation::Relu {
                // Zero-side derivative at the kink.
                for (g, &y) in g_re.iter_mut().zip(&tape.real[l + 1]) {
                    if y <= 0.0 {
                        *g = 0.0;
                    }
                }
                for (g, &y) in g_im.iter_mut().zip(&tape.imag[l + 1]) {
                    if y <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            let geo = layer.geometry(h, w);
            let gl = &mut grads.layers[l];
            geo.weight_grad(&tape.real[l], &g_re, gl.kernels.real_mut(), Some(&mut gl.bias_real));
            geo.weight_grad(&tape.imag[l], &g_im, gl.kernels.imag_mut(), Some(&mut gl.bias_imag));
            let in_len = layer.spec.in_channels * h * w;
            let mut next_re = vec![0.0; in_len];
            let mut next_im = vec![0.0; in_len];
            geo.correlate_transpose(&g_re, layer.kernels.real(), &mut next_re);
            geo.correlate_transpose(&g_im, layer.kernels.imag(), &mut next_im);
            g_re = next_re;
            g_im = next_im;
        }
        ComplexTensor::from_parts(h, w, self.in_channels(), &g_re, &g_im)
    }
}

impl StackTape {
    pub fn output(&self) -> ComplexTensor {
        let re = self.real.last().expect("tape holds the output");
        let im = self.imag.last().expect("tape holds the output");
        let channels = re.len() / (self.height * self.width);
        ComplexTensor::from_parts(self.height, self.width, channels, re, im).expect("consistent")
    }
}

/// `sqrt(6 / (fan_in + fan_out))` for a kernel bank.
pub fn xavier_bound(shape: KernelShape) -> f64 {
    (6.0 / (shape.fan_in() + shape.fan_out()) as f64).sqrt()
}
