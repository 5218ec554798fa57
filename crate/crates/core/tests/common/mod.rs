#![allow(dead_code)]

use std::f64::consts::TAU;

use pmri_core::mri::{make_cartesian_mask, KSpaceData, TrainingSample};
use pmri_core::network::{Architecture, NetworkParams};
use pmri_core::numerics::{Complex64, ComplexTensor, ConvKernelBank, KernelShape};
use pmri_core::training::{backward, sample_loss, LossConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_tensor(h: usize, w: usize, c: usize, rng: &mut impl Rng) -> ComplexTensor {
    let data = (0..h * w * c)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    ComplexTensor::from_vec(h, w, c, data).unwrap()
}

pub fn random_bank(shape: KernelShape, rng: &mut impl Rng) -> ConvKernelBank {
    let mut draw = || (0..shape.len()).map(|_| rng.random::<f64>() - 0.5).collect::<Vec<_>>();
    let re = draw();
    let im = draw();
    ConvKernelBank::new(shape, re, im).unwrap()
}

/// Centered DFT summed term by term.
pub fn brute_dft(x: &ComplexTensor, inverse: bool) -> ComplexTensor {
    let (h, w) = (x.height(), x.width());
    let (cy, cx) = ((h / 2) as f64, (w / 2) as f64);
    let sign = if inverse { 1.0 } else { -1.0 };
    let scale = 1.0 / ((h * w) as f64).sqrt();
    let mut out = ComplexTensor::zeros(h, w, 1);
    for ky in 0..h {
        for kx in 0..w {
            let mut acc = Complex64::new(0.0, 0.0);
            for ny in 0..h {
                for nx in 0..w {
                    let phase = sign
                        * TAU
                        * ((ky as f64 - cy) * (ny as f64 - cy) / h as f64 + (kx as f64 - cx) * (nx as f64 - cx) / w as f64);
                    acc += x.get(ny, nx, 0) * Complex64::from_polar(1.0, phase);
                }
            }
            out.set(ky, kx, 0, acc * scale);
        }
    }
    out
}

/// Minimizes `α‖x‖₂ + ½‖x − b‖²` over a 2-D grid, refined around the best point.
pub fn prox_grid(b: [f64; 2], alpha: f64) -> [f64; 2] {
    let objective = |x: [f64; 2]| alpha * x[0].hypot(x[1]) + 0.5 * ((x[0] - b[0]).powi(2) + (x[1] - b[1]).powi(2));
    let mut center = [0.0, 0.0];
    let mut span = b[0].abs().max(b[1].abs()) + 1.0;
    for _ in 0..40 {
        let mut best = (f64::INFINITY, center);
        for i in -20..=20 {
            for j in -20..=20 {
                let x = [center[0] + span * i as f64 / 20.0, center[1] + span * j as f64 / 20.0];
                let v = objective(x);
                if v < best.0 {
                    best = (v, x);
                }
            }
        }
        center = best.1;
        span *= 0.25;
    }
    center
}

pub fn small_arch(coils: usize) -> Architecture {
    Architecture {
        coils,
        depth: 3,
        combiner_filters: 4,
        combiner_kernel: 3,
        encoder_filters: 4,
        encoder_kernel: 3,
        sparse_channels: 2,
    }
}

/// A smooth random multi-coil image and its undersampled k-space.
pub fn toy_sample(h: usize, w: usize, coils: usize, seed: u64) -> TrainingSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = random_tensor(h, w, coils, &mut rng);
    let mask = make_cartesian_mask(h, w, 0.4, 2).unwrap();
    let k = pmri_core::mri::forward_op(&truth, &mask).unwrap();
    let kspace = KSpaceData::new(k, mask, 0.0).unwrap();
    TrainingSample::new(kspace, truth).unwrap()
}

/// Parameter classes: `rho`, `alpha`, and `{op}.layer{l}.{weight|bias}_{real|imag}`.
pub fn param_class(name: &str) -> String {
    let rest = name.split_once('.').map_or(name, |(_, r)| r);
    rest.to_string()
}

pub struct FdReport {
    pub class: String,
    pub checked: usize,
    /// `‖fd − analytic‖ / ‖analytic‖` over the sampled entries.
    pub rel_err: f64,
}

/// Central differences on up to `per_tensor` entries of every tensor,
/// aggregated per parameter class.
pub fn finite_difference_check(
    sample: &TrainingSample,
    theta: &NetworkParams,
    cfg: &LossConfig,
    per_tensor: usize,
    h: f64,
    seed: u64,
) -> Vec<FdReport> {
    let grad = backward(&sample.kspace, theta, &sample.truth, cfg).unwrap();
    let analytic = grad.grads.to_flat();
    let base = theta.to_flat();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut offset = 0;
    let mut classes: Vec<(String, f64, f64, usize)> = Vec::new();
    for t in theta.tensors() {
        let n = t.values.len();
        let class = param_class(&t.name);
        let picks: Vec<usize> = if n <= per_tensor {
            (0..n).collect()
        } else {
            (0..per_tensor).map(|_| rng.random_range(0..n)).collect()
        };
        for i in picks {
            let idx = offset + i;
            let mut plus = base.clone();
            plus[idx] += h;
            let mut minus = base.clone();
            minus[idx] -= h;
            let mut tp = theta.clone();
            tp.set_flat(&plus).unwrap();
            let mut tm = theta.clone();
            tm.set_flat(&minus).unwrap();
            let fd = (sample_loss(&sample.kspace, &tp, &sample.truth, cfg).unwrap()
                - sample_loss(&sample.kspace, &tm, &sample.truth, cfg).unwrap())
                / (2.0 * h);
            let entry = match classes.iter_mut().find(|c| c.0 == class) {
                Some(e) => e,
                None => {
                    classes.push((class.clone(), 0.0, 0.0, 0));
                    classes.last_mut().unwrap()
                }
            };
            entry.1 += (fd - analytic[idx]).powi(2);
            entry.2 += analytic[idx].powi(2);
            entry.3 += 1;
        }
        offset += n;
    }
    classes
        .into_iter()
        .map(|(class, num, den, checked)| FdReport {
            class,
            checked,
            rel_err: if den > 0.0 { (num / den).sqrt() } else { num.sqrt() },
        })
        .collect()
}

/// Largest relative mismatch between `⟨∇ℓ, d⟩` and central differences
/// along `directions` random unit directions.
pub fn directional_check(
    sample: &TrainingSample,
    theta: &NetworkParams,
    cfg: &LossConfig,
    directions: usize,
    h: f64,
    seed: u64,
) -> f64 {
    let grad = backward(&sample.kspace, theta, &sample.truth, cfg).unwrap().grads.to_flat();
    let base = theta.to_flat();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..directions {
        let mut d: Vec<f64> = (0..base.len()).map(|_| rng.random::<f64>() - 0.5).collect();
        let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        d.iter_mut().for_each(|x| *x /= norm);
        let shifted = |s: f64| {
            let mut t = theta.clone();
            t.set_flat(&base.iter().zip(&d).map(|(b, di)| b + s * di).collect::<Vec<_>>()).unwrap();
            sample_loss(&sample.kspace, &t, &sample.truth, cfg).unwrap()
        };
        let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
        let an: f64 = grad.iter().zip(&d).map(|(g, di)| g * di).sum();
        worst = worst.max((fd - an).abs() / an.abs().max(fd.abs()).max(1e-300));
    }
    worst
}

/// Moves every bias off zero so no pre-activation sits exactly on a ReLU kink.
pub fn jitter_biases(theta: &mut NetworkParams, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in theta.tensors_mut() {
        if t.name.contains(".bias_") {
            t.values.iter_mut().for_each(|v| *v += 0.05 * (rng.random::<f64>() - 0.5));
        }
    }
}
