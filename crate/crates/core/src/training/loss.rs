use crate::error::{Error, Result};
use crate::numerics::{ComplexImageStack, ComplexTensor, RealImage};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossConfig {
    /// Weight of the single-image magnitude term.
    pub gamma: f64,
    /// Added under square roots in the backward pass only.
    pub epsilon_sos: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            gamma: 1e5,
            epsilon_sos: 1e-12,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::param(format!("gamma {} must be >= 0", self.gamma)));
        }
        if !(self.epsilon_sos > 0.0 && self.epsilon_sos.is_finite()) {
            return Err(Error::param(format!("epsilon_sos {} must be > 0", self.epsilon_sos)));
        }
        Ok(())
    }
}

/// Root sum of squares across coils, `s(u)(x) = (Σ_i |u_i(x)|²)^{1/2}`.
pub fn sos(u: &ComplexImageStack) -> RealImage {
    let n = u.pixels();
    let mut out = vec![0.0; n];
    for c in 0..u.channels() {
        for (o, z) in out.iter_mut().zip(u.channel(c)) {
            *o += z.norm_sqr();
        }
    }
    for o in &mut out {
        *o = o.sqrt();
    }
    RealImage::from_vec(u.height(), u.width(), out).expect("sizes match")
}

fn check(u: &ComplexTensor, v: &ComplexTensor, u_hat: &ComplexTensor) -> Result<()> {
    u.check_same_shape(u_hat, "loss: reconstruction vs ground truth")?;
    if v.channels() != 1 || v.height() != u.height() || v.width() != u.width() {
        return Err(Error::shape(format!(
            "loss: single image {:?} for stack {:?}",
            v.shape(),
            u.shape()
        )));
    }
    Ok(())
}

fn l2_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `‖s(u) − s(û)‖₂ + γ ‖|v| − s(û)‖₂` with `v = J(u)` supplied by the caller.
pub fn loss(u: &ComplexImageStack, v: &ComplexTensor, u_hat: &ComplexImageStack, cfg: &LossConfig) -> Result<f64> {
    check(u, v, u_hat)?;
    let target = sos(u_hat);
    let first = l2_diff(sos(u).data(), target.data());
    let mag: Vec<f64> = v.data().iter().map(|z| z.norm()).collect();
    let second = l2_diff(&mag, target.data());
    Ok(first + cfg.gamma * second)
}

/// Loss value with its gradients `(∂ℓ/∂u, ∂ℓ/∂v)`.
///
/// Norms that are exactly zero contribute a zero subgradient.
pub fn loss_backward(
    u: &ComplexImageStack,
    v: &ComplexTensor,
    u_hat: &ComplexImageStack,
    cfg: &LossConfig,
) -> Result<(f64, ComplexImageStack, ComplexTensor)> {
    check(u, v, u_hat)?;
    let eps = cfg.epsilon_sos;
    let target = sos(u_hat);
    let s = sos(u);
    let e1: Vec<f64> = s.data().iter().zip(target.data()).map(|(a, b)| a - b).collect();
    let n1 = e1.iter().map(|e| e * e).sum::<f64>().sqrt();
    let e2: Vec<f64> = v
        .data()
        .iter()
        .zip(target.data())
        .map(|(z, t)| z.norm() - t)
        .collect();
    let n2 = e2.iter().map(|e| e * e).sum::<f64>().sqrt();

    let mut grad_u = ComplexTensor::zeros(u.height(), u.width(), u.channels());
    if n1 > 0.0 {
        for c in 0..u.channels() {
            for (((g, z), e), sv) in grad_u
                .channel_mut(c)
                .iter_mut()
                .zip(u.channel(c))
                .zip(&e1)
                .zip(s.data())
            {
                *g = z * (e / (n1 * (sv * sv + eps).sqrt()));
            }
        }
    }
    let mut grad_v = ComplexTensor::zeros(v.height(), v.width(), 1);
    if n2 > 0.0 && cfg.gamma != 0.0 {
        for ((g, z), e) in grad_v.data_mut().iter_mut().zip(v.data()).zip(&e2) {
            *g = z * (cfg.gamma * e / (n2 * (z.norm_sqr() + eps).sqrt()));
        }
    }
    let value = n1 + cfg.gamma * n2;
    Ok((value, grad_u, grad_v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Complex64;

    fn stack(values: &[(f64, f64)], channels: usize) -> ComplexTensor {
        let data = values.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
        ComplexTensor::from_vec(1, values.len() / channels, channels, data).unwrap()
    }

    #[test]
    fn sos_three_four_five() {
        let u = stack(&[(3.0, 0.0), (0.0, 4.0)], 2);
        assert_eq!(sos(&u).data(), &[5.0]);
        let single = stack(&[(3.0, -4.0), (0.0, 1.0)], 1);
        assert_eq!(sos(&single).data(), &[5.0, 1.0]);
    }

    #[test]
    fn loss_zero_characterization() {
        let u = stack(&[(3.0, 0.0), (1.0, 1.0), (0.0, 4.0), (-1.0, 0.0)], 2);
        let target = sos(&u);
        // v with the right modulus and an arbitrary phase.
        let v = ComplexTensor::from_vec(
            1,
            2,
            1,
            target.data().iter().map(|&m| Complex64::from_polar(m, 0.7)).collect(),
        )
        .unwrap();
        let cfg = LossConfig::default();
        assert!(loss(&u, &v, &u, &cfg).unwrap().abs() < 1e-9);
        let cfg0 = LossConfig { gamma: 0.0, ..cfg };
        let junk = stack(&[(9.0, 9.0), (0.0, 0.0)], 1);
        assert_eq!(loss(&u, &junk, &u, &cfg0).unwrap(), 0.0);
        assert!(loss(&u, &junk, &u, &cfg).unwrap() > 0.0);
    }

    #[test]
    fn loss_matches_scalar_recomputation() {
        let u = stack(&[(0.5, 0.1), (0.2, -0.3), (1.0, 0.0), (0.0, 0.4)], 2);
        let u_hat = stack(&[(0.6, 0.0), (0.1, 0.1), (0.9, -0.2), (0.3, 0.3)], 2);
        let v = stack(&[(0.7, 0.2), (-0.1, 0.5)], 1);
        let cfg = LossConfig { gamma: 3.0, epsilon_sos: 1e-12 };
        let mut t1 = 0.0;
        let mut t2 = 0.0;
        for p in 0..2 {
            let su = (u.channel(0)[p].norm_sqr() + u.channel(1)[p].norm_sqr()).sqrt();
            let sh = (u_hat.channel(0)[p].norm_sqr() + u_hat.channel(1)[p].norm_sqr()).sqrt();
            t1 += (su - sh).powi(2);
            t2 += (v.data()[p].norm() - sh).powi(2);
        }
        let expected = t1.sqrt() + 3.0 * t2.sqrt();
        assert!((loss(&u, &v, &u_hat, &cfg).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let u = stack(&[(0.5, 0.1), (0.2, -0.3), (1.0, 0.0), (0.0, 0.4)], 2);
        let u_hat = stack(&[(0.6, 0.0), (0.1, 0.1), (0.9, -0.2), (0.3, 0.3)], 2);
        let v = stack(&[(0.7, 0.2), (-0.1, 0.5)], 1);
        let cfg = LossConfig { gamma: 3.0, epsilon_sos: 1e-14 };
        let (val, gu, gv) = loss_backward(&u, &v, &u_hat, &cfg).unwrap();
        assert_eq!(val, loss(&u, &v, &u_hat, &cfg).unwrap());
        let h = 1e-6;
        for i in 0..u.len() {
            for (part, d) in [(0, Complex64::new(h, 0.0)), (1, Complex64::new(0.0, h))] {
                let mut up = u.clone();
                let mut um = u.clone();
                up.data_mut()[i] += d;
                um.data_mut()[i] -= d;
                let fd = (loss(&up, &v, &u_hat, &cfg).unwrap() - loss(&um, &v, &u_hat, &cfg).unwrap()) / (2.0 * h);
                let an = if part == 0 { gu.data()[i].re } else { gu.data()[i].im };
                assert!((fd - an).abs() < 1e-7, "u[{i}] part {part}: {fd} vs {an}");
            }
        }
        for i in 0..v.len() {
            let mut vp = v.clone();
            let mut vm = v.clone();
            vp.data_mut()[i] += Complex64::new(0.0, h);
            vm.data_mut()[i] -= Complex64::new(0.0, h);
            let fd = (loss(&u, &vp, &u_hat, &cfg).unwrap() - loss(&u, &vm, &u_hat, &cfg).unwrap()) / (2.0 * h);
            assert!((fd - gv.data()[i].im).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_residual_has_zero_subgradient() {
        let u = stack(&[(0.0, 0.0), (0.3, 0.4)], 1);
        let v = u.clone();
        let (val, gu, gv) = loss_backward(&u, &v, &u, &LossConfig::default()).unwrap();
        assert_eq!(val, 0.0);
        assert_eq!(gu.norm(), 0.0);
        assert_eq!(gv.norm(), 0.0);
    }

    #[test]
    fn invalid_config_and_shapes() {
        assert!(LossConfig { gamma: -1.0, epsilon_sos: 1e-12 }.validate().is_err());
        assert!(LossConfig { gamma: 1.0, epsilon_sos: 0.0 }.validate().is_err());
        let u = stack(&[(1.0, 0.0), (1.0, 0.0)], 2);
        let v = stack(&[(1.0, 0.0), (1.0, 0.0)], 1);
        assert!(loss(&u, &v, &u, &LossConfig::default()).is_err());
    }
}
