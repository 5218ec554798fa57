use super::encoding::{Encoder, KSpaceData};
use super::phantom::SensitivityMaps;
use crate::error::{Error, Result};
use crate::numerics::{inner_product, ComplexTensor};

#[derive(Clone, Debug)]
pub struct CgSenseResult {
    pub image: ComplexTensor,
    pub iterations: usize,
    /// False when `iters` ran out before the normal-equation residual reached `tol`.
    pub converged: bool,
    /// `‖E v_k − f‖` for `k = 0..=iterations`, with `E v = (P F (s_i v))_i`.
    pub residuals: Vec<f64>,
}

struct SenseOperator<'a> {
    encoder: Encoder,
    maps: &'a SensitivityMaps,
}

impl SenseOperator<'_> {
    fn forward(&self, v: &ComplexTensor) -> Result<ComplexTensor> {
        self.encoder.forward(&self.maps.apply(v)?)
    }

    fn adjoint(&self, f: &ComplexTensor) -> Result<ComplexTensor> {
        self.maps.combine(&self.encoder.adjoint(f)?)
    }
}

/// Conjugate gradient on the normal equations of `min_v Σ_i ½‖PF(s_i v) − f_i‖²`.
///
/// Stops once `‖Eᴴ(f − E v)‖ ≤ tol · ‖Eᴴ f‖`. The data residual is
/// non-increasing across iterations.
pub fn cg_sense_baseline(
    f: &KSpaceData,
    sens: &SensitivityMaps,
    iters: usize,
    tol: f64,
) -> Result<CgSenseResult> {
    let maps = sens.maps();
    if maps.shape() != f.coils().shape() {
        return Err(Error::shape(format!(
            "sensitivities {:?} vs k-space {:?}",
            maps.shape(),
            f.coils().shape()
        )));
    }
    if !(tol >= 0.0) {
        return Err(Error::param(format!("tolerance {tol} must be >= 0")));
    }
    let op = SenseOperator {
        encoder: Encoder::new(f.mask().clone())?,
        maps: sens,
    };
    let data = f.coils();
    let mut x = ComplexTensor::zeros(data.height(), data.width(), 1);
    let mut r = op.adjoint(data)?;
    let rhs_norm = r.norm();
    let mut residuals = vec![data.norm()];
    if rhs_norm == 0.0 {
        return Ok(CgSenseResult {
            image: x,
            iterations: 0,
            converged: true,
            residuals,
        });
    }
    let mut p = r.clone();
    let mut rs = r.norm_sqr();
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..iters {
        let q = op.adjoint(&op.forward(&p)?)?;
        let curvature = inner_product(&p, &q)?.re;
        if !(curvature > 0.0) {
            break;
        }
        let a = rs / curvature;
        x.axpy(a.into(), &p)?;
        r.axpy((-a).into(), &q)?;
        iterations += 1;
        residuals.push(op.forward(&x)?.sub(data)?.norm());
        let rs_new = r.norm_sqr();
        if rs_new.sqrt() <= tol * rhs_norm {
            converged = true;
            break;
        }
        let beta = rs_new / rs;
        rs = rs_new;
        let mut next = r.clone();
        next.axpy(beta.into(), &p)?;
        p = next;
    }
    Ok(CgSenseResult {
        image: x,
        iterations,
        converged,
        residuals,
    })
}
