//! Non-learned reconstruction: density-compensated adjoint and a
//! conjugate-gradient least-squares refinement.

use num_complex::Complex64;

use crate::density::DensityWeights;
use crate::error::{Error, Result};
use crate::nufft::{ComplexImage, KSpaceData, NufftPlan};

/// `xhat = F'(w .* y)`.
pub fn dc_adjoint(y: &KSpaceData, w: &DensityWeights, n: usize) -> Result<ComplexImage> {
    if y.len() != w.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} samples vs {} weights",
            y.len(),
            w.len()
        )));
    }
    let plan = NufftPlan::new(&y.locations, n)?;
    plan.adjoint(&w.apply(&y.samples))
}

/// Weighted data residual `|| sqrt(w) .* (F x - y) ||`.
pub fn weighted_residual(
    plan: &NufftPlan,
    x: &ComplexImage,
    y: &[Complex64],
    w: &DensityWeights,
) -> Result<f64> {
    let fx = plan.forward(x)?;
    Ok(fx
        .iter()
        .zip(y)
        .zip(&w.w)
        .map(|((a, b), &wi)| wi * (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt())
}

/// Approximately minimizes `|| sqrt(w) .* (F x - y) ||^2` by conjugate
/// gradients on the normal equations `F' W F x = F' W y`, starting from
/// the density-compensated adjoint.
pub fn cg_least_squares(
    y: &KSpaceData,
    w: &DensityWeights,
    n: usize,
    iters: usize,
) -> Result<ComplexImage> {
    if iters == 0 {
        return Err(Error::InvalidArgument("cg iterations must be >= 1".into()));
    }
    if y.len() != w.len() {
        return Err(Error::ShapeMismatch("samples vs weights length".into()));
    }
    let plan = NufftPlan::new(&y.locations, n)?;
    let apply_normal = |x: &ComplexImage| -> Result<ComplexImage> {
        let fx = plan.forward(x)?;
        plan.adjoint(&w.apply(&fx))
    };
    let b = plan.adjoint(&w.apply(&y.samples))?;

    let mut x = b.clone(); // dc_adjoint initialization
    let ax = apply_normal(&x)?;
    let mut r = ComplexImage::new(&b.data - &ax.data)?;
    let mut p = r.clone();
    let mut rs_old: f64 = r.data.iter().map(|v| v.norm_sqr()).sum();
    for _ in 0..iters {
        if rs_old == 0.0 {
            break;
        }
        let ap = apply_normal(&p)?;
        let pap: f64 = p
            .data
            .iter()
            .zip(ap.data.iter())
            .map(|(a, b)| (a.conj() * b).re)
            .sum();
        if !pap.is_finite() {
            return Err(Error::Numerical("CG curvature is not finite".into()));
        }
        if pap <= 0.0 {
            break; // numerically singular direction
        }
        let alpha = rs_old / pap;
        x = ComplexImage::new(&x.data + &(p.data.mapv(|v| v * alpha)))?;
        r = ComplexImage::new(&r.data - &(ap.data.mapv(|v| v * alpha)))?;
        let rs_new: f64 = r.data.iter().map(|v| v.norm_sqr()).sum();
        if !rs_new.is_finite() {
            return Err(Error::Numerical("CG residual is not finite".into()));
        }
        let beta = rs_new / rs_old;
        p = ComplexImage::new(&r.data + &(p.data.mapv(|v| v * beta)))?;
        rs_old = rs_new;
    }
    if x.data.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Numerical("CG produced non-finite image".into()));
    }
    Ok(x)
}
