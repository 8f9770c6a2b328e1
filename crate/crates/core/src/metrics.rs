//! Image quality metrics (PSNR, mean SSIM) and the combined L1-L2-MSSIM
//! training loss with its analytic Wirtinger gradient.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::nufft::ComplexImage;

/// PSNR sentinel for exact equality, in dB.
pub const PSNR_CAP_DB: f64 = 1e9;

/// Huber smoothing width for the L1 gradient.
pub const L1_HUBER_DELTA: f64 = 1e-6;

/// Uniform-window SSIM parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimParams {
    pub window: usize,
    pub k1: f64,
    pub k2: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        SsimParams {
            window: 7,
            k1: 0.01,
            k2: 0.03,
        }
    }
}

impl SsimParams {
    fn validate(&self, n: usize) -> Result<()> {
        if self.window < 3 || self.window % 2 == 0 {
            return Err(Error::InvalidArgument("SSIM window must be odd and >= 3".into()));
        }
        if n < self.window {
            return Err(Error::InvalidArgument(format!(
                "image ({n}) smaller than SSIM window ({})",
                self.window
            )));
        }
        Ok(())
    }
}

/// `10 log10(peak^2 / MSE)` with `peak = max |xref|` and MSE the mean
/// squared magnitude of the complex difference. Exact equality returns
/// the capped-infinity sentinel.
pub fn psnr(xhat: &ComplexImage, xref: &ComplexImage) -> Result<f64> {
    if xhat.size() != xref.size() {
        return Err(Error::ShapeMismatch("psnr: image sizes differ".into()));
    }
    let peak = xref.data.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(Error::InvalidArgument("psnr: zero reference image".into()));
    }
    let n2 = (xref.size() * xref.size()) as f64;
    let mse: f64 = xhat
        .data
        .iter()
        .zip(xref.data.iter())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        / n2;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (peak * peak / mse).log10()).min(PSNR_CAP_DB))
}

struct WindowStats {
    mu1: f64,
    mu2: f64,
    var1: f64,
    var2: f64,
    cov: f64,
}

fn window_stats(a: &Array2<f64>, b: &Array2<f64>, i0: usize, j0: usize, win: usize) -> WindowStats {
    let w2 = (win * win) as f64;
    let (mut s1, mut s2, mut s11, mut s22, mut s12) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in i0..i0 + win {
        for j in j0..j0 + win {
            let x = a[[i, j]];
            let y = b[[i, j]];
            s1 += x;
            s2 += y;
            s11 += x * x;
            s22 += y * y;
            s12 += x * y;
        }
    }
    let mu1 = s1 / w2;
    let mu2 = s2 / w2;
    WindowStats {
        mu1,
        mu2,
        var1: s11 / w2 - mu1 * mu1,
        var2: s22 / w2 - mu2 * mu2,
        cov: s12 / w2 - mu1 * mu2,
    }
}

/// Mean SSIM of two real (magnitude) images over all fully contained
/// uniform windows. `b` is the reference; the stabilizing constants use
/// `L = max(b)`.
pub fn mssim_mag(a: &Array2<f64>, b: &Array2<f64>, params: &SsimParams) -> Result<f64> {
    let n = a.shape()[0];
    if a.shape() != b.shape() || a.shape()[0] != a.shape()[1] {
        return Err(Error::ShapeMismatch("mssim: need equal square images".into()));
    }
    params.validate(n)?;
    // all-zero reference: fall back to unit dynamic range so the
    // stabilizing constants stay positive (two zero images score 1)
    let mut peak = b.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 {
        peak = 1.0;
    }
    let c1 = (params.k1 * peak).powi(2);
    let c2 = (params.k2 * peak).powi(2);
    let win = params.window;
    let mut acc = 0.0;
    let mut count = 0usize;
    for i0 in 0..=n - win {
        for j0 in 0..=n - win {
            let s = window_stats(a, b, i0, j0, win);
            let a1 = 2.0 * s.mu1 * s.mu2 + c1;
            let a2 = 2.0 * s.cov + c2;
            let b1 = s.mu1 * s.mu1 + s.mu2 * s.mu2 + c1;
            let b2 = s.var1 + s.var2 + c2;
            acc += (a1 * a2) / (b1 * b2);
            count += 1;
        }
    }
    Ok(acc / count as f64)
}

/// MSSIM and its derivative with respect to every pixel of `a`.
pub fn mssim_grad_mag(
    a: &Array2<f64>,
    b: &Array2<f64>,
    params: &SsimParams,
) -> Result<(f64, Array2<f64>)> {
    let n = a.shape()[0];
    if a.shape() != b.shape() || a.shape()[0] != a.shape()[1] {
        return Err(Error::ShapeMismatch("mssim: need equal square images".into()));
    }
    params.validate(n)?;
    let mut peak = b.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 {
        peak = 1.0;
    }
    let c1 = (params.k1 * peak).powi(2);
    let c2 = (params.k2 * peak).powi(2);
    let win = params.window;
    let w2 = (win * win) as f64;
    let count = ((n - win + 1) * (n - win + 1)) as f64;
    let mut grad = Array2::<f64>::zeros((n, n));
    let mut acc = 0.0;
    for i0 in 0..=n - win {
        for j0 in 0..=n - win {
            let s = window_stats(a, b, i0, j0, win);
            let a1 = 2.0 * s.mu1 * s.mu2 + c1;
            let a2 = 2.0 * s.cov + c2;
            let b1 = s.mu1 * s.mu1 + s.mu2 * s.mu2 + c1;
            let b2 = s.var1 + s.var2 + c2;
            let denom = b1 * b2;
            acc += (a1 * a2) / denom;
            // dS/da_p via the window statistics:
            //   dmu1 = 1/W, dvar1 = 2(a_p - mu1)/W, dcov = (b_p - mu2)/W
            for i in i0..i0 + win {
                for j in j0..j0 + win {
                    let da1 = 2.0 * s.mu2 / w2;
                    let da2 = 2.0 * (b[[i, j]] - s.mu2) / w2;
                    let db1 = 2.0 * s.mu1 / w2;
                    let db2 = 2.0 * (a[[i, j]] - s.mu1) / w2;
                    let num = (da1 * a2 + a1 * da2) * denom
                        - a1 * a2 * (db1 * b2 + b1 * db2);
                    grad[[i, j]] += num / (denom * denom) / count;
                }
            }
        }
    }
    Ok((acc / count, grad))
}

/// Mean SSIM of the magnitudes of two complex images.
pub fn ssim(xhat: &ComplexImage, xref: &ComplexImage, params: &SsimParams) -> Result<f64> {
    mssim_mag(&xhat.magnitude(), &xref.magnitude(), params)
}

/// `λ1 mean|r| + λ2 mean|r|^2 + λ3 (1 - MSSIM(|xhat|, |xref|))` with
/// `r = xhat - xref`.
pub fn combined_loss(
    xhat: &ComplexImage,
    xref: &ComplexImage,
    weights: (f64, f64, f64),
) -> Result<f64> {
    Ok(combined_loss_and_grad(xhat, xref, weights)?.0)
}

/// Gradient of [`combined_loss`] with respect to `xhat` in the Wirtinger
/// convention `g = dL/d conj(xhat)`, so `dL = 2 Re <g, d xhat>`. The L1
/// kink is Huber-smoothed with delta = 1e-6.
pub fn loss_grad_image(
    xhat: &ComplexImage,
    xref: &ComplexImage,
    weights: (f64, f64, f64),
) -> Result<ComplexImage> {
    Ok(combined_loss_and_grad(xhat, xref, weights)?.1)
}

/// Loss value and Wirtinger gradient in one pass.
pub fn combined_loss_and_grad(
    xhat: &ComplexImage,
    xref: &ComplexImage,
    weights: (f64, f64, f64),
) -> Result<(f64, ComplexImage)> {
    let (l1, l2, l3) = weights;
    if l1 < 0.0 || l2 < 0.0 || l3 < 0.0 {
        return Err(Error::InvalidArgument("loss weights must be nonnegative".into()));
    }
    if xhat.size() != xref.size() {
        return Err(Error::ShapeMismatch("loss: image sizes differ".into()));
    }
    let n = xhat.size();
    let n2 = (n * n) as f64;
    let mut loss = 0.0;
    let mut grad = Array2::<Complex64>::zeros((n, n));

    if l1 > 0.0 || l2 > 0.0 {
        for (g, (a, b)) in grad
            .iter_mut()
            .zip(xhat.data.iter().zip(xref.data.iter()))
        {
            let r = a - b;
            let mag = r.norm();
            loss += (l1 * mag + l2 * mag * mag) / n2;
            let smooth = (mag * mag + L1_HUBER_DELTA * L1_HUBER_DELTA).sqrt();
            *g += r * (l1 / (2.0 * smooth * n2) + l2 / n2);
        }
    }

    if l3 > 0.0 {
        let am = xhat.magnitude();
        let bm = xref.magnitude();
        let (mssim, dmssim) = mssim_grad_mag(&am, &bm, &SsimParams::default())?;
        loss += l3 * (1.0 - mssim);
        for ((g, &d), (&m, v)) in grad
            .iter_mut()
            .zip(dmssim.iter())
            .zip(am.iter().zip(xhat.data.iter()))
        {
            if m > 0.0 {
                // d|x|/d conj(x) = x / (2|x|)
                *g += v * (-l3 * d / (2.0 * m));
            }
        }
    }

    Ok((loss, ComplexImage::new(grad)?))
}
