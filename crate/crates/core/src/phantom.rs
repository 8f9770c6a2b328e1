//! Synthetic data: Shepp-Logan-style phantoms (optionally jittered to form
//! a dataset) and smooth random phase maps.

use ndarray::Array2;
use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nufft::ComplexImage;

/// (intensity, semi-axis a, semi-axis b, x0, y0, angle in degrees)
/// Modified Shepp-Logan parameters in the unit square [-1, 1]^2.
const ELLIPSES: [(f64, f64, f64, f64, f64, f64); 10] = [
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
];

/// 10-ellipse phantom rasterized by per-pixel membership summation, values
/// clipped to [0, 1]. With a seed, ellipse centers, axes and angles are
/// jittered by up to 5% to generate a dataset.
///
/// Pixel (i, j) maps to (x, y) = ((2j - N + 1)/N, (N - 1 - 2i)/N), so the
/// grid is symmetric about the origin.
pub fn shepp_logan(n: usize, perturb_seed: Option<u64>) -> Result<Array2<f64>> {
    if n < 16 || n % 2 != 0 {
        return Err(Error::InvalidArgument("phantom size must be even and >= 16".into()));
    }
    let mut ellipses = ELLIPSES;
    if let Some(seed) = perturb_seed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for e in &mut ellipses {
            let jitter = |rng: &mut ChaCha8Rng| 1.0 + 0.05 * rng.gen_range(-1.0..1.0);
            e.1 *= jitter(&mut rng);
            e.2 *= jitter(&mut rng);
            e.3 += 0.05 * rng.gen_range(-1.0..1.0) * e.1;
            e.4 += 0.05 * rng.gen_range(-1.0..1.0) * e.2;
            e.5 += 0.05 * 180.0 * rng.gen_range(-1.0..1.0);
        }
    }
    let nf = n as f64;
    let mut img = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        let y = (nf - 1.0 - 2.0 * i as f64) / nf;
        for j in 0..n {
            let x = (2.0 * j as f64 - nf + 1.0) / nf;
            let mut v = 0.0;
            for &(intensity, a, b, x0, y0, phi_deg) in &ellipses {
                let phi = phi_deg.to_radians();
                let (s, c) = phi.sin_cos();
                let xr = c * (x - x0) + s * (y - y0);
                let yr = -s * (x - x0) + c * (y - y0);
                if (xr / a).powi(2) + (yr / b).powi(2) <= 1.0 {
                    v += intensity;
                }
            }
            img[[i, j]] = v.clamp(0.0, 1.0);
        }
    }
    Ok(img)
}

/// Attach a smooth random phase: `x = mag .* exp(i phi)` where phi is a
/// random polynomial of total degree <= 2 in the normalized coordinates,
/// scaled so that `max |phi| = pi * smoothness`.
pub fn synth_phase(mag: &Array2<f64>, smoothness: f64, seed: u64) -> Result<ComplexImage> {
    if !(smoothness > 0.0) {
        return Err(Error::InvalidArgument("smoothness must be > 0".into()));
    }
    let n = mag.shape()[0];
    if mag.shape()[1] != n {
        return Err(Error::ShapeMismatch("phase: image must be square".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeff: [f64; 6] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
    let nf = n as f64;
    let raw = Array2::from_shape_fn((n, n), |(i, j)| {
        let y = (nf - 1.0 - 2.0 * i as f64) / nf;
        let x = (2.0 * j as f64 - nf + 1.0) / nf;
        coeff[0] + coeff[1] * x + coeff[2] * y + coeff[3] * x * x + coeff[4] * x * y
            + coeff[5] * y * y
    });
    let peak = raw.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let scale = if peak > 0.0 {
        std::f64::consts::PI * smoothness / peak
    } else {
        0.0
    };
    let data = Array2::from_shape_fn((n, n), |(i, j)| {
        Complex64::from_polar(mag[[i, j]], raw[[i, j]] * scale)
    });
    ComplexImage::new(data)
}
