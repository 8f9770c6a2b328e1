//! Exact (direct-evaluation) non-uniform Fourier operator: forward,
//! adjoint, and the analytic Jacobian with respect to sample locations.
//!
//! Conventions, inherited by every downstream module:
//!   * pixel coordinates r run over the centered integer grid
//!     {-N/2, ..., N/2 - 1}^2 (first array axis is r0, second is r1);
//!   * forward: `y_m = sum_n x_n exp(-2*pi*i k_m . r_n)`, no 1/N scaling;
//!   * adjoint is the exact conjugate transpose.
//!
//! Evaluation is O(M N^2) with per-location phase tables, so the separable
//! exponent costs two exponentials per (location, axis) rather than one
//! per (location, pixel).

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Square complex-valued image, N even.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexImage {
    pub data: Array2<Complex64>,
}

impl ComplexImage {
    pub fn new(data: Array2<Complex64>) -> Result<Self> {
        let sh = data.shape();
        if sh[0] != sh[1] {
            return Err(Error::ShapeMismatch("image must be square".into()));
        }
        if sh[0] % 2 != 0 {
            return Err(Error::InvalidArgument("image size must be even".into()));
        }
        Ok(ComplexImage { data })
    }

    pub fn zeros(n: usize) -> Self {
        ComplexImage {
            data: Array2::zeros((n, n)),
        }
    }

    pub fn size(&self) -> usize {
        self.data.shape()[0]
    }

    /// Magnitude image.
    pub fn magnitude(&self) -> Array2<f64> {
        self.data.mapv(|v| v.norm())
    }

    pub fn from_real(mag: &Array2<f64>) -> Result<Self> {
        ComplexImage::new(mag.mapv(|v| Complex64::new(v, 0.0)))
    }
}

/// M complex samples and their normalized k-space locations.
#[derive(Debug, Clone, PartialEq)]
pub struct KSpaceData {
    pub samples: Vec<Complex64>,
    pub locations: Vec<[f64; 2]>,
}

impl KSpaceData {
    pub fn new(samples: Vec<Complex64>, locations: Vec<[f64; 2]>) -> Result<Self> {
        if samples.len() != locations.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} samples vs {} locations",
                samples.len(),
                locations.len()
            )));
        }
        Ok(KSpaceData { samples, locations })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Precomputed per-location phase tables for a fixed set of sample
/// locations. Amortizes the exponentials across the many transforms an
/// optimization step performs at the same locations.
pub struct NufftPlan {
    n: usize,
    locations: Vec<[f64; 2]>,
    /// exp(-2 pi i k0 r) per location, length N each.
    phase0: Vec<Vec<Complex64>>,
    /// exp(-2 pi i k1 r) per location.
    phase1: Vec<Vec<Complex64>>,
}

impl NufftPlan {
    pub fn new(locations: &[[f64; 2]], n: usize) -> Result<Self> {
        if n == 0 || n % 2 != 0 {
            return Err(Error::InvalidArgument("image size must be even and positive".into()));
        }
        let half = (n / 2) as isize;
        let mut phase0 = Vec::with_capacity(locations.len());
        let mut phase1 = Vec::with_capacity(locations.len());
        for k in locations {
            let mut p0 = Vec::with_capacity(n);
            let mut p1 = Vec::with_capacity(n);
            for idx in 0..n as isize {
                let r = (idx - half) as f64;
                p0.push(Complex64::from_polar(1.0, -TWO_PI * k[0] * r));
                p1.push(Complex64::from_polar(1.0, -TWO_PI * k[1] * r));
            }
            phase0.push(p0);
            phase1.push(p1);
        }
        Ok(NufftPlan {
            n,
            locations: locations.to_vec(),
            phase0,
            phase1,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.locations.len()
    }

    pub fn locations(&self) -> &[[f64; 2]] {
        &self.locations
    }

    fn check_image(&self, x: &ComplexImage) -> Result<()> {
        if x.size() != self.n {
            return Err(Error::ShapeMismatch(format!(
                "image size {} vs plan size {}",
                x.size(),
                self.n
            )));
        }
        Ok(())
    }

    /// `y_m = sum_n x_n exp(-2 pi i k_m . r_n)`.
    pub fn forward(&self, x: &ComplexImage) -> Result<Vec<Complex64>> {
        self.check_image(x)?;
        let n = self.n;
        let mut y = Vec::with_capacity(self.locations.len());
        for m in 0..self.locations.len() {
            let p0 = &self.phase0[m];
            let p1 = &self.phase1[m];
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..n {
                let row = x.data.row(i);
                let mut inner = Complex64::new(0.0, 0.0);
                for j in 0..n {
                    inner += row[j] * p1[j];
                }
                acc += p0[i] * inner;
            }
            y.push(acc);
        }
        Ok(y)
    }

    /// `x_n = sum_m y_m exp(+2 pi i k_m . r_n)`, the exact adjoint.
    pub fn adjoint(&self, y: &[Complex64]) -> Result<ComplexImage> {
        if y.len() != self.locations.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} samples vs {} plan locations",
                y.len(),
                self.locations.len()
            )));
        }
        let n = self.n;
        let mut out = Array2::<Complex64>::zeros((n, n));
        for m in 0..y.len() {
            let p0 = &self.phase0[m];
            let p1 = &self.phase1[m];
            for i in 0..n {
                let w = y[m] * p0[i].conj();
                let mut row = out.row_mut(i);
                for j in 0..n {
                    row[j] += w * p1[j].conj();
                }
            }
        }
        ComplexImage::new(out)
    }

    /// Analytic gradient of `Re<cotangent, y(K)>` with respect to the
    /// sample locations, where `y(K)` is the forward transform of `x` and
    /// `<c, y> = sum_m conj(c_m) y_m`.
    ///
    /// Uses `dy_m/dk_m^(a) = -2 pi i sum_n r_n^(a) x_n exp(-2 pi i k_m . r_n)`.
    pub fn location_grad(&self, x: &ComplexImage, cotangent: &[Complex64]) -> Result<Vec<[f64; 2]>> {
        self.check_image(x)?;
        if cotangent.len() != self.locations.len() {
            return Err(Error::ShapeMismatch("cotangent length mismatch".into()));
        }
        let n = self.n;
        let half = (n / 2) as isize;
        let mut grad = Vec::with_capacity(self.locations.len());
        for m in 0..self.locations.len() {
            let p0 = &self.phase0[m];
            let p1 = &self.phase1[m];
            // s_i = sum_j x[i,j] p1[j],  t_i = sum_j r1_j x[i,j] p1[j]
            let mut d0 = Complex64::new(0.0, 0.0); // forward of r0 .* x
            let mut d1 = Complex64::new(0.0, 0.0); // forward of r1 .* x
            for i in 0..n {
                let row = x.data.row(i);
                let mut s = Complex64::new(0.0, 0.0);
                let mut t = Complex64::new(0.0, 0.0);
                for j in 0..n {
                    let v = row[j] * p1[j];
                    s += v;
                    t += ((j as isize - half) as f64) * v;
                }
                let r0 = (i as isize - half) as f64;
                d0 += p0[i] * s * r0;
                d1 += p0[i] * t;
            }
            let c = cotangent[m].conj();
            let minus_two_pi_i = Complex64::new(0.0, -TWO_PI);
            grad.push([
                (c * minus_two_pi_i * d0).re,
                (c * minus_two_pi_i * d1).re,
            ]);
        }
        Ok(grad)
    }
}

/// One-shot forward transform (builds a throwaway plan).
pub fn nufft_forward(x: &ComplexImage, locations: &[[f64; 2]]) -> Result<KSpaceData> {
    let plan = NufftPlan::new(locations, x.size())?;
    let samples = plan.forward(x)?;
    KSpaceData::new(samples, locations.to_vec())
}

/// One-shot adjoint transform.
pub fn nufft_adjoint(y: &KSpaceData, n: usize) -> Result<ComplexImage> {
    let plan = NufftPlan::new(&y.locations, n)?;
    plan.adjoint(&y.samples)
}

/// One-shot location gradient.
pub fn nufft_location_grad(
    x: &ComplexImage,
    locations: &[[f64; 2]],
    cotangent: &[Complex64],
) -> Result<Vec<[f64; 2]>> {
    let plan = NufftPlan::new(locations, x.size())?;
    plan.location_grad(x, cotangent)
}

/// The full N x N Cartesian grid of normalized locations, row-major, each
/// coordinate in {-N/2, ..., N/2 - 1} / N.
pub fn cartesian_grid(n: usize) -> Vec<[f64; 2]> {
    let half = (n / 2) as isize;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n as isize {
        for j in 0..n as isize {
            out.push([
                (i - half) as f64 / n as f64,
                (j - half) as f64 / n as f64,
            ]);
        }
    }
    out
}

#[cfg(test)]
pub(crate) fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

#[cfg(test)]
pub(crate) fn inner_image(a: &ComplexImage, b: &ComplexImage) -> Complex64 {
    a.data
        .iter()
        .zip(b.data.iter())
        .map(|(x, y)| x.conj() * y)
        .sum()
}
