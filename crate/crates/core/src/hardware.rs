//! Scanner hardware description and the normalized kinematic bounds
//! derived from it.
//!
//! Trajectories live in the normalized Nyquist box [-0.5, 0.5]^2
//! (cycles/pixel); physical k-space is `normalized * 2 * k_max` with
//! `k_max = N / (2 * fov)`. The peak gradient and slew rate translate into
//! per-raster-step bounds on first and second differences of the
//! normalized coordinates.

use crate::error::{Error, Result};

/// Physical scanner limits and acquisition geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardwareSpec {
    /// Gyromagnetic ratio (Hz/T).
    pub gamma: f64,
    /// Peak gradient amplitude (T/m).
    pub g_max: f64,
    /// Peak slew rate (T/m/s).
    pub s_max: f64,
    /// Gradient raster time Δt (s).
    pub raster_dt: f64,
    /// ADC dwell time δt (s).
    pub dwell_dt: f64,
    /// Field of view (m).
    pub fov: f64,
    /// Matrix size N (pixels per dimension).
    pub matrix_size: usize,
}

impl HardwareSpec {
    /// Typical 3T values: 40 mT/m, 180 T/m/s, Δt = 10 µs, δt = 2 µs.
    pub fn default_3t(matrix_size: usize) -> Self {
        HardwareSpec {
            gamma: 42.576e6,
            g_max: 0.04,
            s_max: 180.0,
            raster_dt: 1e-5,
            dwell_dt: 2e-6,
            fov: 0.23,
            matrix_size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("gamma", self.gamma),
            ("g_max", self.g_max),
            ("s_max", self.s_max),
            ("raster_dt", self.raster_dt),
            ("dwell_dt", self.dwell_dt),
            ("fov", self.fov),
            ("matrix_size", self.matrix_size as f64),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidSpec(format!("{name} must be strictly positive")));
            }
        }
        let ratio = self.raster_dt / self.dwell_dt;
        if ratio < 1.0 - 1e-9 || (ratio - ratio.round()).abs() > 1e-9 * ratio {
            return Err(Error::InvalidSpec(format!(
                "raster_dt must be an integer multiple of dwell_dt (ratio {ratio})"
            )));
        }
        Ok(())
    }

    /// Δt / δt, guaranteed integral for a valid spec.
    pub fn dwell_ratio(&self) -> usize {
        (self.raster_dt / self.dwell_dt).round() as usize
    }

    /// k_max = N / (2 fov), in 1/m.
    pub fn k_max(&self) -> f64 {
        self.matrix_size as f64 / (2.0 * self.fov)
    }
}

/// Normalized per-raster-step speed and acceleration bounds
/// `α = γ g_max Δt / (2 k_max)` and `β = γ s_max Δt² / (2 k_max)`.
pub fn normalized_bounds(spec: &HardwareSpec) -> Result<(f64, f64)> {
    spec.validate()?;
    let two_kmax = 2.0 * spec.k_max();
    let alpha = spec.gamma * spec.g_max * spec.raster_dt / two_kmax;
    let beta = spec.gamma * spec.s_max * spec.raster_dt * spec.raster_dt / two_kmax;
    Ok((alpha, beta))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scanner_spec() -> HardwareSpec {
        HardwareSpec {
            gamma: 42.576e6,
            g_max: 0.04,
            s_max: 180.0,
            raster_dt: 1e-5,
            dwell_dt: 2e-6,
            fov: 0.23,
            matrix_size: 320,
        }
    }

    #[test]
    fn bounds_match_closed_form() {
        // Frozen from independent evaluation of the closed forms:
        //   k_max = 320 / (2 * 0.23)                    = 695.652173913...
        //   alpha = 42.576e6 * 0.04 * 1e-5  * 0.23/320  = 1.22406e-2 exactly
        //   beta  = 42.576e6 * 180  * 1e-10 * 0.23/320  = 5.50827e-4 exactly
        let spec = scanner_spec();
        assert!((spec.k_max() - 695.6521739130435).abs() < 1e-9);
        let (alpha, beta) = normalized_bounds(&spec).unwrap();
        assert!((alpha - 1.22406e-2).abs() < 1e-15, "alpha = {alpha}");
        assert!((beta - 5.50827e-4).abs() < 1e-16, "beta = {beta}");
    }

    #[test]
    fn doubling_fov_halves_kmax_doubles_bounds() {
        let spec = scanner_spec();
        let mut wide = spec;
        wide.fov *= 2.0;
        assert!((wide.k_max() - spec.k_max() / 2.0).abs() < 1e-12);
        let (a0, b0) = normalized_bounds(&spec).unwrap();
        let (a1, b1) = normalized_bounds(&wide).unwrap();
        assert!((a1 - 2.0 * a0).abs() < 1e-15);
        assert!((b1 - 2.0 * b0).abs() < 1e-15);
    }

    #[test]
    fn zero_gmax_rejected_small_gmax_gives_small_alpha() {
        let mut spec = scanner_spec();
        spec.g_max = 0.0;
        assert!(normalized_bounds(&spec).is_err());
        spec.g_max = 1e-300;
        let (alpha, _) = normalized_bounds(&spec).unwrap();
        assert!(alpha < 1e-290);
    }

    #[test]
    fn non_integral_dwell_ratio_rejected() {
        let mut spec = scanner_spec();
        spec.dwell_dt = 3e-6;
        assert!(spec.validate().is_err());
        spec.dwell_dt = 2e-5; // ratio < 1
        assert!(spec.validate().is_err());
    }
}
