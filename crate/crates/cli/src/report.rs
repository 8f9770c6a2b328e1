//! Benchmark report types and summary statistics.

use kspace_opt::constraints::FeasibilityReport;
use kspace_opt::{Error, Result};
use serde::Serialize;

/// Five-number summary plus mean, linear-interpolation quantiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

impl Summary {
    pub fn from_values(values: &[f64]) -> Result<Summary> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "summary requires nonempty finite values".into(),
            ));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let quantile = |q: f64| -> f64 {
            let pos = q * (sorted.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            let frac = pos - lo as f64;
            sorted[lo] * (1.0 - frac) + sorted[hi] * frac
        };
        Ok(Summary {
            min: sorted[0],
            q1: quantile(0.25),
            median: quantile(0.5),
            q3: quantile(0.75),
            max: sorted[sorted.len() - 1],
            mean: values.iter().sum::<f64>() / values.len() as f64,
        })
    }
}

/// Serializable mirror of the core feasibility report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeasibilityStats {
    pub max_speed_violation: f64,
    pub max_slew_violation: f64,
    pub speed_active_fraction: f64,
    pub slew_active_fraction: f64,
}

impl From<FeasibilityReport> for FeasibilityStats {
    fn from(r: FeasibilityReport) -> Self {
        FeasibilityStats {
            max_speed_violation: r.max_speed_violation,
            max_slew_violation: r.max_accel_violation,
            speed_active_fraction: r.speed_active_fraction,
            slew_active_fraction: r.slew_active_fraction,
        }
    }
}

/// Per-trajectory evaluation report: raw per-image scores, their
/// summaries, constraint statistics, and run metadata.
#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub label: String,
    pub recon: String,
    pub psnr_db: Vec<f64>,
    pub ssim: Vec<f64>,
    pub psnr_summary: Summary,
    pub ssim_summary: Summary,
    pub feasibility: FeasibilityStats,
    pub undersampling_factor: f64,
    pub config_hash: String,
    pub seed: u64,
}

/// Paired projection-vs-penalty comparison.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub projection: BenchReport,
    pub penalty: BenchReport,
    pub slew_active_fraction_projection: f64,
    pub slew_active_fraction_penalty: f64,
    pub max_violation_projection: f64,
    pub max_violation_penalty: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_known_values() {
        let s = Summary::from_values(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(s.min, 1.0);
        assert_eq!(s.max, 4.0);
        assert_eq!(s.median, 2.5);
        assert_eq!(s.q1, 1.75);
        assert_eq!(s.q3, 3.25);
        assert_eq!(s.mean, 2.5);
    }

    #[test]
    fn summary_single_value() {
        let s = Summary::from_values(&[7.0]).unwrap();
        assert_eq!(
            (s.min, s.q1, s.median, s.q3, s.max, s.mean),
            (7.0, 7.0, 7.0, 7.0, 7.0, 7.0)
        );
    }

    #[test]
    fn summary_order_invariants_on_random_data() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let values: Vec<f64> = (0..rng.gen_range(1..40))
                .map(|_| rng.gen_range(-100.0..100.0))
                .collect();
            let s = Summary::from_values(&values).unwrap();
            assert!(s.min <= s.q1 && s.q1 <= s.median && s.median <= s.q3 && s.q3 <= s.max);
            assert!(s.mean >= s.min && s.mean <= s.max);
        }
    }

    #[test]
    fn summary_rejects_bad_input() {
        assert!(Summary::from_values(&[]).is_err());
        assert!(Summary::from_values(&[1.0, f64::NAN]).is_err());
    }
}
