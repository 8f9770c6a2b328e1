//! Linear ADC interpolation operator mapping control points to dwell-time
//! sample locations, its exact transpose, and dyadic resolution changes
//! for the multi-resolution schedule.

use ndarray::Array3;

use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

/// Piecewise-linear upsampling: inserts `factor - 1` equally spaced points
/// in each interval of every shot. Output length is `(Ns - 1) * factor + 1`
/// and endpoints are preserved exactly. Does not touch `decimation`
/// bookkeeping; see [`change_resolution`] for that.
pub fn upsample_linear(control: &Trajectory, factor: usize) -> Result<Trajectory> {
    if factor == 0 {
        return Err(Error::InvalidArgument("upsample factor must be >= 1".into()));
    }
    if factor == 1 {
        return Ok(control.clone());
    }
    let (nc, ns) = (control.n_shots(), control.n_samples());
    let ns_out = (ns - 1) * factor + 1;
    let mut points = Array3::zeros((nc, ns_out, 2));
    for c in 0..nc {
        for i in 0..ns - 1 {
            for s in 0..factor {
                let lambda = s as f64 / factor as f64;
                for a in 0..2 {
                    points[[c, i * factor + s, a]] = (1.0 - lambda) * control.points[[c, i, a]]
                        + lambda * control.points[[c, i + 1, a]];
                }
            }
        }
        for a in 0..2 {
            points[[c, ns_out - 1, a]] = control.points[[c, ns - 1, a]];
        }
    }
    Trajectory::new(points, control.decimation)
}

/// Exact transpose of the [`upsample_linear`] matrix, applied to a
/// gradient living on the upsampled grid (Nc x Ns' x 2). Returns the
/// control-point gradient (Nc x Ns x 2).
pub fn upsample_adjoint(grad_full: &Array3<f64>, factor: usize) -> Result<Array3<f64>> {
    if factor == 0 {
        return Err(Error::InvalidArgument("upsample factor must be >= 1".into()));
    }
    if factor == 1 {
        return Ok(grad_full.clone());
    }
    let (nc, ns_full) = (grad_full.shape()[0], grad_full.shape()[1]);
    if ns_full < 2 || (ns_full - 1) % factor != 0 {
        return Err(Error::ShapeMismatch(format!(
            "upsampled length {ns_full} is not (Ns-1)*{factor}+1 for any Ns"
        )));
    }
    let ns = (ns_full - 1) / factor + 1;
    let mut out = Array3::zeros((nc, ns, 2));
    for c in 0..nc {
        for i in 0..ns - 1 {
            for s in 0..factor {
                let lambda = s as f64 / factor as f64;
                for a in 0..2 {
                    let g = grad_full[[c, i * factor + s, a]];
                    out[[c, i, a]] += (1.0 - lambda) * g;
                    out[[c, i + 1, a]] += lambda * g;
                }
            }
        }
        for a in 0..2 {
            out[[c, ns - 1, a]] += grad_full[[c, ns_full - 1, a]];
        }
    }
    Ok(out)
}

/// Move a control trajectory to a new decimation level. Decreasing the
/// decimation upsamples linearly; increasing it keeps every (ratio)-th
/// point, so an up-then-down round trip is exact.
pub fn change_resolution(control: &Trajectory, new_decimation: usize) -> Result<Trajectory> {
    if new_decimation == 0 {
        return Err(Error::InvalidArgument("decimation must be >= 1".into()));
    }
    let old = control.decimation;
    if new_decimation == old {
        return Ok(control.clone());
    }
    let (nc, ns) = (control.n_shots(), control.n_samples());
    if new_decimation < old {
        if old % new_decimation != 0 {
            return Err(Error::InvalidArgument(format!(
                "decimation {old} -> {new_decimation}: ratio must be integral"
            )));
        }
        let factor = old / new_decimation;
        let mut t = upsample_linear(control, factor)?;
        t.decimation = new_decimation;
        Ok(t)
    } else {
        if new_decimation % old != 0 {
            return Err(Error::InvalidArgument(format!(
                "decimation {old} -> {new_decimation}: ratio must be integral"
            )));
        }
        let ratio = new_decimation / old;
        if (ns - 1) % ratio != 0 {
            return Err(Error::InvalidArgument(format!(
                "cannot coarsen {ns} samples by {ratio}: Ns-1 not divisible"
            )));
        }
        let ns_out = (ns - 1) / ratio + 1;
        let mut points = Array3::zeros((nc, ns_out, 2));
        for c in 0..nc {
            for i in 0..ns_out {
                for a in 0..2 {
                    points[[c, i, a]] = control.points[[c, i * ratio, a]];
                }
            }
        }
        let mut t = Trajectory::new(points, new_decimation)?;
        t.decimation = new_decimation;
        Ok(t)
    }
}
