//! Trajectory container, finite-difference kinematic profiles, and the
//! CSV / binary trajectory file formats.

use std::io::{BufRead, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array3, Axis};

use crate::error::{Error, Result};
use crate::hardware::HardwareSpec;

/// A multi-shot 2D k-space trajectory in normalized coordinates.
///
/// `points` is Nc x Ns x 2; `decimation` counts raster steps between
/// consecutive stored points (1 = full raster resolution).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub points: Array3<f64>,
    pub decimation: usize,
}

impl Trajectory {
    pub fn new(points: Array3<f64>, decimation: usize) -> Result<Self> {
        if points.shape()[2] != 2 {
            return Err(Error::InvalidTrajectory("last axis must have size 2".into()));
        }
        if decimation == 0 {
            return Err(Error::InvalidTrajectory("decimation must be >= 1".into()));
        }
        Ok(Trajectory { points, decimation })
    }

    pub fn zeros(n_shots: usize, n_samples: usize) -> Self {
        Trajectory {
            points: Array3::zeros((n_shots, n_samples, 2)),
            decimation: 1,
        }
    }

    pub fn n_shots(&self) -> usize {
        self.points.shape()[0]
    }

    pub fn n_samples(&self) -> usize {
        self.points.shape()[1]
    }

    /// All coordinates inside the normalized Nyquist box [-0.5, 0.5]^2?
    pub fn in_nyquist_box(&self, tol: f64) -> bool {
        self.points.iter().all(|&v| v.abs() <= 0.5 + tol)
    }

    /// Clamp every coordinate to the Nyquist box.
    pub fn clip_to_box(&mut self) {
        self.points.mapv_inplace(|v| v.clamp(-0.5, 0.5));
    }

    /// Flatten to a sample-major location list (shot-major order).
    pub fn flat_locations(&self) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(self.n_shots() * self.n_samples());
        for shot in self.points.axis_iter(Axis(0)) {
            for p in shot.axis_iter(Axis(0)) {
                out.push([p[0], p[1]]);
            }
        }
        out
    }
}

/// Physical gradient and slew-rate waveforms obtained by finite
/// differences of a raster-resolution trajectory.
#[derive(Debug, Clone)]
pub struct GradientProfile {
    /// Nc x (Ns-1) x 2, T/m.
    pub gradients: Array3<f64>,
    /// Nc x (Ns-2) x 2, T/m/s.
    pub slew: Array3<f64>,
    /// Per-interval Euclidean norms, Nc x (Ns-1).
    pub gradient_norms: ndarray::Array2<f64>,
    /// Per-interval Euclidean norms, Nc x (Ns-2).
    pub slew_norms: ndarray::Array2<f64>,
}

/// Finite-difference gradient/slew profiles:
/// `G[c][i] = 2 k_max (k[i+1] - k[i]) / (γ Δt)`, slew is the forward
/// difference of `G` divided by Δt.
pub fn traj_to_profile(traj: &Trajectory, spec: &HardwareSpec) -> Result<GradientProfile> {
    spec.validate()?;
    if traj.decimation != 1 {
        return Err(Error::InvalidTrajectory(
            "profiles require a full-raster trajectory (decimation = 1)".into(),
        ));
    }
    let (nc, ns) = (traj.n_shots(), traj.n_samples());
    if ns < 3 {
        return Err(Error::InvalidTrajectory("need Ns >= 3 for kinematics".into()));
    }
    let scale = 2.0 * spec.k_max() / (spec.gamma * spec.raster_dt);
    let mut gradients = Array3::zeros((nc, ns - 1, 2));
    let mut slew = Array3::zeros((nc, ns - 2, 2));
    for c in 0..nc {
        for i in 0..ns - 1 {
            for a in 0..2 {
                gradients[[c, i, a]] =
                    scale * (traj.points[[c, i + 1, a]] - traj.points[[c, i, a]]);
            }
        }
        for i in 0..ns - 2 {
            for a in 0..2 {
                slew[[c, i, a]] =
                    (gradients[[c, i + 1, a]] - gradients[[c, i, a]]) / spec.raster_dt;
            }
        }
    }
    let gradient_norms = norms2(&gradients);
    let slew_norms = norms2(&slew);
    Ok(GradientProfile {
        gradients,
        slew,
        gradient_norms,
        slew_norms,
    })
}

fn norms2(v: &Array3<f64>) -> ndarray::Array2<f64> {
    let (a, b) = (v.shape()[0], v.shape()[1]);
    ndarray::Array2::from_shape_fn((a, b), |(i, j)| v[[i, j, 0]].hypot(v[[i, j, 1]]))
}

/// UF = N² / (n_shots · n_samples · dwell_ratio).
pub fn undersampling_factor(
    n: usize,
    n_shots: usize,
    n_samples: usize,
    dwell_ratio: usize,
) -> Result<f64> {
    if n == 0 || n_shots == 0 || n_samples == 0 || dwell_ratio == 0 {
        return Err(Error::InvalidArgument("undersampling_factor: all inputs must be positive".into()));
    }
    Ok((n * n) as f64 / (n_shots * n_samples * dwell_ratio) as f64)
}

/// Center-to-edge radial spokes with uniform angular spacing over [0, π),
/// shot j running from the origin to `0.5 (cos θ_j, sin θ_j)`.
///
/// The result is not yet projected to hardware feasibility; callers that
/// need a feasible start project it afterwards.
pub fn radial_init(n_shots: usize, n_samples: usize) -> Result<Trajectory> {
    if n_shots == 0 || n_samples < 2 {
        return Err(Error::InvalidArgument("radial_init: need n_shots >= 1, n_samples >= 2".into()));
    }
    let mut points = Array3::zeros((n_shots, n_samples, 2));
    for j in 0..n_shots {
        let theta = std::f64::consts::PI * j as f64 / n_shots as f64;
        let (dir_y, dir_x) = theta.sin_cos();
        for i in 0..n_samples {
            let r = 0.5 * i as f64 / (n_samples - 1) as f64;
            points[[j, i, 0]] = r * dir_x;
            points[[j, i, 1]] = r * dir_y;
        }
    }
    Trajectory::new(points, 1)
}

// ---------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------

/// Write `shot,index,kx,ky` CSV with 17 significant digits.
pub fn write_csv<W: Write>(traj: &Trajectory, mut w: W) -> Result<()> {
    writeln!(w, "shot,index,kx,ky")?;
    for c in 0..traj.n_shots() {
        for i in 0..traj.n_samples() {
            writeln!(
                w,
                "{},{},{:.17e},{:.17e}",
                c,
                i,
                traj.points[[c, i, 0]],
                traj.points[[c, i, 1]]
            )?;
        }
    }
    Ok(())
}

pub fn save_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_csv(traj, BufWriter::new(f))
}

pub fn read_csv<R: BufRead>(r: R) -> Result<Trajectory> {
    let mut rows: Vec<(usize, usize, f64, f64)> = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if lineno == 0 {
            if line != "shot,index,kx,ky" {
                return Err(Error::Format(format!("bad CSV header: {line}")));
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Format(format!("expected 4 fields at line {}", lineno + 1)));
        }
        let shot: usize = fields[0].parse().map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1)))?;
        let index: usize = fields[1].parse().map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1)))?;
        let kx: f64 = fields[2].parse().map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1)))?;
        let ky: f64 = fields[3].parse().map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1)))?;
        rows.push((shot, index, kx, ky));
    }
    if rows.is_empty() {
        return Err(Error::Format("empty trajectory file".into()));
    }
    let nc = rows.iter().map(|r| r.0).max().unwrap() + 1;
    let ns = rows.iter().map(|r| r.1).max().unwrap() + 1;
    if rows.len() != nc * ns {
        return Err(Error::Format(format!(
            "expected {} rows for {nc} shots x {ns} samples, found {}",
            nc * ns,
            rows.len()
        )));
    }
    let mut points = Array3::zeros((nc, ns, 2));
    for (shot, index, kx, ky) in rows {
        points[[shot, index, 0]] = kx;
        points[[shot, index, 1]] = ky;
    }
    Trajectory::new(points, 1)
}

pub fn load_csv(path: &Path) -> Result<Trajectory> {
    let f = std::fs::File::open(path)?;
    read_csv(std::io::BufReader::new(f))
}

/// Binary format: little-endian u32 Nc, u32 Ns, u32 dims header followed
/// by float64 coordinates in shot-major order.
pub fn write_binary<W: Write>(traj: &Trajectory, mut w: W) -> Result<()> {
    w.write_all(&(traj.n_shots() as u32).to_le_bytes())?;
    w.write_all(&(traj.n_samples() as u32).to_le_bytes())?;
    w.write_all(&2u32.to_le_bytes())?;
    for c in 0..traj.n_shots() {
        for i in 0..traj.n_samples() {
            for a in 0..2 {
                w.write_all(&traj.points[[c, i, a]].to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut r: R) -> Result<Trajectory> {
    let mut head = [0u8; 12];
    r.read_exact(&mut head).map_err(|_| Error::Format("truncated binary header".into()))?;
    let nc = u32::from_le_bytes(head[0..4].try_into().unwrap()) as usize;
    let ns = u32::from_le_bytes(head[4..8].try_into().unwrap()) as usize;
    let dims = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
    if dims != 2 {
        return Err(Error::Format(format!("unsupported dims {dims}")));
    }
    if nc == 0 || ns == 0 {
        return Err(Error::Format("empty trajectory".into()));
    }
    let mut points = Array3::zeros((nc, ns, 2));
    let mut buf = [0u8; 8];
    for c in 0..nc {
        for i in 0..ns {
            for a in 0..2 {
                r.read_exact(&mut buf).map_err(|_| Error::Format("truncated binary payload".into()))?;
                points[[c, i, a]] = f64::from_le_bytes(buf);
            }
        }
    }
    Trajectory::new(points, 1)
}
