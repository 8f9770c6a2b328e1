//! Feasibility checking and exact Euclidean projection onto the per-shot
//! speed / acceleration constraint set
//!
//! ```text
//! Q = { k : ||k[i+1] - k[i]||      <= alpha  for all i,
//!           ||k[i+2] - 2k[i+1] + k[i]|| <= beta for all i }   (per shot)
//! ```
//!
//! The projection solves, shot by shot, the dual of the constrained
//! least-squares problem with FISTA; the nonsmooth dual term is a group
//! norm whose prox is block soft-thresholding. The dual step size comes
//! from a power-iteration estimate of the stacked difference operator's
//! norm. At a decimation level `d` the bounds scale to `alpha*d` and
//! `beta*d^2`.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::hardware::{normalized_bounds, HardwareSpec};
use crate::trajectory::Trajectory;

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 5000;

/// Constraint violation and activity statistics for one trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityReport {
    /// max over intervals of (||first diff|| - alpha)+, normalized units.
    pub max_speed_violation: f64,
    /// max over intervals of (||second diff|| - beta)+, normalized units.
    pub max_accel_violation: f64,
    /// fraction of first-difference intervals with norm >= (1-tol)*alpha.
    pub speed_active_fraction: f64,
    /// fraction of second-difference intervals with norm >= (1-tol)*beta.
    pub slew_active_fraction: f64,
}

/// Violation and activity statistics against explicit normalized bounds.
pub fn check_feasibility_bounds(
    traj: &Trajectory,
    alpha: f64,
    beta: f64,
    activity_tol: f64,
) -> Result<FeasibilityReport> {
    if traj.n_samples() < 3 {
        return Err(Error::InvalidTrajectory("need Ns >= 3 for kinematics".into()));
    }
    if !(activity_tol > 0.0 && activity_tol < 1.0) {
        return Err(Error::InvalidArgument("activity_tol must be in (0,1)".into()));
    }
    let (nc, ns) = (traj.n_shots(), traj.n_samples());
    let p = &traj.points;
    let mut max_speed = 0.0f64;
    let mut max_accel = 0.0f64;
    let mut speed_active = 0usize;
    let mut slew_active = 0usize;
    for c in 0..nc {
        for i in 0..ns - 1 {
            let dx = p[[c, i + 1, 0]] - p[[c, i, 0]];
            let dy = p[[c, i + 1, 1]] - p[[c, i, 1]];
            let n = (dx * dx + dy * dy).sqrt();
            max_speed = max_speed.max(n - alpha);
            if n >= (1.0 - activity_tol) * alpha {
                speed_active += 1;
            }
        }
        for i in 0..ns - 2 {
            let dx = p[[c, i + 2, 0]] - 2.0 * p[[c, i + 1, 0]] + p[[c, i, 0]];
            let dy = p[[c, i + 2, 1]] - 2.0 * p[[c, i + 1, 1]] + p[[c, i, 1]];
            let n = (dx * dx + dy * dy).sqrt();
            max_accel = max_accel.max(n - beta);
            if n >= (1.0 - activity_tol) * beta {
                slew_active += 1;
            }
        }
    }
    Ok(FeasibilityReport {
        max_speed_violation: max_speed.max(0.0),
        max_accel_violation: max_accel.max(0.0),
        speed_active_fraction: speed_active as f64 / (nc * (ns - 1)) as f64,
        slew_active_fraction: slew_active as f64 / (nc * (ns - 2)) as f64,
    })
}

/// Violation and activity statistics of a full-raster trajectory against
/// the hardware-derived normalized bounds.
pub fn check_feasibility(
    traj: &Trajectory,
    spec: &HardwareSpec,
    activity_tol: f64,
) -> Result<FeasibilityReport> {
    if traj.decimation != 1 {
        return Err(Error::InvalidTrajectory(
            "feasibility is defined at full raster resolution (decimation = 1)".into(),
        ));
    }
    let (alpha, beta) = normalized_bounds(spec)?;
    check_feasibility_bounds(traj, alpha, beta, activity_tol)
}

/// Result of a projection call.
#[derive(Debug, Clone)]
pub struct Projected {
    pub trajectory: Trajectory,
    /// Worst kinematic violation of the returned point, normalized units.
    pub residual: f64,
    /// Dual iterations spent on the slowest shot.
    pub iterations: usize,
    pub converged: bool,
}

/// Euclidean projection onto Q (per shot), then a final clip to the
/// Nyquist box. Bounds scale with the trajectory's decimation level.
/// Non-convergence is reported through `converged` / `residual`; the
/// caller decides whether the attained residual is acceptable.
pub fn project(
    traj: &Trajectory,
    spec: &HardwareSpec,
    tol: f64,
    max_iter: usize,
) -> Result<Projected> {
    let (alpha, beta) = normalized_bounds(spec)?;
    let d = traj.decimation as f64;
    let mut out = project_with_bounds(traj, alpha * d, beta * d * d, tol, max_iter)?;
    out.trajectory.clip_to_box();
    Ok(out)
}

/// Projection onto Q with explicit normalized bounds (no box clip).
/// Infinite bounds disable the corresponding constraint family.
pub fn project_with_bounds(
    traj: &Trajectory,
    alpha: f64,
    beta: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Projected> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("projection tol must be > 0".into()));
    }
    if traj.n_samples() < 2 {
        return Err(Error::InvalidTrajectory("projection needs Ns >= 2".into()));
    }
    let mut points = traj.points.clone();
    let mut worst_res = 0.0f64;
    let mut worst_iter = 0usize;
    let mut converged = true;
    for c in 0..traj.n_shots() {
        let shot = points.index_axis(ndarray::Axis(0), c).to_owned();
        let (proj, res, iters, ok) = project_shot(&shot, alpha, beta, tol, max_iter);
        worst_res = worst_res.max(res);
        worst_iter = worst_iter.max(iters);
        converged &= ok;
        points.index_axis_mut(ndarray::Axis(0), c).assign(&proj);
    }
    Ok(Projected {
        trajectory: Trajectory {
            points,
            decimation: traj.decimation,
        },
        residual: worst_res,
        iterations: worst_iter,
        converged,
    })
}

/// First differences as (ns-1) blocks of 2, second differences as (ns-2)
/// blocks of 2, stacked. `u` lives in the dual of that stack.
struct DiffOp {
    ns: usize,
    use_speed: bool,
    use_accel: bool,
}

impl DiffOp {
    fn n1(&self) -> usize {
        if self.use_speed {
            self.ns - 1
        } else {
            0
        }
    }
    fn n2(&self) -> usize {
        if self.use_accel && self.ns >= 3 {
            self.ns - 2
        } else {
            0
        }
    }

    /// D z: stacked first/second differences of z (ns x 2).
    fn apply(&self, z: &Array2<f64>, out: &mut Array2<f64>) {
        let n1 = self.n1();
        for i in 0..n1 {
            for a in 0..2 {
                out[[i, a]] = z[[i + 1, a]] - z[[i, a]];
            }
        }
        for i in 0..self.n2() {
            for a in 0..2 {
                out[[n1 + i, a]] = z[[i, a]] - 2.0 * z[[i + 1, a]] + z[[i + 2, a]];
            }
        }
    }

    /// D^T u.
    fn apply_t(&self, u: &Array2<f64>, out: &mut Array2<f64>) {
        out.fill(0.0);
        let n1 = self.n1();
        for i in 0..n1 {
            for a in 0..2 {
                let v = u[[i, a]];
                out[[i, a]] -= v;
                out[[i + 1, a]] += v;
            }
        }
        for i in 0..self.n2() {
            for a in 0..2 {
                let v = u[[n1 + i, a]];
                out[[i, a]] += v;
                out[[i + 1, a]] -= 2.0 * v;
                out[[i + 2, a]] += v;
            }
        }
    }

    fn n_blocks(&self) -> usize {
        self.n1() + self.n2()
    }

    fn radius(&self, block: usize, alpha: f64, beta: f64) -> f64 {
        if block < self.n1() {
            alpha
        } else {
            beta
        }
    }

    /// ||D||^2 by power iteration (50 rounds, deterministic start), with a
    /// small safety margin.
    fn op_norm_sq(&self) -> f64 {
        let nb = self.n_blocks();
        if nb == 0 {
            return 1.0;
        }
        let mut u = Array2::from_shape_fn((nb, 2), |(i, a)| 1.0 + 0.1 * ((i + a) % 3) as f64);
        let mut z = Array2::zeros((self.ns, 2));
        let mut du = Array2::zeros((nb, 2));
        let mut lambda = 4.0;
        for _ in 0..50 {
            self.apply_t(&u, &mut z);
            self.apply(&z, &mut du);
            let norm = du.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-300 {
                return 4.0;
            }
            lambda = norm / u.iter().map(|v| v * v).sum::<f64>().sqrt();
            u.assign(&du);
            u.mapv_inplace(|v| v / norm);
        }
        lambda * 1.02
    }
}

fn violation(op: &DiffOp, z: &Array2<f64>, dz: &mut Array2<f64>, alpha: f64, beta: f64) -> f64 {
    op.apply(z, dz);
    let mut worst = 0.0f64;
    for b in 0..op.n_blocks() {
        let n = dz[[b, 0]].hypot(dz[[b, 1]]);
        worst = worst.max(n - op.radius(b, alpha, beta));
    }
    worst.max(0.0)
}

/// Accelerated dual ascent (FISTA on the dual, gradient restart) for one
/// shot. Returns (projected shot, attained violation, iterations, converged).
fn project_shot(
    k: &Array2<f64>,
    alpha: f64,
    beta: f64,
    tol: f64,
    max_iter: usize,
) -> (Array2<f64>, f64, usize, bool) {
    let ns = k.shape()[0];
    let op = DiffOp {
        ns,
        use_speed: alpha.is_finite(),
        use_accel: beta.is_finite(),
    };
    let nb = op.n_blocks();
    let mut dz = Array2::zeros((nb.max(1), 2));

    // Already feasible (covers nb == 0 too): the projection is the identity.
    let res0 = if nb == 0 {
        0.0
    } else {
        violation(&op, k, &mut dz, alpha, beta)
    };
    if res0 <= tol {
        return (k.clone(), res0, 0, true);
    }

    let lip = op.op_norm_sq();
    let step = 1.0 / lip;

    let mut u = Array2::<f64>::zeros((nb, 2));
    let mut u_prev = u.clone();
    let mut y = u.clone();
    let mut theta = 1.0f64;
    let mut z = Array2::zeros((ns, 2));
    let mut grad = Array2::zeros((nb, 2));

    let mut best_z = k.clone();
    let mut best_res = res0;
    let mut iters = 0;

    for it in 1..=max_iter {
        iters = it;
        // grad f(y) = D (D^T y - k); z holds D^T y - k reused below.
        op.apply_t(&y, &mut z);
        z -= k;
        op.apply(&z, &mut grad);

        u_prev.assign(&u);
        // prox step; the gradient mapping lip * (y - u) certifies dual
        // optimality (primal feasibility alone can hold at strictly
        // feasible, non-optimal overshoots)
        let mut grad_map = 0.0f64;
        for b in 0..nb {
            let mut vx = y[[b, 0]] - step * grad[[b, 0]];
            let mut vy = y[[b, 1]] - step * grad[[b, 1]];
            let r = op.radius(b, alpha, beta);
            let n = vx.hypot(vy);
            let shrink = if n > 0.0 { (1.0 - step * r / n).max(0.0) } else { 0.0 };
            vx *= shrink;
            vy *= shrink;
            grad_map = grad_map
                .max(lip * (y[[b, 0]] - vx).abs())
                .max(lip * (y[[b, 1]] - vy).abs());
            u[[b, 0]] = vx;
            u[[b, 1]] = vy;
        }

        // gradient-based adaptive restart
        let mut dot = 0.0;
        for b in 0..nb {
            for a in 0..2 {
                dot += (y[[b, a]] - u[[b, a]]) * (u[[b, a]] - u_prev[[b, a]]);
            }
        }
        if dot > 0.0 {
            theta = 1.0;
            y.assign(&u);
        } else {
            let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
            let momentum = (theta - 1.0) / theta_next;
            for b in 0..nb {
                for a in 0..2 {
                    y[[b, a]] = u[[b, a]] + momentum * (u[[b, a]] - u_prev[[b, a]]);
                }
            }
            theta = theta_next;
        }

        // primal iterate and its feasibility
        op.apply_t(&u, &mut z);
        let mut cur = k.clone();
        cur -= &z;
        let res = violation(&op, &cur, &mut dz, alpha, beta);
        let crit = res.max(grad_map);
        if crit < best_res {
            best_res = crit;
            best_z.assign(&cur);
        }
        if crit <= tol {
            return (cur, res, it, true);
        }
    }
    (best_z, best_res, iters, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_traj(nc: usize, ns: usize, seed: u64, scale: f64) -> Trajectory {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Trajectory::new(
            Array3::from_shape_fn((nc, ns, 2), |_| rng.gen_range(-scale..scale)),
            1,
        )
        .unwrap()
    }

    #[test]
    fn constant_trajectory_is_feasible_and_inactive() {
        let mut t = Trajectory::zeros(2, 5);
        t.points.fill(0.1);
        let r = check_feasibility_bounds(&t, 0.01, 0.001, 0.05).unwrap();
        assert_eq!(r.max_speed_violation, 0.0);
        assert_eq!(r.max_accel_violation, 0.0);
        assert_eq!(r.speed_active_fraction, 0.0);
        assert_eq!(r.slew_active_fraction, 0.0);
    }

    #[test]
    fn one_dimensional_violation_arithmetic() {
        let alpha = 0.01;
        // steps of 0.6*alpha: feasible
        let mut t = Trajectory::zeros(1, 3);
        t.points[[0, 1, 0]] = 0.6 * alpha;
        t.points[[0, 2, 0]] = 1.2 * alpha;
        let r = check_feasibility_bounds(&t, alpha, f64::INFINITY, 0.05).unwrap();
        assert!(r.max_speed_violation.abs() < 1e-18);
        // steps of 1.5*alpha: violation 0.5*alpha
        let mut t = Trajectory::zeros(1, 3);
        t.points[[0, 1, 0]] = 1.5 * alpha;
        t.points[[0, 2, 0]] = 3.0 * alpha;
        let r = check_feasibility_bounds(&t, alpha, f64::INFINITY, 0.05).unwrap();
        assert!((r.max_speed_violation - 0.5 * alpha).abs() < 1e-15);
    }

    #[test]
    fn report_matches_loop_oracle() {
        let t = random_traj(3, 9, 21, 0.4);
        let (alpha, beta, tol) = (0.3, 0.2, 0.1);
        let r = check_feasibility_bounds(&t, alpha, beta, tol).unwrap();
        // independent brute-force recomputation
        let mut max_s = 0.0f64;
        let mut max_a = 0.0f64;
        let (mut act_s, mut act_a, mut n_s, mut n_a) = (0, 0, 0, 0);
        for c in 0..3 {
            for i in 0..8 {
                let d = [
                    t.points[[c, i + 1, 0]] - t.points[[c, i, 0]],
                    t.points[[c, i + 1, 1]] - t.points[[c, i, 1]],
                ];
                let n = (d[0] * d[0] + d[1] * d[1]).sqrt();
                max_s = max_s.max(n - alpha);
                n_s += 1;
                if n >= (1.0 - tol) * alpha {
                    act_s += 1;
                }
            }
            for i in 0..7 {
                let d = [
                    t.points[[c, i + 2, 0]] - 2.0 * t.points[[c, i + 1, 0]] + t.points[[c, i, 0]],
                    t.points[[c, i + 2, 1]] - 2.0 * t.points[[c, i + 1, 1]] + t.points[[c, i, 1]],
                ];
                let n = (d[0] * d[0] + d[1] * d[1]).sqrt();
                max_a = max_a.max(n - beta);
                n_a += 1;
                if n >= (1.0 - tol) * beta {
                    act_a += 1;
                }
            }
        }
        assert_eq!(r.max_speed_violation, max_s.max(0.0));
        assert_eq!(r.max_accel_violation, max_a.max(0.0));
        assert_eq!(r.speed_active_fraction, act_s as f64 / n_s as f64);
        assert_eq!(r.slew_active_fraction, act_a as f64 / n_a as f64);
    }

    #[test]
    fn feasible_input_unchanged() {
        let mut t = Trajectory::zeros(1, 4);
        for i in 0..4 {
            t.points[[0, i, 0]] = 0.001 * i as f64;
        }
        let p = project_with_bounds(&t, 0.01, 0.01, 1e-9, 5000).unwrap();
        assert!(p.converged);
        assert_eq!(p.iterations, 0);
        assert_eq!(p.trajectory.points, t.points);
    }

    #[test]
    fn kkt_closed_form_two_point_shot() {
        // min (z1-0)^2 + (z2-1)^2 s.t. |z2-z1| <= 0.5  ->  [0.25, 0.75]
        let mut t = Trajectory::zeros(1, 2);
        t.points[[0, 1, 0]] = 1.0;
        let p = project_with_bounds(&t, 0.5, f64::INFINITY, 1e-12, 20000).unwrap();
        assert!(p.converged, "residual {}", p.residual);
        assert!((p.trajectory.points[[0, 0, 0]] - 0.25).abs() < 1e-9);
        assert!((p.trajectory.points[[0, 1, 0]] - 0.75).abs() < 1e-9);
        assert!(p.trajectory.points[[0, 0, 1]].abs() < 1e-12);
    }

    #[test]
    fn shot_separability() {
        let t = random_traj(2, 5, 33, 0.3);
        let joint = project_with_bounds(&t, 0.05, 0.02, 1e-10, 20000).unwrap();
        for c in 0..2 {
            let one = Trajectory::new(
                t.points
                    .index_axis(ndarray::Axis(0), c)
                    .to_owned()
                    .insert_axis(ndarray::Axis(0)),
                1,
            )
            .unwrap();
            let solo = project_with_bounds(&one, 0.05, 0.02, 1e-10, 20000).unwrap();
            for i in 0..5 {
                for a in 0..2 {
                    assert!(
                        (joint.trajectory.points[[c, i, a]] - solo.trajectory.points[[0, i, a]])
                            .abs()
                            < 1e-7
                    );
                }
            }
        }
    }

    #[test]
    fn idempotence_and_nonexpansiveness() {
        let tol = 1e-10;
        let t1 = random_traj(1, 6, 5, 0.4);
        let t2 = random_traj(1, 6, 6, 0.4);
        let p1 = project_with_bounds(&t1, 0.05, 0.03, tol, 50000).unwrap();
        let p2 = project_with_bounds(&t2, 0.05, 0.03, tol, 50000).unwrap();
        assert!(p1.converged && p2.converged);
        let p1p = project_with_bounds(&p1.trajectory, 0.05, 0.03, tol, 50000).unwrap();
        let dd: f64 = p1
            .trajectory
            .points
            .iter()
            .zip(p1p.trajectory.points.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(dd <= 10.0 * tol.max(1e-8), "idempotence defect {dd}");
        let dist_in: f64 = t1
            .points
            .iter()
            .zip(t2.points.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let dist_out: f64 = p1
            .trajectory
            .points
            .iter()
            .zip(p2.trajectory.points.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(dist_out <= dist_in + 1e-6, "{dist_out} > {dist_in}");
    }

    #[test]
    fn projected_output_is_feasible() {
        for seed in 0..5 {
            let t = random_traj(2, 7, seed, 0.45);
            let p = project_with_bounds(&t, 0.04, 0.02, 1e-9, 50000).unwrap();
            assert!(p.converged, "seed {seed}: residual {}", p.residual);
            let r = check_feasibility_bounds(&p.trajectory, 0.04, 0.02, 0.5).unwrap();
            assert!(r.max_speed_violation <= 1e-9);
            assert!(r.max_accel_violation <= 1e-9);
        }
    }

    #[test]
    fn project_scales_bounds_with_decimation() {
        let spec = HardwareSpec::default_3t(64);
        let (alpha, beta) = normalized_bounds(&spec).unwrap();
        let mut t = random_traj(1, 5, 17, 0.4);
        t.decimation = 4;
        let p = project(&t, &spec, 1e-9, 50000).unwrap();
        let r = check_feasibility_bounds(
            &p.trajectory,
            alpha * 4.0,
            beta * 16.0,
            0.5,
        )
        .unwrap();
        assert!(r.max_speed_violation <= 1e-8);
        assert!(r.max_accel_violation <= 1e-8);
        assert!(p.trajectory.in_nyquist_box(0.0));
    }
}
