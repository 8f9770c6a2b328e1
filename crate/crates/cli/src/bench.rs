//! Benchmark operations: initialization, dataset synthesis, evaluation,
//! projection-vs-penalty comparison, and profile export.

use std::io::Write;
use std::path::Path;

use kspace_opt::constraints::{check_feasibility, project};
use kspace_opt::optimizer::ACTIVITY_TOL;
use kspace_opt::density::{pipe_weights_plan, DensityWeights};
use kspace_opt::interp::upsample_linear;
use kspace_opt::metrics::{psnr, SsimParams};
use kspace_opt::nufft::NufftPlan;
use kspace_opt::optimizer::{optimize, Mode, RunHistory};
use kspace_opt::recon::cg_least_squares;
use kspace_opt::trajectory::{self, traj_to_profile, undersampling_factor};
use kspace_opt::{ComplexImage, Error, HardwareSpec, KSpaceData, Result, Trajectory};

use crate::config::{BenchConfig, ReconMode};
use crate::report::{BenchReport, ComparisonReport, Summary};

/// Center-out radial spokes over [0, π), projected onto the feasible set.
pub fn radial_init(n_shots: usize, n_samples: usize, spec: &HardwareSpec) -> Result<Trajectory> {
    let raw = trajectory::radial_init(n_shots, n_samples)?;
    let projected = project(&raw, spec, 1e-9, 200_000)?;
    Ok(projected.trajectory)
}

/// Seeded synthetic dataset: jittered phantoms with smooth random phase.
/// Image `i` derives both jitter and phase seeds from `seed` and `i`.
pub fn make_dataset(
    n_images: usize,
    matrix_size: usize,
    phase_smoothness: f64,
    seed: u64,
) -> Result<Vec<ComplexImage>> {
    (0..n_images as u64)
        .map(|i| {
            let mag = kspace_opt::phantom::shepp_logan(matrix_size, Some(seed ^ (0x5EED << 8) ^ i))?;
            kspace_opt::phantom::synth_phase(&mag, phase_smoothness, seed ^ (0xFA5E << 8) ^ i)
        })
        .collect()
}

/// Train/eval split for a config: train images first, eval images after,
/// all derived from the config seed.
pub fn config_dataset(cfg: &BenchConfig) -> Result<(Vec<ComplexImage>, Vec<ComplexImage>)> {
    let all = make_dataset(
        cfg.n_train + cfg.n_eval,
        cfg.matrix_size,
        cfg.phase_smoothness,
        cfg.optim.seed,
    )?;
    let mut train = all;
    let eval = train.split_off(cfg.n_train);
    Ok((train, eval))
}

fn reconstruct(
    plan: &NufftPlan,
    y: Vec<num_complex::Complex64>,
    n: usize,
    recon: ReconMode,
    pipe_iters: usize,
    cg_iters: usize,
) -> Result<ComplexImage> {
    match recon {
        ReconMode::Adjoint => {
            let w = DensityWeights::uniform(y.len());
            plan.adjoint(&w.apply(&y))
        }
        ReconMode::DcAdjoint => {
            let w = pipe_weights_plan(plan, pipe_iters)?;
            plan.adjoint(&w.apply(&y))
        }
        ReconMode::Cg => {
            let w = pipe_weights_plan(plan, pipe_iters)?;
            let data = KSpaceData::new(y, plan.locations().to_vec())?;
            cg_least_squares(&data, &w, n, cg_iters)
        }
    }
}

/// Retrospective evaluation: simulate acquisition along `traj` for every
/// dataset image, reconstruct, and score magnitude PSNR/SSIM against the
/// reference.
pub fn evaluate(
    traj: &Trajectory,
    dataset: &[ComplexImage],
    spec: &HardwareSpec,
    cfg: &BenchConfig,
    label: &str,
) -> Result<BenchReport> {
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("evaluate: empty dataset".into()));
    }
    let n = spec.matrix_size;
    let full = upsample_linear(traj, cfg.optim.dwell_ratio)?;
    let plan = NufftPlan::new(&full.flat_locations(), n)?;
    let ssim_params = SsimParams::default();
    let mut psnr_db = Vec::with_capacity(dataset.len());
    let mut ssim = Vec::with_capacity(dataset.len());
    for x in dataset {
        let y = plan.forward(x)?;
        let xhat = reconstruct(&plan, y, n, cfg.recon, cfg.optim.pipe_iters, cfg.cg_iters)?;
        let rec_mag = ComplexImage::from_real(&xhat.magnitude())?;
        let ref_mag = ComplexImage::from_real(&x.magnitude())?;
        psnr_db.push(psnr(&rec_mag, &ref_mag)?);
        ssim.push(kspace_opt::metrics::mssim_mag(
            &xhat.magnitude(),
            &x.magnitude(),
            &ssim_params,
        )?);
    }
    Ok(BenchReport {
        label: label.to_string(),
        recon: cfg.recon.as_str().to_string(),
        psnr_summary: Summary::from_values(&psnr_db)?,
        ssim_summary: Summary::from_values(&ssim)?,
        psnr_db,
        ssim,
        feasibility: check_feasibility(traj, spec, ACTIVITY_TOL)?.into(),
        undersampling_factor: undersampling_factor(
            n,
            traj.n_shots(),
            traj.n_samples(),
            cfg.optim.dwell_ratio,
        )?,
        config_hash: cfg.hash(),
        seed: cfg.optim.seed,
    })
}

/// Run one optimization from the config's radial initialization.
pub fn run_optimize(cfg: &BenchConfig, train: &[ComplexImage]) -> Result<(Trajectory, RunHistory)> {
    let spec = cfg.hardware();
    let init = radial_init(cfg.n_shots, cfg.n_samples, &spec)?;
    let history = optimize(&init, train, &spec, &cfg.optim)?;
    Ok((init, history))
}

/// Optimize in projection and penalty mode from the same initialization
/// and seed, evaluate both final trajectories, and collect the activity
/// ordering the benchmark is about.
pub fn compare_modes(
    cfg_projection: &BenchConfig,
    cfg_penalty: &BenchConfig,
    train: &[ComplexImage],
    eval: &[ComplexImage],
) -> Result<ComparisonReport> {
    let mut a = cfg_projection.clone();
    let b = cfg_penalty.clone();
    if a.optim.mode != Mode::Projection || b.optim.mode != Mode::Penalty {
        return Err(Error::InvalidArgument(
            "compare_modes: configs must be projection and penalty mode respectively".into(),
        ));
    }
    // must be identical apart from mode and penalty weights
    a.optim.mode = b.optim.mode;
    a.optim.penalty_weights = b.optim.penalty_weights;
    if a != b {
        return Err(Error::InvalidArgument(
            "compare_modes: configs differ beyond mode / penalty_weights".into(),
        ));
    }

    let spec = cfg_projection.hardware();
    let (_, run_proj) = run_optimize(cfg_projection, train)?;
    let (_, run_pen) = run_optimize(cfg_penalty, train)?;
    let rep_proj = evaluate(
        &run_proj.final_trajectory,
        eval,
        &spec,
        cfg_projection,
        "projection",
    )?;
    let rep_pen = evaluate(&run_pen.final_trajectory, eval, &spec, cfg_penalty, "penalty")?;
    let viol = |r: &crate::report::FeasibilityStats| r.max_speed_violation.max(r.max_slew_violation);
    Ok(ComparisonReport {
        slew_active_fraction_projection: rep_proj.feasibility.slew_active_fraction,
        slew_active_fraction_penalty: rep_pen.feasibility.slew_active_fraction,
        max_violation_projection: viol(&rep_proj.feasibility),
        max_violation_penalty: viol(&rep_pen.feasibility),
        projection: rep_proj,
        penalty: rep_pen,
    })
}

/// CSV gradient/slew profile export: header plus one row per raster
/// interval (`Nc·(Ns-1)` rows). The slew column is empty on each shot's
/// last row, where no second difference exists.
pub fn write_profiles<W: Write>(traj: &Trajectory, spec: &HardwareSpec, mut w: W) -> Result<()> {
    let profile = traj_to_profile(traj, spec)?;
    writeln!(w, "shot,t_ms,grad_norm_mT_per_m,slew_norm_T_per_m_per_s")?;
    let (nc, ni) = (
        profile.gradient_norms.shape()[0],
        profile.gradient_norms.shape()[1],
    );
    for c in 0..nc {
        for i in 0..ni {
            let t_ms = i as f64 * spec.raster_dt * 1e3;
            write!(
                w,
                "{c},{:.17e},{:.17e},",
                t_ms,
                profile.gradient_norms[[c, i]] * 1e3
            )?;
            if i < ni - 1 {
                writeln!(w, "{:.17e}", profile.slew_norms[[c, i]])?;
            } else {
                writeln!(w)?;
            }
        }
    }
    Ok(())
}

pub fn export_profiles(traj: &Trajectory, spec: &HardwareSpec, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_profiles(traj, spec, std::io::BufWriter::new(f))
}
