//! Flat key = value run configuration: optimizer settings, hardware
//! geometry, and benchmark dataset parameters in one file. Unknown or
//! duplicated keys are rejected so typos cannot silently fall back to
//! defaults.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use kspace_opt::optimizer::{Mode, OptimConfig};
use kspace_opt::{Error, HardwareSpec, Result};
use sha2::{Digest, Sha256};

/// Reconstruction used by `evaluate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReconMode {
    /// Plain adjoint with uniform 1/M weights.
    Adjoint,
    /// Density-compensated adjoint (Pipe weights).
    DcAdjoint,
    /// Conjugate-gradient least squares.
    Cg,
}

impl ReconMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ReconMode::Adjoint => "adjoint",
            ReconMode::DcAdjoint => "dc_adjoint",
            ReconMode::Cg => "cg",
        }
    }
}

impl FromStr for ReconMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adjoint" => Ok(ReconMode::Adjoint),
            "dc_adjoint" => Ok(ReconMode::DcAdjoint),
            "cg" => Ok(ReconMode::Cg),
            other => Err(Error::InvalidArgument(format!("unknown recon mode '{other}'"))),
        }
    }
}

/// Full benchmark configuration: optimizer keys mirror `OptimConfig`
/// field-for-field; the rest describe hardware, geometry, and the
/// synthetic dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub optim: OptimConfig,
    // hardware (dwell_dt is derived: raster_dt / dwell_ratio)
    pub matrix_size: usize,
    pub gamma: f64,
    pub g_max: f64,
    pub s_max: f64,
    pub raster_dt: f64,
    pub fov: f64,
    // trajectory geometry
    pub n_shots: usize,
    pub n_samples: usize,
    // dataset
    pub n_train: usize,
    pub n_eval: usize,
    pub phase_smoothness: f64,
    // evaluation
    pub recon: ReconMode,
    pub cg_iters: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            optim: OptimConfig {
                lr: 2e-3,
                batch_size: 4,
                dwell_ratio: 2,
                ..OptimConfig::default()
            },
            matrix_size: 64,
            gamma: 42.576e6,
            g_max: 0.04,
            s_max: 180.0,
            raster_dt: 1e-5,
            fov: 0.23,
            n_shots: 4,
            n_samples: 65,
            n_train: 32,
            n_eval: 8,
            phase_smoothness: 0.5,
            recon: ReconMode::DcAdjoint,
            cg_iters: 10,
        }
    }
}

impl BenchConfig {
    pub fn hardware(&self) -> HardwareSpec {
        HardwareSpec {
            gamma: self.gamma,
            g_max: self.g_max,
            s_max: self.s_max,
            raster_dt: self.raster_dt,
            dwell_dt: self.raster_dt / self.optim.dwell_ratio as f64,
            fov: self.fov,
            matrix_size: self.matrix_size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.optim.validate()?;
        self.hardware().validate()?;
        if self.n_shots == 0 || self.n_samples < 3 {
            return Err(Error::InvalidArgument(
                "need n_shots >= 1 and n_samples >= 3".into(),
            ));
        }
        for &level in &self.optim.decimation_levels {
            if (self.n_samples - 1) % level != 0 {
                return Err(Error::InvalidArgument(format!(
                    "n_samples - 1 = {} must be divisible by decimation level {level}",
                    self.n_samples - 1
                )));
            }
        }
        if self.n_train == 0 || self.n_eval == 0 {
            return Err(Error::InvalidArgument("need n_train, n_eval >= 1".into()));
        }
        if self.cg_iters == 0 {
            return Err(Error::InvalidArgument("cg_iters must be >= 1".into()));
        }
        Ok(())
    }

    /// Canonical key = value dump: one line per key, sorted, full float
    /// precision. The config hash is defined over this text.
    pub fn canonical(&self) -> String {
        let o = &self.optim;
        let mut kv: BTreeMap<&str, String> = BTreeMap::new();
        kv.insert("mode", o.mode.to_string());
        kv.insert("lr", format!("{:e}", o.lr));
        kv.insert("adam_betas", format!("{:e},{:e}", o.adam_betas.0, o.adam_betas.1));
        kv.insert("adam_eps", format!("{:e}", o.adam_eps));
        kv.insert("steps_per_level", o.steps_per_level.to_string());
        kv.insert(
            "decimation_levels",
            o.decimation_levels
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        kv.insert(
            "loss_weights",
            format!("{:e},{:e},{:e}", o.loss_weights.0, o.loss_weights.1, o.loss_weights.2),
        );
        kv.insert(
            "penalty_weights",
            format!("{:e},{:e}", o.penalty_weights.0, o.penalty_weights.1),
        );
        kv.insert("batch_size", o.batch_size.to_string());
        kv.insert("seed", o.seed.to_string());
        kv.insert("dwell_ratio", o.dwell_ratio.to_string());
        kv.insert("pipe_iters", o.pipe_iters.to_string());
        kv.insert("proj_tol", format!("{:e}", o.proj_tol));
        kv.insert("proj_max_iter", o.proj_max_iter.to_string());
        kv.insert("matrix_size", self.matrix_size.to_string());
        kv.insert("gamma", format!("{:e}", self.gamma));
        kv.insert("g_max", format!("{:e}", self.g_max));
        kv.insert("s_max", format!("{:e}", self.s_max));
        kv.insert("raster_dt", format!("{:e}", self.raster_dt));
        kv.insert("fov", format!("{:e}", self.fov));
        kv.insert("n_shots", self.n_shots.to_string());
        kv.insert("n_samples", self.n_samples.to_string());
        kv.insert("n_train", self.n_train.to_string());
        kv.insert("n_eval", self.n_eval.to_string());
        kv.insert("phase_smoothness", format!("{:e}", self.phase_smoothness));
        kv.insert("recon", self.recon.as_str().to_string());
        kv.insert("cg_iters", self.cg_iters.to_string());
        let mut out = String::new();
        for (k, v) in kv {
            writeln!(out, "{k} = {v}").expect("string write");
        }
        out
    }

    /// Hex SHA-256 of the canonical dump; the first 12 characters name the
    /// run directory.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn short_hash(&self) -> String {
        self.hash()[..12].to_string()
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Format(format!("config key '{key}': {e}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str, expected: Option<usize>) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let items: Vec<T> = value
        .split(',')
        .map(|s| parse(key, s.trim()))
        .collect::<Result<_>>()?;
    if let Some(n) = expected {
        if items.len() != n {
            return Err(Error::Format(format!(
                "config key '{key}': expected {n} comma-separated values"
            )));
        }
    }
    Ok(items)
}

/// Parse a config file body. Missing keys keep their defaults; `#` starts
/// a comment.
pub fn parse_config(text: &str) -> Result<BenchConfig> {
    let mut cfg = BenchConfig::default();
    let mut seen = std::collections::BTreeSet::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Format(format!("config line {}: expected key = value", lineno + 1))
        })?;
        let (key, value) = (key.trim(), value.trim());
        if !seen.insert(key.to_string()) {
            return Err(Error::Format(format!("duplicate config key '{key}'")));
        }
        match key {
            "mode" => cfg.optim.mode = value.parse::<Mode>()?,
            "lr" => cfg.optim.lr = parse(key, value)?,
            "adam_betas" => {
                let v: Vec<f64> = parse_list(key, value, Some(2))?;
                cfg.optim.adam_betas = (v[0], v[1]);
            }
            "adam_eps" => cfg.optim.adam_eps = parse(key, value)?,
            "steps_per_level" => cfg.optim.steps_per_level = parse(key, value)?,
            "decimation_levels" => cfg.optim.decimation_levels = parse_list(key, value, None)?,
            "loss_weights" => {
                let v: Vec<f64> = parse_list(key, value, Some(3))?;
                cfg.optim.loss_weights = (v[0], v[1], v[2]);
            }
            "penalty_weights" => {
                let v: Vec<f64> = parse_list(key, value, Some(2))?;
                cfg.optim.penalty_weights = (v[0], v[1]);
            }
            "batch_size" => cfg.optim.batch_size = parse(key, value)?,
            "seed" => cfg.optim.seed = parse(key, value)?,
            "dwell_ratio" => cfg.optim.dwell_ratio = parse(key, value)?,
            "pipe_iters" => cfg.optim.pipe_iters = parse(key, value)?,
            "proj_tol" => cfg.optim.proj_tol = parse(key, value)?,
            "proj_max_iter" => cfg.optim.proj_max_iter = parse(key, value)?,
            "matrix_size" => cfg.matrix_size = parse(key, value)?,
            "gamma" => cfg.gamma = parse(key, value)?,
            "g_max" => cfg.g_max = parse(key, value)?,
            "s_max" => cfg.s_max = parse(key, value)?,
            "raster_dt" => cfg.raster_dt = parse(key, value)?,
            "fov" => cfg.fov = parse(key, value)?,
            "n_shots" => cfg.n_shots = parse(key, value)?,
            "n_samples" => cfg.n_samples = parse(key, value)?,
            "n_train" => cfg.n_train = parse(key, value)?,
            "n_eval" => cfg.n_eval = parse(key, value)?,
            "phase_smoothness" => cfg.phase_smoothness = parse(key, value)?,
            "recon" => cfg.recon = value.parse()?,
            "cg_iters" => cfg.cg_iters = parse(key, value)?,
            other => return Err(Error::Format(format!("unknown config key '{other}'"))),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<BenchConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}
