//! `kbench`: reproducible trajectory optimization and benchmark runs.
//! Every subcommand reads the same flat key = value config; outputs land
//! in a run directory named by the config hash.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kbench::bench;
use kbench::config::{load_config, BenchConfig};
use kspace_opt::optimizer::Mode;
use kspace_opt::trajectory::{load_csv, save_csv, undersampling_factor};

#[derive(Parser)]
#[command(name = "kbench", about = "Constrained k-space trajectory benchmark harness")]
struct Cli {
    /// Run configuration file (flat key = value); defaults apply if omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Root directory for run outputs.
    #[arg(long, global = true, default_value = "runs")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the (projected) radial initialization and its profiles.
    Init,
    /// Run the configured optimization; write trajectory, history, report.
    Optimize,
    /// Evaluate a trajectory (default: the radial initialization).
    Evaluate {
        /// Trajectory CSV to evaluate instead of the initialization.
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Export gradient/slew profiles for a trajectory.
    Profiles {
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Optimize in projection and penalty mode and emit the paired report.
    Compare,
    /// Print the configured undersampling factor.
    Uf,
}

fn load(cli: &Cli) -> kspace_opt::Result<BenchConfig> {
    let mut cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => BenchConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.optim.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Create `<out>/<hash12>/` and drop the canonical config next to the
/// outputs so every run is self-describing.
fn run_dir(out: &Path, cfg: &BenchConfig) -> std::io::Result<PathBuf> {
    let dir = out.join(cfg.short_hash());
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("config.txt"), cfg.canonical())?;
    Ok(dir)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> kspace_opt::Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| kspace_opt::Error::Format(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn run(cli: &Cli) -> kspace_opt::Result<()> {
    let cfg = load(cli)?;
    let spec = cfg.hardware();
    match &cli.command {
        Command::Uf => {
            let uf = undersampling_factor(
                cfg.matrix_size,
                cfg.n_shots,
                cfg.n_samples,
                cfg.optim.dwell_ratio,
            )?;
            println!("{uf}");
        }
        Command::Init => {
            let dir = run_dir(&cli.out, &cfg)?;
            let traj = bench::radial_init(cfg.n_shots, cfg.n_samples, &spec)?;
            save_csv(&traj, &dir.join("init.csv"))?;
            bench::export_profiles(&traj, &spec, &dir.join("init_profiles.csv"))?;
            println!("{}", dir.display());
        }
        Command::Optimize => {
            let dir = run_dir(&cli.out, &cfg)?;
            let (init, history) = {
                let (train, _) = bench::config_dataset(&cfg)?;
                bench::run_optimize(&cfg, &train)?
            };
            save_csv(&init, &dir.join("init.csv"))?;
            save_csv(&history.final_trajectory, &dir.join("trajectory.csv"))?;
            let f = fs::File::create(dir.join("history.csv"))?;
            history.export(std::io::BufWriter::new(f))?;
            for warning in &history.warnings {
                eprintln!("warning: {warning}");
            }
            let (_, eval) = bench::config_dataset(&cfg)?;
            let report = bench::evaluate(&history.final_trajectory, &eval, &spec, &cfg, "optimized")?;
            write_json(&dir.join("report.json"), &report)?;
            bench::export_profiles(
                &history.final_trajectory,
                &spec,
                &dir.join("profiles.csv"),
            )?;
            println!("{}", dir.display());
        }
        Command::Evaluate { trajectory } => {
            let dir = run_dir(&cli.out, &cfg)?;
            let traj = match trajectory {
                Some(path) => load_csv(path)?,
                None => bench::radial_init(cfg.n_shots, cfg.n_samples, &spec)?,
            };
            let (_, eval) = bench::config_dataset(&cfg)?;
            let report = bench::evaluate(&traj, &eval, &spec, &cfg, "evaluated")?;
            write_json(&dir.join("report.json"), &report)?;
            println!("{}", dir.display());
        }
        Command::Profiles { trajectory } => {
            let dir = run_dir(&cli.out, &cfg)?;
            let traj = match trajectory {
                Some(path) => load_csv(path)?,
                None => bench::radial_init(cfg.n_shots, cfg.n_samples, &spec)?,
            };
            bench::export_profiles(&traj, &spec, &dir.join("profiles.csv"))?;
            println!("{}", dir.display());
        }
        Command::Compare => {
            let dir = run_dir(&cli.out, &cfg)?;
            let mut cfg_proj = cfg.clone();
            cfg_proj.optim.mode = Mode::Projection;
            let mut cfg_pen = cfg.clone();
            cfg_pen.optim.mode = Mode::Penalty;
            let (train, eval) = bench::config_dataset(&cfg)?;
            let report = bench::compare_modes(&cfg_proj, &cfg_pen, &train, &eval)?;
            write_json(&dir.join("compare.json"), &report)?;
            println!("{}", dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
