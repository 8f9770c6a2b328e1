//! Benchmark harness for constrained k-space trajectory optimization:
//! configuration parsing, retrospective evaluation, projection-vs-penalty
//! comparison, and profile export. The `kbench` binary wraps these in
//! subcommands with config-hash-named run directories.

pub mod bench;
pub mod config;
pub mod report;

pub use bench::{compare_modes, evaluate, export_profiles, make_dataset, radial_init, run_optimize};
pub use config::{load_config, parse_config, BenchConfig, ReconMode};
pub use report::{BenchReport, ComparisonReport, FeasibilityStats, Summary};
