//! Hardware-constrained k-space trajectory optimization.
//!
//! The crate covers the full pipeline: trajectory containers and gradient
//! profiles, kinematic feasibility checks and exact Euclidean projection,
//! a direct-evaluation NUFFT with analytic location derivatives, Pipe
//! density compensation, density-compensated and CG reconstruction, image
//! quality metrics with analytic gradients, and a multi-resolution Adam
//! optimizer in projection or penalty mode.

pub mod constraints;
pub mod density;
pub mod error;
pub mod hardware;
pub mod imageio;
pub mod interp;
pub mod metrics;
pub mod nufft;
pub mod optimizer;
pub mod phantom;
pub mod recon;
pub mod trajectory;

pub use constraints::{check_feasibility, project, FeasibilityReport, Projected};
pub use density::{pipe_weights, DensityWeights};
pub use error::{Error, Result};
pub use hardware::{normalized_bounds, HardwareSpec};
pub use metrics::{combined_loss, psnr, ssim};
pub use nufft::{ComplexImage, KSpaceData, NufftPlan};
pub use optimizer::{optimize, Mode, OptimConfig, RunHistory};
pub use trajectory::{radial_init, GradientProfile, Trajectory};
