//! Gaussian-process emulation: kernels, trends, universal kriging.

mod file;
mod kernel;
mod mle;
mod model;
mod system;
mod trend;

pub use file::{read_model, write_model};
pub use kernel::{KernelFamily, KernelSpec, KernelStructure};
pub use mle::{FitConfig, Likelihood, LikelihoodEval};
pub use model::{q2_score, GpModel};
pub use system::UkSystem;
pub use trend::{TrendBasis, TrendTerm};
