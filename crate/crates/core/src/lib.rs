//! Single-step multiclass SVM training posed as a QUBO.
//!
//! The Crammer–Singer dual over a selected support subset is discretised with
//! a fixed-point binary encoding, constraint violations are folded in as
//! quadratic penalties, and the resulting upper-triangular QUBO is handed to
//! a [`sampler::Sampler`]. The best samples are decoded, scored on a
//! validation set and blended into a single kernel classifier.
//!
//! Pipeline: [`selection`] → [`qubo`] → [`sampler`] → [`model`], orchestrated
//! by [`pipeline::train`]; [`eval`] holds metrics and the scaling benchmark.

pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod kernel;
pub mod matrix;
pub mod model;
pub mod pipeline;
pub mod qubo;
pub mod sampler;
pub mod selection;

pub use data::{Dataset, MinMax, RasterSpec};
pub use error::{Error, Result};
pub use kernel::{Kernel, KernelCounter, KernelParams};
pub use matrix::Matrix;
pub use model::{CombineConfig, Threshold, TrainedModel};
pub use qubo::{QmsvmParams, QuboMeta, QuboProblem, SolutionMatrix};
pub use sampler::{AnnealConfig, ExactSolver, RemoteConfig, Sample, SampleSet, Sampler};
pub use selection::{SelectionConfig, SelectionMethod};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent RNG stream for `(seed, stream)`; used wherever work is split
/// into per-item jobs (reads, classes) so results do not depend on order.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    // splitmix64 finaliser over the combined key
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    ChaCha8Rng::seed_from_u64(z)
}
