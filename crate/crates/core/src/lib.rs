//! Graph recovery for Gaussian graphical models with partially known
//! structure, by annealed Langevin sampling of the unknown edges.

pub mod baselines;
pub mod covsel;
pub mod generators;
pub mod graph;
pub mod harness;
pub mod sampler;
pub mod schedule;
pub mod scores;

pub use covsel::{constrained_mle, sample_covariance, weighted_glasso, ObservationSet, PrecisionEstimate, SampleCovariance};
pub use graph::{AdjacencyMatrix, HalfVector, MaskPartition, RelaxedAdjacency};
pub use sampler::{draw_samples, estimate, LangevinProblem, SamplerConfig};
pub use schedule::NoiseSchedule;
pub use scores::{EmpiricalPriorScore, GraphDataset, ScoreEstimator};
pub use nalgebra;
