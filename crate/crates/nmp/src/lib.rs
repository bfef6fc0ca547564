//! Desk-scale neural motion planner.
//!
//! An end-to-end interpretable planning stack: a convolutional network maps
//! bird's-eye-view LiDAR rasters and map channels to a space-time cost
//! volume, a clothoid-based sampler proposes physically feasible
//! trajectories, and planning picks the minimum-cost sample. Training is
//! multi-task: anchor-based detection plus a max-margin planning loss
//! against scripted demonstrations on synthetic scenarios.
//!
//! The numeric core is generic over the scalar type ([`scalar::Real`]);
//! gradient checks run in `f64`, training runs in `f32`.

pub mod baselines;
pub mod bev;
pub mod config;
pub mod evaluator;
pub mod geom2d;
pub mod geometry;
pub mod model;
pub mod net;
pub mod planner;
pub mod rules;
pub mod sampler;
pub mod scalar;
pub mod scenario;
pub mod scenario_gen;
pub mod trainer;

pub use scalar::Real;

/// Scalar used for training runs and checkpoints.
pub type TrainScalar = f32;
/// Scalar used for gradient checks and oracle comparisons.
pub type CheckScalar = f64;

/// World-frame pose in double precision (scenario files, metrics).
pub type Pose2d = geometry::Pose2<f64>;
/// Double-precision trajectory as stored in scenario files.
pub type Trajectoryd = geometry::Trajectory<f64>;
