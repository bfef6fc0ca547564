//! Trajectory sampling: feasible candidates for min-cost planning and
//! adversarial negatives for the max-margin loss.
//!
//! A sample is a path family (straight / circle / clothoid, drawn with
//! probabilities 0.5 / 0.25 / 0.25) combined with a constant-acceleration
//! velocity profile. Clothoid scales are uniform on [6, 80] m and the curve
//! is entered at the arc position whose curvature matches the SDV's initial
//! steering.

use crate::geometry::{
    build_trajectory, match_initial_curvature, GeometryError, PathSpec, SdvState, Trajectory,
    VelocityProfile,
};
use crate::scalar::Real;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct SamplerConfig {
    pub n_samples: usize,
    pub p_straight: f64,
    pub p_circle: f64,
    pub p_clothoid: f64,
    /// Clothoid scale range in meters.
    pub scale_range: [f64; 2],
    /// Profile acceleration range in m/s^2.
    pub accel_range: [f64; 2],
    pub seed: u64,
    /// Probability that a negative sample violates the SDV initial state.
    pub negative_violate_prob: f64,
    /// Violating negatives resample initial speed uniformly from this range.
    pub velocity_resample_range: [f64; 2],
    /// When set, violating negatives also resample the initial curvature
    /// from `curvature_resample_range` (default: velocity only).
    pub resample_curvature: bool,
    pub curvature_resample_range: [f64; 2],
    /// Circle curvature magnitude range used when the SDV drives straight.
    pub circle_curvature_range: [f64; 2],
    /// Negatives drawn per training example.
    pub n_negatives: usize,
    /// Clothoid start offsets beyond `max_offset_factor * scale` reject the
    /// draw; the sampler retries with a fresh scale.
    pub max_offset_factor: f64,
    /// Waypoints farther than this from the start flag the trajectory.
    pub spatial_bound: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_samples: 600,
            p_straight: 0.5,
            p_circle: 0.25,
            p_clothoid: 0.25,
            scale_range: [6.0, 80.0],
            accel_range: [-5.0, 5.0],
            seed: 0,
            negative_violate_prob: 0.8,
            velocity_resample_range: [0.0, 15.0],
            resample_curvature: false,
            curvature_resample_range: [-1.0 / 6.0, 1.0 / 6.0],
            circle_curvature_range: [1.0 / 80.0, 1.0 / 6.0],
            n_negatives: 100,
            max_offset_factor: 1.5,
            spatial_bound: 80.0,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SamplerError {
    #[error("sampler probabilities must be nonnegative and sum to 1, got {0}")]
    BadProbabilities(f64),
    #[error("sampler range disordered: {0}")]
    BadRange(&'static str),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        let sum = self.p_straight + self.p_circle + self.p_clothoid;
        if self.p_straight < 0.0 || self.p_circle < 0.0 || self.p_clothoid < 0.0
            || (sum - 1.0).abs() > 1e-9
        {
            return Err(SamplerError::BadProbabilities(sum));
        }
        for (range, name) in [
            (self.scale_range, "scale_range"),
            (self.accel_range, "accel_range"),
            (self.velocity_resample_range, "velocity_resample_range"),
            (self.curvature_resample_range, "curvature_resample_range"),
            (self.circle_curvature_range, "circle_curvature_range"),
        ] {
            if range[0] > range[1] {
                return Err(SamplerError::BadRange(name));
            }
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.seed = seed;
        c
    }
}

/// A negative sample plus whether it violates the SDV initial state.
#[derive(Debug, Clone)]
pub struct NegativeSample<S> {
    pub trajectory: Trajectory<S>,
    pub violates_initial_state: bool,
}

/// Draw `config.n_samples` feasible trajectories from the SDV state.
/// Deterministic under a fixed `config.seed`.
pub fn sample_trajectories<S: Real>(
    state: &SdvState<S>,
    config: &SamplerConfig,
    t_steps: usize,
    dt: S,
) -> Result<Vec<Trajectory<S>>, SamplerError> {
    Ok(sample_trajectories_detailed(state, config, t_steps, dt)?
        .into_iter()
        .map(|s| s.trajectory)
        .collect())
}

/// One candidate plus the path family it was drawn from.
#[derive(Debug, Clone)]
pub struct SampledTrajectory<S> {
    pub spec: PathSpec<S>,
    pub trajectory: Trajectory<S>,
}

pub fn sample_trajectories_detailed<S: Real>(
    state: &SdvState<S>,
    config: &SamplerConfig,
    t_steps: usize,
    dt: S,
) -> Result<Vec<SampledTrajectory<S>>, SamplerError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut out = Vec::with_capacity(config.n_samples);
    for _ in 0..config.n_samples {
        let (spec, trajectory) = sample_one(state, config, t_steps, dt, &mut rng)?;
        out.push(SampledTrajectory { spec, trajectory });
    }
    Ok(out)
}

/// Draw `n` negatives for the max-margin loss. With probability
/// `negative_violate_prob` a negative's initial speed (and optionally
/// curvature) is resampled instead of taken from the SDV state.
pub fn sample_negatives<S: Real>(
    state: &SdvState<S>,
    demonstration: &Trajectory<S>,
    config: &SamplerConfig,
    n: usize,
) -> Result<Vec<Trajectory<S>>, SamplerError> {
    Ok(sample_negatives_detailed(state, demonstration, config, n)?
        .into_iter()
        .map(|s| s.trajectory)
        .collect())
}

pub fn sample_negatives_detailed<S: Real>(
    state: &SdvState<S>,
    demonstration: &Trajectory<S>,
    config: &SamplerConfig,
    n: usize,
) -> Result<Vec<NegativeSample<S>>, SamplerError> {
    config.validate()?;
    let t_steps = demonstration.len();
    let dt = demonstration.dt;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let violates = rng.gen::<f64>() < config.negative_violate_prob;
        let mut neg_state = *state;
        if violates {
            let [lo, hi] = config.velocity_resample_range;
            neg_state.velocity = S::of(rng.gen_range(lo..=hi));
            if config.resample_curvature {
                let [klo, khi] = config.curvature_resample_range;
                let kappa = rng.gen_range(klo..=khi);
                // steering = atan(kappa * wheelbase / 2)
                neg_state.steering_angle =
                    S::of((kappa * neg_state.wheelbase.as_f64() / 2.0).atan());
            }
        }
        let (_, trajectory) = sample_one(&neg_state, config, t_steps, dt, &mut rng)?;
        out.push(NegativeSample {
            trajectory,
            violates_initial_state: violates,
        });
    }
    Ok(out)
}

fn sample_one<S: Real>(
    state: &SdvState<S>,
    config: &SamplerConfig,
    t_steps: usize,
    dt: S,
    rng: &mut ChaCha8Rng,
) -> Result<(PathSpec<S>, Trajectory<S>), SamplerError> {
    let spec = sample_path_spec(state, config, rng)?;
    let accel = rng.gen_range(config.accel_range[0]..=config.accel_range[1]);
    let profile = VelocityProfile {
        initial_velocity: state.velocity.max(S::zero()),
        acceleration: S::of(accel),
    };
    let trajectory = build_trajectory(
        &spec,
        &profile,
        state,
        t_steps,
        dt,
        Some(S::of(config.spatial_bound)),
    )?;
    Ok((spec, trajectory))
}

fn sample_path_spec<S: Real>(
    state: &SdvState<S>,
    config: &SamplerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<PathSpec<S>, SamplerError> {
    let kappa0 = state.curvature()?;
    let u: f64 = rng.gen();
    if u < config.p_straight {
        return Ok(PathSpec::Straight);
    }
    if u < config.p_straight + config.p_circle {
        // Constant curvature: the SDV's own when it is turning, otherwise a
        // sampled one (mirroring the clothoid scale range).
        let kappa = if kappa0.abs() > S::of(1e-9) {
            kappa0
        } else {
            let [lo, hi] = config.circle_curvature_range;
            let mag = rng.gen_range(lo..=hi);
            let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            S::of(sign * mag)
        };
        return Ok(PathSpec::Circle {
            radius: S::one() / kappa,
        });
    }

    // Clothoid: retry scales whose matched start offset blows the budget.
    const MAX_TRIES: usize = 20;
    for _ in 0..MAX_TRIES {
        let scale = S::of(rng.gen_range(config.scale_range[0]..=config.scale_range[1]));
        let flipped = if kappa0.abs() > S::of(1e-9) {
            kappa0 < S::zero()
        } else {
            rng.gen::<bool>()
        };
        let probe = PathSpec::Clothoid {
            scale_a: scale,
            flipped,
            start_arc_offset: S::zero(),
        };
        match match_initial_curvature(&probe, state, S::of(config.max_offset_factor) * scale) {
            Ok(offset) => {
                return Ok(PathSpec::Clothoid {
                    scale_a: scale,
                    flipped,
                    start_arc_offset: offset,
                })
            }
            Err(GeometryError::ArcBudgetExceeded { .. }) => continue,
            Err(e) => return Err(e.into()),
        }
    }
    // Sharp steering defeats every scale in range; fall back to the circle
    // that matches the initial curvature exactly.
    Ok(PathSpec::Circle {
        radius: S::one() / kappa0,
    })
}
