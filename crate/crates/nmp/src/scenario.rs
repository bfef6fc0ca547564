//! Scenario data model: lane geometry, actors on 10 Hz tracks, stop lines,
//! the SDV state with history, and a 2 Hz demonstration trajectory.
//!
//! Scenarios are stored as versioned JSON ("nmp-scenario/1") so test
//! fixtures stay diff-able. All coordinates are world-frame; consumers
//! transform into the present SDV frame where needed. The synthetic LiDAR
//! substitute samples actor footprint perimeters and a ground-noise floor
//! instead of casting rays.

use crate::geom2d::OrientedBox;
use crate::geometry::{normalize_angle, Pose2, SdvState, Trajectory};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::Read as _;
use std::path::Path;

pub const SCHEMA_VERSION: &str = "nmp-scenario/1";

/// Seconds between consecutive LiDAR sweeps.
pub const SWEEP_DT: f64 = 0.1;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("schema version mismatch: expected {SCHEMA_VERSION}, found {0}")]
    SchemaMismatch(String),
    #[error("malformed scenario file {path}: {source}")]
    Malformed {
        path: String,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("scenario generation failed after {0} attempts")]
    RetryExhausted(usize),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Lane {
    pub centerline: Vec<[f64; 2]>,
    pub width: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryStyle {
    Solid,
    Dashed,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Boundary {
    pub polyline: Vec<[f64; 2]>,
    pub style: BoundaryStyle,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StopLine {
    pub segment: [[f64; 2]; 2],
    /// Activation per future planning step (2 Hz, demonstration timeline).
    pub active: Vec<bool>,
}

impl StopLine {
    /// Steps past the recorded window keep the last state.
    pub fn active_at_step(&self, step: usize) -> bool {
        match self.active.get(step) {
            Some(&a) => a,
            None => *self.active.last().unwrap_or(&false),
        }
    }
}

/// Uniformly sampled poses, `dt` apart, starting at `t0` seconds relative
/// to the present (negative = past).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Track {
    pub t0: f64,
    pub dt: f64,
    pub poses: Vec<Pose2<f64>>,
}

impl Track {
    /// Linear position interpolation, shortest-path heading interpolation.
    /// Times outside the window clamp to the endpoints.
    pub fn pose_at(&self, t: f64) -> Pose2<f64> {
        assert!(!self.poses.is_empty(), "empty track");
        let u = (t - self.t0) / self.dt;
        if u <= 0.0 {
            return self.poses[0];
        }
        let last = self.poses.len() - 1;
        if u >= last as f64 {
            return self.poses[last];
        }
        let i = u.floor() as usize;
        let frac = u - i as f64;
        let a = self.poses[i];
        let b = self.poses[i + 1];
        let dh = normalize_angle(b.heading - a.heading);
        Pose2::new(
            a.x + (b.x - a.x) * frac,
            a.y + (b.y - a.y) * frac,
            normalize_angle(a.heading + dh * frac),
        )
    }

    /// Central-difference speed; clamps at the track ends.
    pub fn speed_at(&self, t: f64) -> f64 {
        let h = self.dt;
        let a = self.pose_at(t - 0.5 * h);
        let b = self.pose_at(t + 0.5 * h);
        a.distance(&b) / h
    }

    pub fn t_end(&self) -> f64 {
        self.t0 + self.dt * (self.poses.len().saturating_sub(1)) as f64
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Actor {
    pub length: f64,
    pub width: f64,
    pub track: Track,
}

impl Actor {
    pub fn box_at(&self, t: f64) -> OrientedBox {
        let p = self.track.pose_at(t);
        OrientedBox::new(p.x, p.y, self.length, self.width, p.heading)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Scenario {
    pub schema: String,
    pub seed: u64,
    pub speed_limit: f64,
    pub lanes: Vec<Lane>,
    pub boundaries: Vec<Boundary>,
    pub stop_lines: Vec<StopLine>,
    pub actors: Vec<Actor>,
    pub sdv: SdvState<f64>,
    /// Past SDV poses at 10 Hz, oldest first; the last entry is the present
    /// pose (equal to `sdv.pose`).
    pub sdv_past: Vec<Pose2<f64>>,
    pub demonstration: Trajectory<f64>,
}

/// One synthetic LiDAR return, already ego-motion compensated into the
/// present SDV frame (x forward, y left, z up from ground).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub sweep: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct PointCloudConfig {
    /// Perimeter samples per meter of actor outline.
    pub perimeter_density: f64,
    /// Ground-noise returns per sweep, spread over the given box around the
    /// SDV (half-extent forward/backward and lateral, meters).
    pub noise_points: usize,
    pub noise_half_extent: f64,
}

impl Default for PointCloudConfig {
    fn default() -> Self {
        PointCloudConfig {
            perimeter_density: 3.0,
            noise_points: 40,
            noise_half_extent: 40.0,
        }
    }
}

/// Time of sweep `s` relative to the present, for `t_prime` total sweeps.
/// The last sweep (`s = t_prime - 1`) is the present.
pub fn sweep_time(s: usize, t_prime: usize) -> f64 {
    (s as f64 - (t_prime - 1) as f64) * SWEEP_DT
}

/// Sample one sweep's synthetic returns. Deterministic in
/// (scenario.seed, sweep). Actor outlines keep a per-actor phase so a rigid
/// translation of the actor translates the sampled points rigidly.
pub fn synthesize_points(
    scenario: &Scenario,
    sweep: usize,
    t_prime: usize,
    config: &PointCloudConfig,
) -> Vec<SweepPoint> {
    assert!(sweep < t_prime, "sweep index {sweep} out of [0, {t_prime})");
    let t = sweep_time(sweep, t_prime);
    let origin = scenario.sdv.pose;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed ^ (0x5eed << 32) ^ sweep as u64);
    let mut out = Vec::new();

    for (idx, actor) in scenario.actors.iter().enumerate() {
        let mut phase_rng = ChaCha8Rng::seed_from_u64(scenario.seed ^ 0xac7 ^ (idx as u64) << 8);
        let phase: f64 = phase_rng.gen();
        let b = actor.box_at(t);
        let corners = b.corners();
        let perimeter = 2.0 * (actor.length + actor.width);
        let n = (perimeter * config.perimeter_density).round() as usize;
        for k in 0..n {
            let arc = (k as f64 + phase) / n as f64 * perimeter;
            let (wx, wy) = perimeter_point(&corners, arc);
            let (lx, ly) = origin.parent_to_local(wx, wy);
            out.push(SweepPoint {
                x: lx,
                y: ly,
                z: rng.gen_range(0.3..1.7),
                sweep,
            });
        }
    }

    for _ in 0..config.noise_points {
        let e = config.noise_half_extent;
        out.push(SweepPoint {
            x: rng.gen_range(-e..e),
            y: rng.gen_range(-e..e),
            z: rng.gen_range(-0.3..0.1),
            sweep,
        });
    }
    out
}

/// Point at arc length `arc` along the closed outline `corners[0..4]`.
fn perimeter_point(corners: &[(f64, f64); 4], arc: f64) -> (f64, f64) {
    let mut remaining = arc;
    for i in 0..4 {
        let a = corners[i];
        let b = corners[(i + 1) % 4];
        let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
        if remaining <= len || i == 3 {
            let u = if len > 0.0 { (remaining / len).min(1.0) } else { 0.0 };
            return (a.0 + (b.0 - a.0) * u, a.1 + (b.1 - a.1) * u);
        }
        remaining -= len;
    }
    corners[0]
}

pub fn save(scenario: &Scenario, path: &Path) -> Result<(), ScenarioError> {
    let mut text = serde_json::to_string_pretty(scenario).expect("scenario serializes");
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
    let mut text = String::new();
    std::fs::File::open(path)?.read_to_string(&mut text)?;
    let scenario: Scenario =
        serde_json::from_str(&text).map_err(|source| ScenarioError::Malformed {
            path: path.display().to_string(),
            source,
        })?;
    if scenario.schema != SCHEMA_VERSION {
        return Err(ScenarioError::SchemaMismatch(scenario.schema));
    }
    Ok(scenario)
}

/// Load every `*.json` in a partition directory, sorted by file name.
pub fn load_dir(dir: &Path) -> Result<Vec<Scenario>, ScenarioError> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map_or(false, |x| x == "json"))
        .collect();
    paths.sort();
    paths.iter().map(|p| load(p)).collect()
}
