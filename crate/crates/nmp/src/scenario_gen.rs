//! Synthetic scenario generation: lane geometry with optional curvature,
//! actors on simple motion models, scripted or ACC-driven demonstrations,
//! and verification that every demonstration is feasible, collision-free,
//! and violation-free. Generation is a pure function of (config, seed).

use crate::baselines::acc_rollout;
use crate::bev::RoiSpec;
use crate::geometry::{Pose2, SdvState, Trajectory, Waypoint};
use crate::planner::{evaluate, HORIZONS};
use crate::scenario::{
    save, Actor, Boundary, BoundaryStyle, Lane, Scenario, ScenarioError, StopLine, Track,
    SCHEMA_VERSION,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Spacing of generated centerline points, meters.
const CENTERLINE_SPACING: f64 = 1.0;
/// Centerline length behind the SDV start.
const ROAD_BACK: f64 = 30.0;
/// Centerline length ahead of the SDV start.
const ROAD_AHEAD: f64 = 90.0;
const SDV_WHEELBASE: f64 = 2.8;
const ACTOR_LENGTH: f64 = 4.5;
const ACTOR_WIDTH: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Archetype {
    EmptyRoad,
    LaneFollow,
    StoppedLead,
    LaneChange,
    StopLineHalt,
}

pub const ARCHETYPES: [Archetype; 5] = [
    Archetype::EmptyRoad,
    Archetype::LaneFollow,
    Archetype::StoppedLead,
    Archetype::LaneChange,
    Archetype::StopLineHalt,
];

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct GenConfig {
    pub t_steps: usize,
    pub dt: f64,
    pub speed_limit: f64,
    pub lane_width: f64,
    /// Distance from the lane edge to the solid road-edge line.
    pub shoulder: f64,
    /// Raster the demonstration must stay inside.
    pub roi: RoiSpec,
    pub max_retries: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            t_steps: 6,
            dt: 0.5,
            speed_limit: 12.0,
            lane_width: 3.6,
            shoulder: 0.9,
            roi: RoiSpec::desk(),
            max_retries: 20,
        }
    }
}

/// A centerline with per-point headings so parallel lines can be offset
/// exactly.
struct Road {
    pts: Vec<(f64, f64)>,
    headings: Vec<f64>,
}

impl Road {
    /// Constant-curvature centerline through the origin, oriented so the
    /// origin heading is zero. Zero curvature gives a straight road.
    fn new(curvature: f64) -> Road {
        let n = ((ROAD_BACK + ROAD_AHEAD) / CENTERLINE_SPACING) as usize;
        let mut pts = Vec::with_capacity(n + 1);
        let mut headings = Vec::with_capacity(n + 1);
        let mut p = (-ROAD_BACK, 0.0);
        let mut heading: f64 = -curvature * ROAD_BACK;
        if curvature.abs() >= 1e-12 {
            p = (
                heading.sin() / curvature,
                (1.0 - heading.cos()) / curvature,
            );
        }
        for _ in 0..=n {
            pts.push(p);
            headings.push(heading);
            let k = curvature;
            if k.abs() < 1e-12 {
                p = (
                    p.0 + CENTERLINE_SPACING * heading.cos(),
                    p.1 + CENTERLINE_SPACING * heading.sin(),
                );
            } else {
                let h2 = heading + k * CENTERLINE_SPACING;
                p = (
                    p.0 + (h2.sin() - heading.sin()) / k,
                    p.1 + (heading.cos() - h2.cos()) / k,
                );
                heading = h2;
            }
        }
        Road { pts, headings }
    }

    /// Parallel polyline at signed lateral offset (positive left).
    fn offset(&self, lateral: f64) -> Vec<[f64; 2]> {
        self.pts
            .iter()
            .zip(&self.headings)
            .map(|(&(x, y), &h)| [x - lateral * h.sin(), y + lateral * h.cos()])
            .collect()
    }

    fn centerline(&self) -> Vec<[f64; 2]> {
        self.pts.iter().map(|&(x, y)| [x, y]).collect()
    }

    /// Pose at arc length from the road start. Vertices sit at uniform
    /// arc spacing, so the stored tangent headings interpolate exactly
    /// for constant curvature; chord positions are within the sagitta.
    fn pose_at_arc(&self, s: f64) -> Pose2<f64> {
        let last = self.pts.len() - 1;
        let u = (s / CENTERLINE_SPACING).clamp(0.0, last as f64);
        let i = (u as usize).min(last - 1);
        let f = u - i as f64;
        let (a, b) = (self.pts[i], self.pts[i + 1]);
        Pose2::new(
            a.0 + f * (b.0 - a.0),
            a.1 + f * (b.1 - a.1),
            self.headings[i] + f * (self.headings[i + 1] - self.headings[i]),
        )
    }
}

/// Constant-speed track along the road from arc `s0`, 10 Hz, covering
/// one second of history and the demonstration horizon.
fn road_track(road: &Road, s0: f64, speed: f64, horizon: f64) -> Track {
    let n = (10.0 * (1.0 + horizon)).round() as usize;
    Track {
        t0: -1.0,
        dt: 0.1,
        poses: (0..=n)
            .map(|j| road.pose_at_arc(s0 + speed * (-1.0 + 0.1 * j as f64)))
            .collect(),
    }
}

fn sdv_state(road: &Road, s0: f64, v0: f64, kappa: f64) -> (SdvState<f64>, Vec<Pose2<f64>>) {
    // Steering that holds the road curvature: kappa = 2 tan(delta) / L.
    let state = SdvState {
        pose: road.pose_at_arc(s0),
        velocity: v0,
        steering_angle: (kappa * SDV_WHEELBASE / 2.0).atan(),
        wheelbase: SDV_WHEELBASE,
    };
    let past = (0..11)
        .map(|i| road.pose_at_arc(s0 + v0 * (-1.0 + 0.1 * i as f64)))
        .collect();
    (state, past)
}

/// Smoothstep used by the scripted lane change.
fn smooth(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

/// Scripted lane change: constant forward speed, smooth lateral shift to
/// the adjacent centerline over `shift_time` seconds.
fn lane_change_demo(cfg: &GenConfig, v0: f64, shift_time: f64) -> Trajectory<f64> {
    let position = |t: f64| -> (f64, f64) { (v0 * t, cfg.lane_width * smooth(t / shift_time)) };
    let mut prev = position(0.0);
    let waypoints = (0..cfg.t_steps)
        .map(|i| {
            let t = (i + 1) as f64 * cfg.dt;
            let p = position(t);
            let (dx, dy) = (p.0 - prev.0, p.1 - prev.1);
            let speed = (dx * dx + dy * dy).sqrt() / cfg.dt;
            let heading = dy.atan2(dx);
            prev = p;
            Waypoint {
                pose: Pose2::new(p.0, p.1, heading),
                velocity: speed,
            }
        })
        .collect();
    Trajectory {
        waypoints,
        dt: cfg.dt,
        out_of_bounds: false,
    }
}

/// One bundle of sampled parameters; regenerated wholesale on retry.
struct Draw {
    curved: bool,
    curvature: f64,
    v0: f64,
    change_v0: f64,
    lead_gap: f64,
    lead_speed: f64,
    stop_distance: f64,
    red_through: bool,
    green_step: usize,
    shift_time: f64,
}

impl Draw {
    fn sample(rng: &mut ChaCha8Rng, cfg: &GenConfig) -> Draw {
        let radius = rng.gen_range(60.0..150.0);
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let v0 = rng.gen_range(7.0..11.0);
        Draw {
            curved: rng.gen_bool(0.5),
            curvature: sign / radius,
            v0,
            change_v0: rng.gen_range(6.5..8.5),
            lead_gap: rng.gen_range(18.0..30.0),
            lead_speed: rng.gen_range(5.0..9.0),
            stop_distance: rng.gen_range(20.0..30.0),
            red_through: rng.gen_bool(0.7),
            green_step: rng.gen_range(3..cfg.t_steps.max(4)),
            shift_time: rng.gen_range(1.8..2.4),
        }
    }
}

fn verify(cfg: &GenConfig, scenario: &Scenario) -> bool {
    let demo = &scenario.demonstration;
    if demo.waypoints.len() != cfg.t_steps {
        return false;
    }
    let mut prev = scenario.sdv.velocity;
    for wp in &demo.waypoints {
        let a = (wp.velocity - prev) / cfg.dt;
        if a.abs() > 5.0 + 1e-9 {
            return false;
        }
        prev = wp.velocity;
        let (x, y) = wp.pose.position();
        let (row, col) = cfg.roi.grid_continuous(x, y);
        let in_roi = row >= 0.0
            && row <= (cfg.roi.h() - 1) as f64
            && col >= 0.0
            && col <= (cfg.roi.w() - 1) as f64;
        if !in_roi {
            return false;
        }
    }
    match evaluate(scenario, demo, &HORIZONS) {
        Ok(e) => !e.collision.iter().any(|&b| b) && !e.violation.iter().any(|&b| b),
        Err(_) => false,
    }
}

/// Generate one scenario, drawing the archetype from the seed.
pub fn generate(cfg: &GenConfig, seed: u64) -> Result<Scenario, ScenarioError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let archetype = ARCHETYPES[rng.gen_range(0..ARCHETYPES.len())];
    generate_inner(cfg, seed, archetype, &mut rng)
}

/// Generate a specific archetype; same parameter stream as `generate`
/// minus the archetype draw.
pub fn generate_forced(
    cfg: &GenConfig,
    seed: u64,
    archetype: Archetype,
) -> Result<Scenario, ScenarioError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate_inner(cfg, seed, archetype, &mut rng)
}

fn generate_inner(
    cfg: &GenConfig,
    seed: u64,
    archetype: Archetype,
    rng: &mut ChaCha8Rng,
) -> Result<Scenario, ScenarioError> {
    for _ in 0..cfg.max_retries {
        let draw = Draw::sample(rng, cfg);
        let scenario = build(cfg, seed, archetype, &draw);
        if let Some(s) = scenario {
            if verify(cfg, &s) {
                return Ok(s);
            }
        }
    }
    Err(ScenarioError::RetryExhausted(cfg.max_retries))
}

fn build(cfg: &GenConfig, seed: u64, archetype: Archetype, d: &Draw) -> Option<Scenario> {
    let horizon = cfg.t_steps as f64 * cfg.dt;
    let half = cfg.lane_width / 2.0;
    let edge = half + cfg.shoulder;
    // Half the empty-road and lane-follow draws bend the whole road at
    // constant curvature, with the SDV already steering along it. Lane
    // changes and stop-line halts stay straight so their scripted
    // geometry is exact.
    let curvable = matches!(archetype, Archetype::EmptyRoad | Archetype::LaneFollow);
    let kappa = if curvable && d.curved { d.curvature } else { 0.0 };
    let road = Road::new(kappa);
    let s0 = ROAD_BACK;
    let v0 = match archetype {
        Archetype::EmptyRoad => cfg.speed_limit,
        Archetype::LaneChange => d.change_v0,
        _ => d.v0.min(cfg.speed_limit),
    };
    let (sdv, sdv_past) = sdv_state(&road, s0, v0, kappa);

    let mut lanes = vec![Lane {
        centerline: road.centerline(),
        width: cfg.lane_width,
    }];
    let mut boundaries = vec![
        Boundary {
            polyline: road.offset(edge),
            style: BoundaryStyle::Solid,
        },
        Boundary {
            polyline: road.offset(-edge),
            style: BoundaryStyle::Solid,
        },
    ];
    let mut stop_lines = Vec::new();
    let mut actors = Vec::new();
    let mut scripted_demo = None;

    match archetype {
        Archetype::EmptyRoad => {}
        Archetype::LaneFollow => {
            actors.push(Actor {
                length: ACTOR_LENGTH,
                width: ACTOR_WIDTH,
                track: road_track(&road, s0 + d.lead_gap, d.lead_speed, horizon),
            });
        }
        Archetype::StoppedLead => {
            // Close enough that braking completes within the horizon.
            let margin = (ACTOR_LENGTH + crate::rules::SDV_LENGTH) / 2.0 + 2.0;
            let reach = 3.0 * v0 - v0 * v0 / 8.0;
            let gap = margin + reach * rng_fraction(d.lead_gap);
            actors.push(Actor {
                length: ACTOR_LENGTH,
                width: ACTOR_WIDTH,
                track: road_track(&road, s0 + gap, 0.0, horizon),
            });
        }
        Archetype::LaneChange => {
            // Adjacent lane to the left; the ego lane holds a parked car.
            lanes.push(Lane {
                centerline: road.offset(cfg.lane_width),
                width: cfg.lane_width,
            });
            boundaries[0].polyline = road.offset(cfg.lane_width + edge);
            boundaries.push(Boundary {
                polyline: road.offset(half),
                style: BoundaryStyle::Dashed,
            });
            let park = (1.2 * v0 + 6.0).max(15.0);
            actors.push(Actor {
                length: ACTOR_LENGTH,
                width: ACTOR_WIDTH,
                track: road_track(&road, s0 + park, 0.0, horizon),
            });
            scripted_demo = Some(lane_change_demo(cfg, v0, d.shift_time));
        }
        Archetype::StopLineHalt => {
            let p = road.pose_at_arc(s0 + d.stop_distance);
            let n = (p.heading.cos(), p.heading.sin());
            let a = [p.x - n.1 * edge, p.y + n.0 * edge];
            let b = [p.x + n.1 * edge, p.y - n.0 * edge];
            let active = (0..cfg.t_steps)
                .map(|i| d.red_through || i < d.green_step)
                .collect();
            stop_lines.push(StopLine {
                segment: [a, b],
                active,
            });
        }
    }

    let mut scenario = Scenario {
        schema: SCHEMA_VERSION.to_string(),
        seed,
        speed_limit: cfg.speed_limit,
        lanes,
        boundaries,
        stop_lines,
        actors,
        sdv,
        sdv_past,
        demonstration: Trajectory {
            waypoints: Vec::new(),
            dt: cfg.dt,
            out_of_bounds: false,
        },
    };
    scenario.demonstration = match scripted_demo {
        Some(tr) => tr,
        None => acc_rollout(&scenario, cfg.t_steps, cfg.dt).ok()?,
    };
    Some(scenario)
}

/// Map an arbitrary draw in [18, 30) onto (0.45, 0.85) so the stopped
/// lead lands inside the braking-feasible band.
fn rng_fraction(raw: f64) -> f64 {
    0.45 + 0.4 * ((raw - 18.0) / 12.0)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
pub struct SetSummary {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

/// Seed stride between partitions; guarantees disjoint seeds for any
/// partition smaller than this.
pub const PARTITION_STRIDE: u64 = 1_000_000;

/// Write train/val/test partitions under `root`, one JSON file per
/// scenario, with disjoint seed ranges per partition.
pub fn write_set(
    cfg: &GenConfig,
    root: &Path,
    counts: (usize, usize, usize),
    base_seed: u64,
) -> Result<SetSummary, ScenarioError> {
    let parts = [
        ("train", counts.0, 0u64),
        ("val", counts.1, 1),
        ("test", counts.2, 2),
    ];
    for (name, count, block) in parts {
        assert!((count as u64) < PARTITION_STRIDE, "partition too large");
        let dir = root.join(name);
        std::fs::create_dir_all(&dir).map_err(ScenarioError::Io)?;
        for i in 0..count {
            let seed = base_seed + block * PARTITION_STRIDE + i as u64;
            let scenario = generate(cfg, seed)?;
            save(&scenario, &dir.join(format!("scenario_{i:05}.json")))?;
        }
    }
    Ok(SetSummary {
        train: counts.0,
        val: counts.1,
        test: counts.2,
    })
}
