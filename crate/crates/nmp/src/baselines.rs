//! Non-learned planning baselines: constant-velocity/curvature ego
//! extrapolation, an adaptive cruise controller that follows the lane
//! centerline, and the hand-crafted three-level cost volume.

use crate::bev::{rasterize_map, BevError, RoiSpec, MAP_ROAD};
use crate::geom2d::{polyline_at, polyline_project, OrientedBox};
use crate::geometry::{normalize_angle, Pose2, Trajectory, Waypoint};
use crate::model::detect::Detection;
use crate::planner::CostVolume;
use crate::rules::SDV_LENGTH;
use crate::scenario::{Lane, Scenario};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum BaselineError {
    #[error("ego extrapolation needs at least two past states, got {0}")]
    ShortHistory(usize),
    #[error("no lane under the SDV")]
    NoLaneUnderSdv,
}

/// Roll the SDV forward under constant speed and curvature estimated
/// from the last two past poses. The chord-to-arc correction makes the
/// rollout exact for circular histories.
pub fn ego_extrapolation(
    past: &[Pose2<f64>],
    past_dt: f64,
    t_steps: usize,
    dt: f64,
) -> Result<Trajectory<f64>, BaselineError> {
    if past.len() < 2 {
        return Err(BaselineError::ShortHistory(past.len()));
    }
    let a = &past[past.len() - 2];
    let b = &past[past.len() - 1];
    let chord = a.distance(b);
    let dh = normalize_angle(b.heading - a.heading);
    let (speed, curvature) = if chord < 1e-9 {
        (0.0, 0.0)
    } else if dh.abs() < 1e-9 {
        (chord / past_dt, 0.0)
    } else {
        // Exact circle geometry: chord = 2R sin(dh/2), arc = R dh.
        let radius = chord / (2.0 * (dh / 2.0).sin());
        ((radius * dh).abs() / past_dt, 1.0 / radius)
    };
    let mut pose = *b;
    let mut waypoints = Vec::with_capacity(t_steps);
    for _ in 0..t_steps {
        let ds = speed * dt;
        pose = advance_arc(&pose, ds, curvature);
        waypoints.push(Waypoint {
            pose,
            velocity: speed,
        });
    }
    Ok(Trajectory {
        waypoints,
        dt,
        out_of_bounds: false,
    })
}

/// One exact constant-curvature step of length `ds`.
fn advance_arc(pose: &Pose2<f64>, ds: f64, curvature: f64) -> Pose2<f64> {
    if curvature.abs() < 1e-12 {
        Pose2::new(
            pose.x + ds * pose.heading.cos(),
            pose.y + ds * pose.heading.sin(),
            pose.heading,
        )
    } else {
        let h2 = pose.heading + curvature * ds;
        Pose2::new(
            pose.x + ((h2).sin() - pose.heading.sin()) / curvature,
            pose.y + (pose.heading.cos() - (h2).cos()) / curvature,
            normalize_angle(h2),
        )
    }
}

const TICKS_PER_STEP: usize = 5;
/// Assumed comfortable braking when computing safe approach speeds;
/// below the 5 m/s^2 envelope so saturation keeps a reserve.
const BRAKE: f64 = 4.0;
/// Standstill buffer behind a lead vehicle, bumper to bumper.
const STANDSTILL_GAP: f64 = 2.0;
/// Buffer between the front bumper and a stop line.
const STOP_LINE_GAP: f64 = 0.5;
/// Desired time gap behind the lead vehicle.
const TIME_GAP: f64 = 1.5;

fn centerline_pts(lane: &Lane) -> Vec<(f64, f64)> {
    lane.centerline.iter().map(|p| (p[0], p[1])).collect()
}

/// The lane whose corridor contains the SDV, nearest first.
fn lane_under(scenario: &Scenario) -> Option<(usize, Vec<(f64, f64)>, f64)> {
    let p = (scenario.sdv.pose.x, scenario.sdv.pose.y);
    let mut best: Option<(usize, Vec<(f64, f64)>, f64, f64)> = None;
    for (i, lane) in scenario.lanes.iter().enumerate() {
        let pts = centerline_pts(lane);
        if pts.len() < 2 {
            continue;
        }
        let (arc, lateral) = polyline_project(&pts, p);
        if lateral <= lane.width / 2.0 && best.as_ref().map_or(true, |b| lateral < b.3) {
            best = Some((i, pts, arc, lateral));
        }
    }
    best.map(|(i, pts, arc, _)| (i, pts, arc))
}

/// Arc positions where a stop line crosses the centerline.
fn stop_line_arcs(scenario: &Scenario, pts: &[(f64, f64)]) -> Vec<(usize, f64)> {
    let mut arcs = Vec::new();
    for (si, stop) in scenario.stop_lines.iter().enumerate() {
        let c = (stop.segment[0][0], stop.segment[0][1]);
        let d = (stop.segment[1][0], stop.segment[1][1]);
        let mut base = 0.0;
        for w in pts.windows(2) {
            let r = (w[1].0 - w[0].0, w[1].1 - w[0].1);
            let s2 = (d.0 - c.0, d.1 - c.1);
            let denom = r.0 * s2.1 - r.1 * s2.0;
            let seg_len = (r.0 * r.0 + r.1 * r.1).sqrt();
            if denom.abs() > 1e-12 {
                let qp = (c.0 - w[0].0, c.1 - w[0].1);
                let t = (qp.0 * s2.1 - qp.1 * s2.0) / denom;
                let u = (qp.0 * r.1 - qp.1 * r.0) / denom;
                if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
                    arcs.push((si, base + t * seg_len));
                }
            }
            base += seg_len;
        }
    }
    arcs
}

/// Adaptive cruise control along the lane centerline: track the speed
/// limit, keep a time gap behind the lead vehicle, and treat active stop
/// lines as stationary obstacles. Never exceeds the speed limit or the
/// [-5, 5] m/s^2 envelope.
pub fn acc_rollout(
    scenario: &Scenario,
    t_steps: usize,
    dt: f64,
) -> Result<Trajectory<f64>, BaselineError> {
    let (_, pts, s0) = lane_under(scenario).ok_or(BaselineError::NoLaneUnderSdv)?;
    let lane_half = scenario
        .lanes
        .iter()
        .map(|l| l.width / 2.0)
        .fold(1.8, f64::max);
    let stop_arcs = stop_line_arcs(scenario, &pts);
    let tick = dt / TICKS_PER_STEP as f64;
    let mut s = s0;
    let mut v = scenario.sdv.velocity.clamp(0.0, scenario.speed_limit);
    let mut waypoints = Vec::with_capacity(t_steps);
    for step in 0..t_steps {
        for sub in 0..TICKS_PER_STEP {
            let t = (step * TICKS_PER_STEP + sub) as f64 * tick;
            let mut v_des = scenario.speed_limit;

            // Nearest on-lane actor ahead. Never accelerate toward a
            // slower lead; brake to hold the time gap.
            for actor in &scenario.actors {
                let pose = actor.track.pose_at(t);
                let (arc_a, lat_a) = polyline_project(&pts, (pose.x, pose.y));
                if lat_a > lane_half || arc_a <= s {
                    continue;
                }
                let gap =
                    arc_a - s - (actor.length + SDV_LENGTH) / 2.0 - STANDSTILL_GAP;
                let v_lead = actor.track.speed_at(t);
                let g = gap.max(0.0);
                let v_brake = (v_lead * v_lead + 2.0 * BRAKE * g).sqrt();
                let cap = if v_lead < 0.5 {
                    // Effectively parked: the braking law alone stops in
                    // finite time; the time-gap rule would only creep.
                    v_brake.min(v)
                } else {
                    let v_gap = v_lead + g / TIME_GAP;
                    v_brake.min(v_gap).min(v.max(v_lead))
                };
                v_des = v_des.min(cap);
            }

            // Active stop lines ahead are stationary obstacles; the
            // braking law alone gives a finite-time stop.
            let demo_step = ((t / dt) as usize).min(t_steps.saturating_sub(1));
            for &(si, arc) in &stop_arcs {
                if !scenario.stop_lines[si].active_at_step(demo_step) || arc <= s {
                    continue;
                }
                let g = (arc - s - SDV_LENGTH / 2.0 - STOP_LINE_GAP).max(0.0);
                v_des = v_des.min((2.0 * BRAKE * g).sqrt());
            }

            // Track the desired speed exactly, subject to the envelope.
            let v_new = v_des
                .clamp(v - 5.0 * tick, v + 5.0 * tick)
                .clamp(0.0, scenario.speed_limit);
            s += (v + v_new) / 2.0 * tick;
            v = v_new;
        }
        let (p, heading) = polyline_at(&pts, s);
        waypoints.push(Waypoint {
            pose: Pose2::new(p.0, p.1, heading),
            velocity: v,
        });
    }
    Ok(Trajectory {
        waypoints,
        dt,
        out_of_bounds: false,
    })
}

/// Where the manual baseline takes its obstacles from.
#[derive(Debug, Clone, Copy)]
pub enum ObstacleSource<'a> {
    /// Ground-truth actor boxes interpolated along their tracks.
    GroundTruth,
    /// Detector output with per-frame forecasts.
    Detections(&'a [Detection]),
}

impl ObstacleSource<'_> {
    pub fn label(&self) -> &'static str {
        match self {
            ObstacleSource::GroundTruth => "ground_truth",
            ObstacleSource::Detections(_) => "detections",
        }
    }
}

/// The hand-crafted cost volume: road cells cost 0, cells covered by an
/// obstacle box at the step's time cost 255, everything else 100.
pub fn manual_cost_volume(
    scenario: &Scenario,
    roi: &RoiSpec,
    t_steps: usize,
    dt: f64,
    source: ObstacleSource,
) -> Result<CostVolume, BevError> {
    let map = rasterize_map::<f64>(scenario, roi)?;
    let (h, w) = (roi.h(), roi.w());
    let mut vol = CostVolume::new(t_steps, h, w);
    for step in 0..t_steps {
        let boxes: Vec<OrientedBox> = match source {
            ObstacleSource::GroundTruth => scenario
                .actors
                .iter()
                .map(|a| a.box_at((step + 1) as f64 * dt))
                .collect(),
            ObstacleSource::Detections(dets) => {
                dets.iter().map(|d| *d.box_at_step(step)).collect()
            }
        };
        for r in 0..h {
            for c in 0..w {
                let road = map.at(MAP_ROAD, r, c) > 0.5;
                vol.set(step, r, c, if road { 0.0 } else { 100.0 });
            }
        }
        for b in &boxes {
            stamp_box(&mut vol, step, roi, b);
        }
    }
    Ok(vol)
}

/// Mark every cell whose center lies inside the box.
fn stamp_box(vol: &mut CostVolume, step: usize, roi: &RoiSpec, b: &OrientedBox) {
    let corners = b.corners();
    let xs = corners.iter().map(|p| p.0);
    let ys = corners.iter().map(|p| p.1);
    let (x0, x1) = (xs.clone().fold(f64::INFINITY, f64::min), xs.fold(f64::NEG_INFINITY, f64::max));
    let (y0, y1) = (ys.clone().fold(f64::INFINITY, f64::min), ys.fold(f64::NEG_INFINITY, f64::max));
    let (r0, c0) = match roi.grid_of_xy(x0.max(-roi.length_back), y0.max(-roi.width_half)) {
        Some(rc) => rc,
        None => (0, 0),
    };
    let (r1, c1) = match roi.grid_of_xy(
        x1.min(roi.length_fwd - 1e-9),
        y1.min(roi.width_half - 1e-9),
    ) {
        Some(rc) => rc,
        None => (vol.h - 1, vol.w - 1),
    };
    if x1 < -roi.length_back || x0 > roi.length_fwd || y1 < -roi.width_half || y0 > roi.width_half
    {
        return;
    }
    for r in r0..=r1.min(vol.h - 1) {
        for c in c0..=c1.min(vol.w - 1) {
            let (cx, cy) = roi.cell_center(r, c);
            if b.contains(cx, cy) {
                vol.set(step, r, c, 255.0);
            }
        }
    }
}
