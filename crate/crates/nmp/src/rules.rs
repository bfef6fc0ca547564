//! Traffic-rule predicates over scenario geometry: collision with actor
//! boxes, touching solid lane boundaries, and moving across active stop
//! lines. The planning loss uses them to raise margins on bad negatives;
//! the evaluator uses the same predicates so train and test agree on what
//! counts as a violation.

use crate::geom2d::OrientedBox;
use crate::geometry::{Pose2, Waypoint};
use crate::scenario::Scenario;

/// SDV footprint for collision and lane checks, centered at the pose.
pub const SDV_LENGTH: f64 = 4.8;
pub const SDV_WIDTH: f64 = 2.0;

/// Speeds below this count as stopped for the stop-line rule.
pub const STOPPED_EPS: f64 = 0.1;

pub fn sdv_footprint(pose: &Pose2<f64>) -> OrientedBox {
    OrientedBox::new(pose.x, pose.y, SDV_LENGTH, SDV_WIDTH, pose.heading)
}

/// Footprint overlap with any actor box at world time `t` (seconds
/// relative to the present).
pub fn collision_at(scenario: &Scenario, pose: &Pose2<f64>, t: f64) -> bool {
    let sdv = sdv_footprint(pose);
    scenario
        .actors
        .iter()
        .any(|actor| sdv.overlaps(&actor.box_at(t)))
}

/// Footprint touches any solid boundary polyline (distance exactly zero,
/// so grazing contact counts).
pub fn boundary_touch(scenario: &Scenario, pose: &Pose2<f64>) -> bool {
    let sdv = sdv_footprint(pose);
    scenario.boundaries.iter().any(|b| {
        b.style == crate::scenario::BoundaryStyle::Solid
            && b.polyline.windows(2).any(|seg| {
                sdv.distance_to_segment((seg[0][0], seg[0][1]), (seg[1][0], seg[1][1])) == 0.0
            })
    })
}

/// Moving footprint on an active stop line at planning step `step`.
/// A stopped vehicle waiting on the line does not violate.
pub fn stop_line_violation(scenario: &Scenario, pose: &Pose2<f64>, step: usize, speed: f64) -> bool {
    if speed <= STOPPED_EPS {
        return false;
    }
    let sdv = sdv_footprint(pose);
    scenario.stop_lines.iter().any(|line| {
        line.active_at_step(step)
            && sdv.distance_to_segment(
                (line.segment[0][0], line.segment[0][1]),
                (line.segment[1][0], line.segment[1][1]),
            ) == 0.0
    })
}

/// The combined margin rule for planning step `step` (waypoint at world
/// time (step+1) * dt): collision, solid-boundary touch, or moving across
/// an active stop line.
pub fn rule_violation(scenario: &Scenario, wp: &Waypoint<f64>, step: usize, dt: f64) -> bool {
    let t = (step as f64 + 1.0) * dt;
    collision_at(scenario, &wp.pose, t)
        || boundary_touch(scenario, &wp.pose)
        || stop_line_violation(scenario, &wp.pose, step, wp.velocity)
}
