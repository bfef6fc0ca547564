//! Min-cost trajectory selection over a space-time cost volume, and the
//! planning metrics (L2, cumulative collision rate, lane violation) used
//! to compare planners.

use crate::bev::RoiSpec;
use crate::geometry::Trajectory;
use crate::net::ops::bilinear_taps;
use crate::net::Tensor4;
use crate::rules;
use crate::scalar::Real;
use crate::scenario::Scenario;
use serde::{Deserialize, Serialize};

/// Cost contributed by a waypoint that falls outside the raster; equals
/// the cost-volume clip maximum.
pub const OOB_COST: f64 = 1000.0;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PlanError {
    #[error("cannot plan over an empty sample set")]
    EmptySamples,
    #[error("trajectory covers {got} steps, evaluation needs {expected}")]
    HorizonMismatch { expected: usize, got: usize },
}

/// A stack of T planar cost maps in double precision, timestep-major.
#[derive(Debug, Clone)]
pub struct CostVolume {
    pub t: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl CostVolume {
    pub fn new(t: usize, h: usize, w: usize) -> Self {
        CostVolume {
            t,
            h,
            w,
            data: vec![0.0; t * h * w],
        }
    }

    /// Reinterpret a (1, T, H, W) network output.
    pub fn from_tensor<S: Real>(x: &Tensor4<S>) -> Self {
        assert_eq!(x.n, 1, "cost volume expects a unit batch");
        CostVolume {
            t: x.c,
            h: x.h,
            w: x.w,
            data: x.data.iter().map(|v| v.as_f64()).collect(),
        }
    }

    pub fn at(&self, t: usize, r: usize, c: usize) -> f64 {
        self.data[(t * self.h + r) * self.w + c]
    }

    pub fn set(&mut self, t: usize, r: usize, c: usize, v: f64) {
        self.data[(t * self.h + r) * self.w + c] = v;
    }

    /// Bilinear read at continuous grid coordinates; outside the valid
    /// support the out-of-bounds cost applies.
    pub fn read(&self, t: usize, row: f64, col: f64) -> f64 {
        match (bilinear_taps(row, self.h), bilinear_taps(col, self.w)) {
            (Some((r0, r1, fr)), Some((c0, c1, fc))) => {
                self.at(t, r0, c0) * (1.0 - fr) * (1.0 - fc)
                    + self.at(t, r0, c1) * (1.0 - fr) * fc
                    + self.at(t, r1, c0) * fr * (1.0 - fc)
                    + self.at(t, r1, c1) * fr * fc
            }
            _ => OOB_COST,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlanResult {
    pub chosen: Trajectory<f64>,
    pub chosen_id: usize,
    pub chosen_cost: f64,
    pub all_costs: Vec<(usize, f64)>,
}

/// Total volume cost of one trajectory: the sum over steps of the
/// bilinearly interpolated cost at each waypoint.
pub fn trajectory_cost(cost: &CostVolume, roi: &RoiSpec, tr: &Trajectory<f64>) -> f64 {
    tr.waypoints
        .iter()
        .enumerate()
        .take(cost.t)
        .map(|(i, wp)| {
            let (x, y) = wp.pose.position();
            let (row, col) = roi.grid_continuous(x, y);
            cost.read(i, row, col)
        })
        .sum()
}

/// Pick the minimum-cost sample; ties go to the lowest trajectory id.
pub fn plan(
    cost: &CostVolume,
    roi: &RoiSpec,
    samples: &[Trajectory<f64>],
) -> Result<PlanResult, PlanError> {
    if samples.is_empty() {
        return Err(PlanError::EmptySamples);
    }
    let all_costs: Vec<(usize, f64)> = samples
        .iter()
        .enumerate()
        .map(|(id, tr)| (id, trajectory_cost(cost, roi, tr)))
        .collect();
    let (chosen_id, chosen_cost) = all_costs
        .iter()
        .fold(None::<(usize, f64)>, |best, &(id, c)| match best {
            Some((_, bc)) if bc <= c => best,
            _ => Some((id, c)),
        })
        .unwrap();
    Ok(PlanResult {
        chosen: samples[chosen_id].clone(),
        chosen_id,
        chosen_cost,
        all_costs,
    })
}

/// Per-scenario outcome at each evaluation horizon. Collision and lane
/// violation are cumulative: true if the event happened at or before the
/// horizon.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioEval {
    pub horizons: Vec<f64>,
    pub l2: Vec<f64>,
    pub collision: Vec<bool>,
    pub violation: Vec<bool>,
}

/// Standard horizons in seconds.
pub const HORIZONS: [f64; 3] = [1.0, 2.0, 3.0];

/// Score one planned trajectory against the scenario's future: L2 to the
/// demonstration plus cumulative collision and solid-line contact flags.
pub fn evaluate(
    scenario: &Scenario,
    planned: &Trajectory<f64>,
    horizons: &[f64],
) -> Result<ScenarioEval, PlanError> {
    let demo = &scenario.demonstration;
    if planned.waypoints.len() != demo.waypoints.len() {
        return Err(PlanError::HorizonMismatch {
            expected: demo.waypoints.len(),
            got: planned.waypoints.len(),
        });
    }
    let dt = demo.dt;
    let last_step = |h: f64| -> usize {
        let s = (h / dt).round() as usize;
        s.saturating_sub(1).min(planned.waypoints.len() - 1)
    };
    let mut hit = Vec::with_capacity(planned.waypoints.len());
    let mut touch = Vec::with_capacity(planned.waypoints.len());
    for (i, wp) in planned.waypoints.iter().enumerate() {
        let t = (i + 1) as f64 * dt;
        hit.push(rules::collision_at(scenario, &wp.pose, t));
        touch.push(rules::boundary_touch(scenario, &wp.pose));
    }
    let mut l2 = Vec::new();
    let mut collision = Vec::new();
    let mut violation = Vec::new();
    for &h in horizons {
        let s = last_step(h);
        l2.push(planned.waypoints[s].pose.distance(&demo.waypoints[s].pose));
        collision.push(hit[..=s].iter().any(|&b| b));
        violation.push(touch[..=s].iter().any(|&b| b));
    }
    Ok(ScenarioEval {
        horizons: horizons.to_vec(),
        l2,
        collision,
        violation,
    })
}

/// Aggregate metrics over a scenario set: mean L2 and event fractions
/// per horizon.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub horizons: Vec<f64>,
    pub l2_at: Vec<f64>,
    pub collision_rate_at: Vec<f64>,
    pub lane_violation_at: Vec<f64>,
    pub n_scenarios: usize,
}

pub fn aggregate(evals: &[ScenarioEval], horizons: &[f64]) -> MetricsReport {
    let n = evals.len();
    let k = horizons.len();
    let mut l2_at = vec![0.0; k];
    let mut collision_rate_at = vec![0.0; k];
    let mut lane_violation_at = vec![0.0; k];
    for e in evals {
        assert_eq!(e.horizons.len(), k, "mixed horizon sets");
        for i in 0..k {
            l2_at[i] += e.l2[i];
            collision_rate_at[i] += e.collision[i] as usize as f64;
            lane_violation_at[i] += e.violation[i] as usize as f64;
        }
    }
    if n > 0 {
        for i in 0..k {
            l2_at[i] /= n as f64;
            collision_rate_at[i] /= n as f64;
            lane_violation_at[i] /= n as f64;
        }
    }
    MetricsReport {
        horizons: horizons.to_vec(),
        l2_at,
        collision_rate_at,
        lane_violation_at,
        n_scenarios: n,
    }
}
