//! Dataset evaluation: run the learned planner and the three non-learned
//! baselines over a scenario set, score every plan with the same metrics,
//! and pool detection quality into a single average precision. Scenarios
//! are independent, so they run in parallel; results are assembled in
//! dataset order and are bit-identical regardless of thread count.

use crate::baselines::{acc_rollout, ego_extrapolation, manual_cost_volume, ObstacleSource};
use crate::bev::{rasterize_input, BevError};
use crate::config::{derive_seed, RunConfig};
use crate::geometry::Trajectory;
use crate::model::anchors::anchor_field;
use crate::model::detect::{average_precision, decode_detections, match_detections};
use crate::model::{bev_to_tensor, ModelError, NmpModel};
use crate::net::store::ParamStore;
use crate::net::Graph;
use crate::planner::{aggregate, evaluate, plan, CostVolume, MetricsReport, PlanError};
use crate::sampler::{sample_trajectories, SamplerError};
use crate::scenario::Scenario;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("no scenarios to evaluate")]
    NoScenarios,
    #[error("scenario {index}: {source}")]
    Scenario {
        index: usize,
        source: Box<EvalError>,
    },
    #[error(transparent)]
    Bev(#[from] BevError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Baseline(#[from] crate::baselines::BaselineError),
}

/// Everything measured for one (scenario, method) pair.
#[derive(Debug, Clone, Serialize)]
pub struct MethodRow {
    pub scenario: usize,
    pub method: String,
    pub l2: Vec<f64>,
    pub collision: Vec<bool>,
    pub violation: Vec<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodSummary {
    pub method: String,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalOutput {
    pub config_hash: String,
    pub n_scenarios: usize,
    pub horizons: Vec<f64>,
    pub manual_source: String,
    pub methods: Vec<MethodSummary>,
    pub detection_ap: f64,
    #[serde(skip)]
    pub rows: Vec<MethodRow>,
}

struct ScenarioResult {
    plans: Vec<(String, crate::planner::ScenarioEval)>,
    ap_samples: Vec<(f64, bool)>,
    n_gt: usize,
}

/// Method order in rows and summaries. The manual baseline's name carries
/// its obstacle source.
pub const METHOD_NMP: &str = "nmp";
pub const METHOD_EGO: &str = "ego";
pub const METHOD_ACC: &str = "acc";
pub const METHOD_DEMO: &str = "demo";

pub fn evaluate_dataset(
    cfg: &RunConfig,
    store: &ParamStore<f32>,
    scenarios: &[Scenario],
) -> Result<EvalOutput, EvalError> {
    if scenarios.is_empty() {
        return Err(EvalError::NoScenarios);
    }
    let model = NmpModel::new(cfg.model.clone());
    let field = anchor_field(&cfg.roi, &cfg.model.anchors, cfg.model.downsample);
    let manual_source = if cfg.eval.manual_use_ground_truth {
        ObstacleSource::GroundTruth.label()
    } else {
        ObstacleSource::Detections(&[]).label()
    };

    let results: Vec<ScenarioResult> = scenarios
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            eval_one(cfg, &model, store, &field, i, s).map_err(|e| EvalError::Scenario {
                index: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::new();
    let mut by_method: Vec<(String, Vec<crate::planner::ScenarioEval>)> = Vec::new();
    let mut ap_samples = Vec::new();
    let mut n_gt = 0;
    for (i, r) in results.iter().enumerate() {
        for (name, e) in &r.plans {
            rows.push(MethodRow {
                scenario: i,
                method: name.clone(),
                l2: e.l2.clone(),
                collision: e.collision.clone(),
                violation: e.violation.clone(),
            });
            match by_method.iter_mut().find(|(n, _)| n == name) {
                Some((_, v)) => v.push(e.clone()),
                None => by_method.push((name.clone(), vec![e.clone()])),
            }
        }
        ap_samples.extend_from_slice(&r.ap_samples);
        n_gt += r.n_gt;
    }

    let methods = by_method
        .into_iter()
        .map(|(method, evals)| MethodSummary {
            metrics: aggregate(&evals, &cfg.eval.horizons),
            method,
        })
        .collect();

    Ok(EvalOutput {
        config_hash: format!("{:016x}", cfg.hash()),
        n_scenarios: scenarios.len(),
        horizons: cfg.eval.horizons.clone(),
        manual_source: manual_source.to_string(),
        methods,
        detection_ap: average_precision(ap_samples, n_gt),
        rows,
    })
}

fn eval_one(
    cfg: &RunConfig,
    model: &NmpModel,
    store: &ParamStore<f32>,
    field: &[crate::model::anchors::Anchor],
    index: usize,
    scenario: &Scenario,
) -> Result<ScenarioResult, EvalError> {
    let t_steps = cfg.model.t_steps;
    let dt = cfg.model.dt;

    let input = bev_to_tensor(&rasterize_input::<f32>(scenario, &cfg.roi, &cfg.cloud)?);
    let mut local = store.clone();
    let mut g: Graph<f32> = Graph::new();
    let f = model.forward(&mut g, &mut local, input, false)?;
    let cost = CostVolume::from_tensor(g.value(f.cost));
    let detections = decode_detections(
        g.value(f.cls_logits),
        g.value(f.reg),
        field,
        &cfg.model,
        &cfg.detect,
    );

    let candidates = sample_trajectories::<f64>(
        &scenario.sdv,
        &cfg.sampler.with_seed(derive_seed(cfg.eval.seed, index as u64)),
        t_steps,
        dt,
    )?;
    let nmp = plan(&cost, &cfg.roi, &candidates)?;

    let source = if cfg.eval.manual_use_ground_truth {
        ObstacleSource::GroundTruth
    } else {
        ObstacleSource::Detections(&detections)
    };
    let manual_name = format!("manual_{}", source.label());
    let manual_cost = manual_cost_volume(scenario, &cfg.roi, t_steps, dt, source)?;
    let manual = plan(&manual_cost, &cfg.roi, &candidates)?;

    let ego = ego_extrapolation(&scenario.sdv_past, crate::scenario::SWEEP_DT, t_steps, dt)?;
    let acc = acc_rollout(scenario, t_steps, dt)?;
    let demo = scenario.demonstration.clone();

    let plans: Vec<(String, Trajectory<f64>)> = vec![
        (METHOD_NMP.to_string(), nmp.chosen),
        (METHOD_EGO.to_string(), ego),
        (METHOD_ACC.to_string(), acc),
        (manual_name, manual.chosen),
        (METHOD_DEMO.to_string(), demo),
    ];
    let plans = plans
        .into_iter()
        .map(|(name, tr)| Ok((name, evaluate(scenario, &tr, &cfg.eval.horizons)?)))
        .collect::<Result<_, EvalError>>()?;

    // Detection quality against present-frame boxes with centers in the ROI.
    let gts: Vec<_> = scenario
        .actors
        .iter()
        .map(|a| a.box_at(0.0))
        .filter(|b| cfg.roi.grid_of_xy(b.cx, b.cy).is_some())
        .collect();
    let ap_samples = match_detections(&detections, &gts, cfg.eval.detection_iou);

    Ok(ScenarioResult {
        plans,
        ap_samples,
        n_gt: gts.len(),
    })
}

pub const ROW_CSV_HEADER_3H: &str =
    "scenario,method,l2_1,l2_2,l2_3,collision_1,collision_2,collision_3,violation_1,violation_2,violation_3";

/// CSV for the per-scenario rows; columns expand with the horizon count.
pub fn rows_csv(out: &EvalOutput) -> String {
    let mut head = String::from("scenario,method");
    for tag in ["l2", "collision", "violation"] {
        for (i, _) in out.horizons.iter().enumerate() {
            head.push_str(&format!(",{tag}_{}", i + 1));
        }
    }
    let mut s = head;
    s.push('\n');
    for r in &out.rows {
        s.push_str(&format!("{},{}", r.scenario, r.method));
        for v in &r.l2 {
            s.push_str(&format!(",{v}"));
        }
        for v in &r.collision {
            s.push_str(&format!(",{v}"));
        }
        for v in &r.violation {
            s.push_str(&format!(",{v}"));
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario_gen::{generate, GenConfig};
    use crate::trainer::tests::tiny_run_config;

    fn tiny_dataset(cfg: &RunConfig, n: usize) -> Vec<Scenario> {
        (0..n)
            .map(|i| {
                generate(
                    &GenConfig {
                        roi: cfg.roi,
                        ..GenConfig::default()
                    },
                    100 + i as u64,
                )
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn evaluates_all_methods_on_every_scenario() {
        let cfg = tiny_run_config();
        let scenarios = tiny_dataset(&cfg, 3);
        // An untrained store: each parallel clone initializes parameters on
        // first touch, identically, because init depends only on (seed, name).
        let store: ParamStore<f32> = ParamStore::new(0);
        let out = evaluate_dataset(&cfg, &store, &scenarios).unwrap();
        assert_eq!(out.n_scenarios, 3);
        assert_eq!(out.rows.len(), 3 * 5);
        let methods: Vec<&str> = out.methods.iter().map(|m| m.method.as_str()).collect();
        assert!(methods.contains(&"nmp"));
        assert!(methods.contains(&"ego"));
        assert!(methods.contains(&"acc"));
        assert!(methods.contains(&"manual_detections"));
        assert!(methods.contains(&"demo"));
        for m in &out.methods {
            assert_eq!(m.metrics.n_scenarios, 3);
            assert!(m.metrics.l2_at.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn demo_rows_score_zero_error_and_no_events() {
        let cfg = tiny_run_config();
        let scenarios = tiny_dataset(&cfg, 2);
        let store: ParamStore<f32> = ParamStore::new(0);
        let out = evaluate_dataset(&cfg, &store, &scenarios).unwrap();
        let demo = out.methods.iter().find(|m| m.method == "demo").unwrap();
        for i in 0..cfg.eval.horizons.len() {
            assert_eq!(demo.metrics.l2_at[i], 0.0);
            assert_eq!(demo.metrics.collision_rate_at[i], 0.0);
            assert_eq!(demo.metrics.lane_violation_at[i], 0.0);
        }
    }

    #[test]
    fn evaluation_is_deterministic() {
        let cfg = tiny_run_config();
        let scenarios = tiny_dataset(&cfg, 2);
        let store: ParamStore<f32> = ParamStore::new(7);
        let a = evaluate_dataset(&cfg, &store, &scenarios).unwrap();
        let b = evaluate_dataset(&cfg, &store, &scenarios).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(rows_csv(&a), rows_csv(&b));
    }

    #[test]
    fn ground_truth_source_is_reported() {
        let mut cfg = tiny_run_config();
        cfg.eval.manual_use_ground_truth = true;
        let scenarios = tiny_dataset(&cfg, 1);
        let store: ParamStore<f32> = ParamStore::new(0);
        let out = evaluate_dataset(&cfg, &store, &scenarios).unwrap();
        assert_eq!(out.manual_source, "ground_truth");
        assert!(out
            .methods
            .iter()
            .any(|m| m.method == "manual_ground_truth"));
    }

    #[test]
    fn csv_layout_matches_default_horizons() {
        let cfg = tiny_run_config();
        let scenarios = tiny_dataset(&cfg, 1);
        let store: ParamStore<f32> = ParamStore::new(0);
        let out = evaluate_dataset(&cfg, &store, &scenarios).unwrap();
        let csv = rows_csv(&out);
        assert!(csv.starts_with(ROW_CSV_HEADER_3H));
        assert_eq!(csv.lines().count(), 1 + out.rows.len());
    }
}
