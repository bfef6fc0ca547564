//! Training loop: rasterize once per scenario, then cycle scenarios one
//! per step, drawing fresh max-margin negatives every visit. Fully
//! deterministic under a fixed config; the step history carries no
//! wall-clock state.

use crate::bev::{rasterize_input, BevError};
use crate::config::{derive_seed, OptimizerKind, RunConfig};
use crate::model::loss::{build_loss, perception_targets, plan_targets, PerceptionTargets};
use crate::model::{bev_to_tensor, collect_param_grads, ModelError, NmpModel};
use crate::net::store::{ParamStore, StoreError};
use crate::net::{Graph, Tensor4};
use crate::sampler::SamplerError;
use crate::scenario::Scenario;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("no training scenarios")]
    NoScenarios,
    #[error("non-finite loss at step {step}")]
    NonFinite { step: usize },
    #[error(transparent)]
    Bev(#[from] BevError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// One optimizer step. `plan` is absent when the scenario was skipped for
/// the planning term or the term is ablated.
#[derive(Debug, Clone, PartialEq)]
pub struct StepLog {
    pub step: usize,
    pub scenario: usize,
    pub total: f64,
    pub cls: f64,
    pub reg: f64,
    pub plan: Option<f64>,
    pub plan_skipped: bool,
    pub n_pos: usize,
}

pub const STEP_CSV_HEADER: &str = "step,scenario,total,cls,reg,plan,plan_skipped,n_pos";

impl StepLog {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.step,
            self.scenario,
            self.total,
            self.cls,
            self.reg,
            self.plan.map(|p| p.to_string()).unwrap_or_default(),
            self.plan_skipped,
            self.n_pos
        )
    }
}

pub struct TrainReport {
    pub history: Vec<StepLog>,
    /// Parameters after the last step.
    pub store: ParamStore<f32>,
    /// Parameters at the end of the epoch with the lowest mean total loss.
    pub best_store: ParamStore<f32>,
    pub best_epoch: usize,
    pub best_epoch_mean: f64,
}

struct Example {
    input: Tensor4<f32>,
    perception: PerceptionTargets,
}

/// Train on `scenarios`, reporting each step through `on_step`.
pub fn train(
    cfg: &RunConfig,
    scenarios: &[Scenario],
    mut on_step: impl FnMut(&StepLog),
) -> Result<TrainReport, TrainError> {
    if scenarios.is_empty() {
        return Err(TrainError::NoScenarios);
    }
    let model = NmpModel::new(cfg.model.clone());
    let mut store: ParamStore<f32> = ParamStore::new(cfg.train.seed);
    let examples: Vec<Example> = scenarios
        .iter()
        .map(|s| {
            Ok(Example {
                input: bev_to_tensor(&rasterize_input::<f32>(s, &cfg.roi, &cfg.cloud)?),
                perception: perception_targets(s, &cfg.roi, &cfg.model),
            })
        })
        .collect::<Result<_, TrainError>>()?;

    let n = examples.len();
    let mut history = Vec::with_capacity(cfg.train.steps);
    let mut best_store = store.clone();
    let mut best_epoch = 0;
    let mut best_epoch_mean = f64::INFINITY;
    let mut epoch_sum = 0.0;

    for step in 0..cfg.train.steps {
        let idx = step % n;
        let scenario = &scenarios[idx];
        let ex = &examples[idx];

        let negatives = crate::sampler::sample_negatives::<f64>(
            &scenario.sdv,
            &scenario.demonstration,
            &cfg.sampler.with_seed(derive_seed(cfg.train.seed, step as u64)),
            cfg.sampler.n_negatives,
        )?;
        let pt = plan_targets(scenario, &cfg.roi, &negatives);

        let mut g: Graph<f32> = Graph::new();
        let f = model.forward(&mut g, &mut store, ex.input.clone(), true)?;
        let nodes = build_loss(&mut g, &f, &ex.perception, Some(&pt), &cfg.model, &cfg.loss);

        let item = |id| g.value(id).item() as f64;
        let log = StepLog {
            step,
            scenario: idx,
            total: item(nodes.total),
            cls: nodes.cls.map(&item).unwrap_or(0.0),
            reg: nodes.reg.map(&item).unwrap_or(0.0),
            plan: nodes.plan.map(&item),
            plan_skipped: nodes.plan_skipped,
            n_pos: nodes.n_pos,
        };
        if !log.total.is_finite() {
            return Err(TrainError::NonFinite { step });
        }

        g.backward(nodes.total);
        let grads = collect_param_grads(&mut g, &f.bindings);
        match cfg.train.optimizer {
            OptimizerKind::Sgd => store.sgd_step(&grads, cfg.train.lr, cfg.train.momentum)?,
            OptimizerKind::Adam => store.adam_step(&grads, cfg.train.lr)?,
        }

        epoch_sum += log.total;
        on_step(&log);
        history.push(log);

        if (step + 1) % n == 0 {
            let mean = epoch_sum / n as f64;
            epoch_sum = 0.0;
            let epoch = step / n;
            if mean < best_epoch_mean {
                best_epoch_mean = mean;
                best_epoch = epoch;
                best_store = store.clone();
            }
        }
    }
    if history.len() < n && best_epoch_mean.is_infinite() {
        best_store = store.clone();
    }

    Ok(TrainReport {
        history,
        store,
        best_store,
        best_epoch,
        best_epoch_mean,
    })
}
