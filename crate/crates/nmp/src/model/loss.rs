//! Training losses: classification over anchors with hard negative mining,
//! per-timestep box regression for positive anchors, and the max-margin
//! planning loss that pushes demonstrated trajectories below sampled
//! alternatives in the learned cost volume.

use super::anchors;
use super::{Forward, ModelConfig};
use crate::bev::RoiSpec;
use crate::geometry::Trajectory;
use crate::net::{GatherPoint, Graph, NodeId, Tensor4};
use crate::rules;
use crate::scalar::Real;
use crate::scenario::Scenario;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct LossConfig {
    /// Weight of the regression term inside the perception loss.
    pub alpha: f64,
    /// Weight of the planning loss in the total.
    pub beta: f64,
    /// Margin added for trajectory steps that break a traffic rule.
    pub gamma: f64,
    /// Hard negatives mined per positive anchor.
    pub neg_ratio: usize,
    /// Negatives mined even when a scene has no positives, so empty
    /// roads still push scores down.
    pub min_negatives: usize,
    /// Demonstration steps allowed outside the raster before the
    /// scenario is dropped from the planning loss.
    pub max_demo_oob: usize,
    pub use_penalty: bool,
    pub use_plan_loss: bool,
    pub use_perception_loss: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            alpha: 1.0,
            beta: 0.1,
            gamma: 10.0,
            neg_ratio: 3,
            min_negatives: 16,
            max_demo_oob: 2,
            use_penalty: true,
            use_plan_loss: true,
            use_perception_loss: true,
        }
    }
}

/// A positive anchor with its ground-truth regression targets, one
/// six-vector per future frame.
#[derive(Debug, Clone)]
pub struct PositiveAnchor {
    pub k: usize,
    pub row: usize,
    pub col: usize,
    pub targets: Vec<[f64; 6]>,
}

#[derive(Debug, Clone, Default)]
pub struct PerceptionTargets {
    pub positives: Vec<PositiveAnchor>,
}

impl PerceptionTargets {
    pub fn n_pos(&self) -> usize {
        self.positives.len()
    }
}

/// Associate the anchor field with the actors visible at the present
/// frame and encode their motion over the regression horizon.
pub fn perception_targets(
    scenario: &Scenario,
    roi: &RoiSpec,
    mc: &ModelConfig,
) -> PerceptionTargets {
    let field = anchors::anchor_field(roi, &mc.anchors, mc.downsample);
    let fh = roi.h() / mc.downsample;
    let fw = roi.w() / mc.downsample;
    let mut boxes = Vec::new();
    let mut actor_of_box = Vec::new();
    for (ai, actor) in scenario.actors.iter().enumerate() {
        let b = actor.box_at(0.0);
        if roi.grid_of_xy(b.cx, b.cy).is_some() {
            boxes.push(b);
            actor_of_box.push(ai);
        }
    }
    let assignment = anchors::associate(&field, &boxes, mc.anchors.iou_threshold);
    let mut positives = Vec::new();
    for (idx, assigned) in assignment.iter().enumerate() {
        let Some(bi) = assigned else { continue };
        let actor = &scenario.actors[actor_of_box[*bi]];
        let targets = (0..mc.t_steps)
            .map(|t| anchors::encode(&field[idx], &actor.box_at(t as f64 * mc.dt)))
            .collect();
        positives.push(PositiveAnchor {
            k: idx / (fh * fw),
            row: idx / fw % fh,
            col: idx % fw,
            targets,
        });
    }
    PerceptionTargets { positives }
}

/// Per-negative planning-loss ingredients: where to read the cost volume
/// and the distance and rule-violation margins against the demonstration.
#[derive(Debug, Clone)]
pub struct NegTarget {
    pub points: Vec<GatherPoint>,
    pub dist: Vec<f64>,
    pub penalty: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PlanTargets {
    pub demo_points: Vec<GatherPoint>,
    pub demo_mask: Vec<f64>,
    pub oob_count: usize,
    pub negatives: Vec<NegTarget>,
}

/// Project the demonstration and the sampled negatives into cost-volume
/// coordinates and precompute the margins. Pure geometry; reusable
/// across training steps.
pub fn plan_targets(
    scenario: &Scenario,
    roi: &RoiSpec,
    negatives: &[Trajectory<f64>],
) -> PlanTargets {
    let demo = &scenario.demonstration;
    let t_steps = demo.waypoints.len();
    let max_row = (roi.h() - 1) as f64;
    let max_col = (roi.w() - 1) as f64;
    let mut demo_points = Vec::with_capacity(t_steps);
    let mut demo_mask = vec![0.0; t_steps];
    let mut oob_count = 0;
    for (i, wp) in demo.waypoints.iter().enumerate() {
        let (x, y) = wp.pose.position();
        let (row, col) = roi.grid_continuous(x, y);
        if (0.0..=max_row).contains(&row) && (0.0..=max_col).contains(&col) {
            demo_mask[i] = 1.0;
        } else {
            oob_count += 1;
        }
        demo_points.push(GatherPoint {
            channel: i,
            row,
            col,
        });
    }
    let negatives = negatives
        .iter()
        .map(|tr| {
            assert_eq!(tr.waypoints.len(), t_steps, "negative horizon mismatch");
            let mut points = Vec::with_capacity(t_steps);
            let mut dist = Vec::with_capacity(t_steps);
            let mut penalty = Vec::with_capacity(t_steps);
            for (i, wp) in tr.waypoints.iter().enumerate() {
                let (x, y) = wp.pose.position();
                let (row, col) = roi.grid_continuous(x, y);
                points.push(GatherPoint {
                    channel: i,
                    row,
                    col,
                });
                dist.push(wp.pose.distance(&demo.waypoints[i].pose));
                penalty.push(if rules::rule_violation(scenario, wp, i, demo.dt) {
                    1.0
                } else {
                    0.0
                });
            }
            NegTarget {
                points,
                dist,
                penalty,
            }
        })
        .collect();
    PlanTargets {
        demo_points,
        demo_mask,
        oob_count,
        negatives,
    }
}

/// Handles of the assembled loss subgraph. Component nodes are present
/// only when their term was actually built.
pub struct LossNodes {
    pub total: NodeId,
    pub cls: Option<NodeId>,
    pub reg: Option<NodeId>,
    pub plan: Option<NodeId>,
    /// True when the planning term was wanted but the demonstration left
    /// the raster too often.
    pub plan_skipped: bool,
    pub n_pos: usize,
}

pub fn build_loss<S: Real>(
    g: &mut Graph<S>,
    f: &Forward,
    perception: &PerceptionTargets,
    plan: Option<&PlanTargets>,
    mc: &ModelConfig,
    lc: &LossConfig,
) -> LossNodes {
    let n_pos = perception.n_pos();
    let mut cls = None;
    let mut reg = None;
    let mut plan_node = None;
    let mut plan_skipped = false;
    if lc.use_perception_loss {
        cls = build_cls(g, f, perception, lc);
        reg = Some(build_reg(g, f, perception, mc));
    }
    if lc.use_plan_loss {
        if let Some(pt) = plan {
            if pt.oob_count > lc.max_demo_oob {
                plan_skipped = true;
            } else if !pt.negatives.is_empty() {
                plan_node = Some(build_plan(g, f.cost, pt, mc, lc));
            }
        }
    }
    let mut total: Option<NodeId> = None;
    let mut accumulate = |g: &mut Graph<S>, term: NodeId| {
        total = Some(match total {
            Some(acc) => g.add(acc, term),
            None => term,
        });
    };
    if let Some(c) = cls {
        accumulate(g, c);
    }
    if let Some(r) = reg {
        let scaled = g.scale(r, S::of(lc.alpha));
        accumulate(g, scaled);
    }
    if let Some(p) = plan_node {
        let scaled = g.scale(p, S::of(lc.beta));
        accumulate(g, scaled);
    }
    let total = total.unwrap_or_else(|| g.constant(Tensor4::scalar(S::zero())));
    LossNodes {
        total,
        cls,
        reg,
        plan: plan_node,
        plan_skipped,
        n_pos,
    }
}

fn bce_of_negative(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Binary cross-entropy over the positive anchors plus the hardest
/// negatives, normalized by the number of selected anchors.
fn build_cls<S: Real>(
    g: &mut Graph<S>,
    f: &Forward,
    perception: &PerceptionTargets,
    lc: &LossConfig,
) -> Option<NodeId> {
    let logits = g.value(f.cls_logits).clone();
    let (_, a, fh, fw) = logits.shape();
    let len = a * fh * fw;
    let mut labels = Tensor4::zeros(1, a, fh, fw);
    let mut is_pos = vec![false; len];
    for p in &perception.positives {
        let i = (p.k * fh + p.row) * fw + p.col;
        labels.data[i] = S::one();
        is_pos[i] = true;
    }
    let n_pos = perception.n_pos();
    let n_neg = (lc.neg_ratio * n_pos).max(lc.min_negatives);
    let mut hard: Vec<(f64, usize)> = (0..len)
        .filter(|&i| !is_pos[i])
        .map(|i| (bce_of_negative(logits.data[i].as_f64()), i))
        .collect();
    hard.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    hard.truncate(n_neg);
    let n_sel = n_pos + hard.len();
    if n_sel == 0 {
        return None;
    }
    let mut weight = Tensor4::zeros(1, a, fh, fw);
    for (i, &p) in is_pos.iter().enumerate() {
        if p {
            weight.data[i] = S::one();
        }
    }
    for &(_, i) in &hard {
        weight.data[i] = S::one();
    }
    let bce = g.bce_with_logits(f.cls_logits, labels);
    let wn = g.constant(weight);
    let masked = g.mul(bce, wn);
    let sum = g.sum_all(masked);
    Some(g.scale(sum, S::of(1.0 / n_sel as f64)))
}

/// Smooth-L1 over the regression channels of positive anchors, all
/// frames and components, normalized by the positive count.
fn build_reg<S: Real>(
    g: &mut Graph<S>,
    f: &Forward,
    perception: &PerceptionTargets,
    mc: &ModelConfig,
) -> NodeId {
    let (_, cr, fh, fw) = g.value(f.reg).shape();
    let mut target = Tensor4::zeros(1, cr, fh, fw);
    let mut mask = Tensor4::zeros(1, cr, fh, fw);
    for p in &perception.positives {
        for (t, enc) in p.targets.iter().enumerate() {
            for (comp, &v) in enc.iter().enumerate() {
                let ch = mc.reg_channel(p.k, t, comp);
                let i = (ch * fh + p.row) * fw + p.col;
                target.data[i] = S::of(v);
                mask.data[i] = S::one();
            }
        }
    }
    let tn = g.constant(target);
    let diff = g.sub(f.reg, tn);
    let huber = g.smooth_l1(diff);
    let mn = g.constant(mask);
    let masked = g.mul(huber, mn);
    let sum = g.sum_all(masked);
    g.scale(sum, S::of(1.0 / perception.n_pos().max(1) as f64))
}

/// Max-margin planning loss: for each negative, the masked sum over
/// steps of relu(demo_cost - neg_cost + distance + rule_penalty), then
/// the max over negatives.
fn build_plan<S: Real>(
    g: &mut Graph<S>,
    cost: NodeId,
    pt: &PlanTargets,
    mc: &ModelConfig,
    lc: &LossConfig,
) -> NodeId {
    let t = pt.demo_points.len();
    let oob = S::of(mc.cost_clip);
    let demo_g = g.gather_bilinear(cost, &pt.demo_points, oob);
    let mask = Tensor4::from_vec(1, 1, 1, t, pt.demo_mask.iter().map(|&m| S::of(m)).collect());
    let mask_n = g.constant(mask);
    let mut per_negative = Vec::with_capacity(pt.negatives.len());
    for neg in &pt.negatives {
        let ng = g.gather_bilinear(cost, &neg.points, oob);
        let margin: Vec<S> = neg
            .dist
            .iter()
            .zip(&neg.penalty)
            .map(|(&d, &p)| S::of(d + if lc.use_penalty { lc.gamma * p } else { 0.0 }))
            .collect();
        let mn = g.constant(Tensor4::from_vec(1, 1, 1, t, margin));
        let gap = g.sub(demo_g, ng);
        let shifted = g.add(gap, mn);
        let hinge = g.relu(shifted);
        let masked = g.mul(hinge, mask_n);
        per_negative.push(g.sum_all(masked));
    }
    let cat = g.concat_channels(&per_negative);
    g.max_all(cat)
}
